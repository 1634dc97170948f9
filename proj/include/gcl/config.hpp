#pragma once

#include "gcl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gcl {

enum class DppMode { kExact, kGreedy, kOff };
enum class StopMetric { kValAccuracy, kLoss };

/// Every knob of a training run. Defaults follow the full-scale profile;
/// apply_profile("desk") shortens the run.
struct TrainConfig {
  // augmentation
  int walk_steps = 25;
  int hops = 1;  // K for seed positives

  // contrast-set construction
  double alpha = 0.9;
  int mixup_count = -1;  // -1: as many as there are seed positives
  double mixup_beta = 1.0;
  int head_steps = 100;
  double head_lr = 0.5;
  double head_l2 = 1e-3;
  int head_pool = 512;  // negatives subsampled for head training
  int refresh_interval = 5;

  // negative sampling
  DppMode dpp_mode = DppMode::kExact;
  int m_negatives = 64;
  int pool_size = 256;

  // loss
  double tau = 1.0;
  double tau_w = 1.0;
  bool filter_on = true;
  bool weights_on = true;
  bool positives_in_loss = false;

  // encoder / optimizer
  Index hidden_dim = 512;
  Index embed_dim = 512;
  double dropout = 0.7;
  double lr = 1e-3;

  // schedule
  int epochs = 2000;
  int batch_size = 256;
  int patience = 20;  // <= 0 disables early stopping
  StopMetric stop_metric = StopMetric::kValAccuracy;

  // evaluation
  int probe_runs = 50;
  int eval_walks = 4;

  std::uint64_t seed = 0;

  /// Throws ContractViolation naming the offending field.
  void validate() const;

  /// Canonical `key = value` text; parse_config_text(to_text()) round-trips.
  std::string to_text() const;

  /// FNV-1a of to_text().
  std::uint64_t hash() const;
};

/// Ablation presets: full, wo-all, with-alpha, with-dpp, with-w.
void apply_preset(TrainConfig& cfg, const std::string& preset);
const std::vector<std::string>& preset_names();
std::string preset_help();

/// desk: 300 epochs, 10 probe runs. full: 2000 epochs, 50 probe runs.
void apply_profile(TrainConfig& cfg, const std::string& profile);

/// Sets one field from its textual value. Unknown keys and malformed values
/// throw ParseError.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key = value` file, `#` comments. Errors carry the key and line.
/// Returns the keys that were set, in file order.
std::vector<std::string> parse_config_text(TrainConfig& cfg, const std::string& text,
                                           const std::string& source = "<config>");
std::vector<std::string> load_config_file(TrainConfig& cfg, const std::filesystem::path& path);

std::string to_string(DppMode mode);
std::string to_string(StopMetric metric);

}  // namespace gcl
