#pragma once

// Training loop, linear-probe evaluation, run reports and exports.

#include "gcl/config.hpp"
#include "gcl/encoder.hpp"
#include "gcl/graph.hpp"
#include "gcl/kernels.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gcl {

// ---- linear probe -----------------------------------------------------------

struct ProbeOptions {
  int steps = 300;
  double lr = 0.01;
  double l2 = 1e-4;
  int check_every = 10;  // validation checks for model selection
};

struct ProbeResult {
  double mean = 0.0;  // test accuracy
  double std = 0.0;   // population std over runs
  double val_mean = 0.0;
  std::vector<double> test_accuracies;
  std::vector<double> val_accuracies;
};

/// Multinomial logistic regression (Adam, full batch) on frozen train-split
/// embeddings. Each run starts from its own seeded init and keeps the
/// parameters with the best validation accuracy; the test accuracy at that
/// point is reported. Run r draws from stream (seed, probe, r).
ProbeResult linear_evaluate(const Mat& embeddings, const std::vector<int>& labels,
                            const Splits& splits, int runs, std::uint64_t seed,
                            const ProbeOptions& opt = {});

// ---- training ---------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean anchor loss over the epoch
  double val_acc = 0.0;
  std::size_t transferred = 0;   // positives moved by the filter at the last rebuild
  double mean_negatives = 0.0;   // per anchor, at the last rebuild
  double max_weight_deviation = 0.0;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 = the initialization
  double best_val = 0.0;
  ProbeResult test;
  double wall_seconds = 0.0;
  std::uint64_t config_hash = 0;
  bool stopped_early = false;
};

/// One training run, advanced an epoch at a time.
///
/// Epoch e: rebuild contrast sets if e is a multiple of refresh_interval,
/// shuffle anchors, take one Adam step per minibatch, refresh the embedding
/// table with the updated encoder, and score the query table with the probe.
class Trainer {
 public:
  Trainer(const Graph& graph, TrainConfig cfg);

  EpochRecord step();
  bool done() const;

  int epoch() const { return epoch_; }
  const TrainConfig& config() const { return cfg_; }
  const EncoderParams& params() const { return params_; }
  const AdamState& adam() const { return adam_; }
  const EmbeddingTable& table() const { return table_; }
  const std::vector<AnchorSets>& sets() const { return sets_; }
  const std::vector<NodeSet>& khops() const { return khops_; }
  const RunReport& report() const { return report_; }

  /// Parameters with the best monitored score so far.
  Checkpoint best_checkpoint() const;

 private:
  double monitor(const EpochRecord& r) const;

  const Graph& graph_;
  TrainConfig cfg_;
  EncoderParams params_;
  AdamState adam_;
  EmbeddingTable table_;
  std::vector<NodeSet> khops_;
  std::vector<AnchorSets> sets_;
  std::vector<NodeId> anchors_;
  RunReport report_;
  int epoch_ = 0;
  int since_best_ = 0;
  double best_score_ = 0.0;
  EncoderParams best_params_;
  AdamState best_adam_;
  std::size_t last_transferred_ = 0;
  double last_negatives_ = 0.0;
};

struct TrainHooks {
  std::function<void(const Trainer&, const EpochRecord&)> on_epoch;
  /// When set, a NumericError dumps the config, the partial metrics and the
  /// message here before being rethrown.
  std::optional<std::filesystem::path> diagnostics_dir;
};

struct TrainResult {
  Checkpoint checkpoint;  // best-val parameters
  RunReport report;
  Mat embeddings;  // final embeddings of the checkpoint
};

/// Full run: epochs with early stopping, then final embeddings and the
/// probe over cfg.probe_runs seeds.
TrainResult train(const Graph& graph, const TrainConfig& cfg, const TrainHooks& hooks = {});

// ---- reports and exports ----------------------------------------------------

/// epoch, loss, val_acc, transferred, mean_negatives, max_weight_dev.
/// Contains nothing time-dependent, so identical runs give identical bytes.
void write_metrics(const RunReport& report, const std::filesystem::path& path);
void write_probe_runs(const ProbeResult& probe, const std::filesystem::path& path);
void write_summary(const RunReport& report, const TrainConfig& cfg,
                   const std::filesystem::path& path);
void write_diagnostics(const std::filesystem::path& dir, const TrainConfig& cfg,
                       const RunReport& partial, const std::string& message);

/// Writes `path` (node, label, d values, 12 significant digits) and a sibling
/// `<stem>.pca.tsv` with the top-2 principal component scores. Returns the
/// PCA path.
std::filesystem::path export_embeddings(const Mat& embeddings, const std::vector<int>& labels,
                                        const std::filesystem::path& path);

struct EmbeddingFile {
  std::vector<NodeId> ids;
  std::vector<int> labels;
  Mat values;
};
EmbeddingFile read_embeddings(const std::filesystem::path& path);

/// Scores on the two leading principal axes. Each axis is signed so its
/// largest-magnitude loading is positive.
Mat pca_2d(const Mat& x);

}  // namespace gcl
