#include "gcl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace gcl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ParseError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define GCL_INT(name)                                                                     \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = parse_integer<decltype(c.name)>(#name, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }}
#define GCL_REAL(name)                                                                     \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
        [](const TrainConfig& c) { return fmt(c.name); }}
#define GCL_BOOL(name)                                                                    \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
        [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      GCL_INT(walk_steps),
      GCL_INT(hops),
      GCL_REAL(alpha),
      GCL_INT(mixup_count),
      GCL_REAL(mixup_beta),
      GCL_INT(head_steps),
      GCL_REAL(head_lr),
      GCL_REAL(head_l2),
      GCL_INT(head_pool),
      GCL_INT(refresh_interval),
      Field{"dpp_mode",
            [](TrainConfig& c, const std::string& v) {
              if (v == "exact") c.dpp_mode = DppMode::kExact;
              else if (v == "greedy") c.dpp_mode = DppMode::kGreedy;
              else if (v == "off") c.dpp_mode = DppMode::kOff;
              else throw ParseError("config key 'dpp_mode': expected exact, greedy or off, got '" + v + "'");
            },
            [](const TrainConfig& c) { return to_string(c.dpp_mode); }},
      GCL_INT(m_negatives),
      GCL_INT(pool_size),
      GCL_REAL(tau),
      GCL_REAL(tau_w),
      GCL_BOOL(filter_on),
      GCL_BOOL(weights_on),
      GCL_BOOL(positives_in_loss),
      GCL_INT(hidden_dim),
      GCL_INT(embed_dim),
      GCL_REAL(dropout),
      GCL_REAL(lr),
      GCL_INT(epochs),
      GCL_INT(batch_size),
      GCL_INT(patience),
      Field{"stop_metric",
            [](TrainConfig& c, const std::string& v) {
              if (v == "val_accuracy") c.stop_metric = StopMetric::kValAccuracy;
              else if (v == "loss") c.stop_metric = StopMetric::kLoss;
              else throw ParseError("config key 'stop_metric': expected val_accuracy or loss, got '" + v + "'");
            },
            [](const TrainConfig& c) { return to_string(c.stop_metric); }},
      GCL_INT(probe_runs),
      GCL_INT(eval_walks),
      GCL_INT(seed),
  };
  return table;
}

#undef GCL_INT
#undef GCL_REAL
#undef GCL_BOOL

}  // namespace

std::string to_string(DppMode mode) {
  switch (mode) {
    case DppMode::kExact: return "exact";
    case DppMode::kGreedy: return "greedy";
    case DppMode::kOff: return "off";
  }
  return "?";
}

std::string to_string(StopMetric metric) {
  return metric == StopMetric::kLoss ? "loss" : "val_accuracy";
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* name) {
    if (!ok) throw ContractViolation(std::string("config: ") + name + " is out of range");
  };
  positive(walk_steps >= 1, "walk_steps");
  positive(hops >= 0, "hops");
  positive(alpha > 0.0, "alpha");
  positive(mixup_count >= -1, "mixup_count");
  positive(mixup_beta > 0.0, "mixup_beta");
  positive(head_steps >= 0, "head_steps");
  positive(head_lr > 0.0, "head_lr");
  positive(head_l2 >= 0.0, "head_l2");
  positive(head_pool >= 1, "head_pool");
  positive(refresh_interval >= 1, "refresh_interval");
  positive(m_negatives >= 1, "m_negatives");
  positive(pool_size >= m_negatives, "pool_size (must be >= m_negatives)");
  positive(tau > 0.0, "tau");
  positive(tau_w > 0.0, "tau_w");
  positive(hidden_dim >= 1, "hidden_dim");
  positive(embed_dim >= 1, "embed_dim");
  positive(dropout >= 0.0 && dropout < 1.0, "dropout");
  positive(lr > 0.0, "lr");
  positive(epochs >= 0, "epochs");
  positive(batch_size >= 1, "batch_size");
  positive(probe_runs >= 1, "probe_runs");
  positive(eval_walks >= 1, "eval_walks");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"full", "wo-all", "with-alpha", "with-dpp",
                                                 "with-w"};
  return names;
}

std::string preset_help() {
  return "ablation presets (filter / DPP / weights):\n"
         "  full        on / exact / on    all components\n"
         "  wo-all      off / off / off    plain node-wise contrast\n"
         "  with-alpha  on / off / off     soft-margin filter only\n"
         "  with-dpp    off / exact / off  DPP negative sampling only\n"
         "  with-w      off / off / on     negative weights only";
}

void apply_preset(TrainConfig& cfg, const std::string& preset) {
  if (preset == "full") {
    cfg.filter_on = true, cfg.dpp_mode = DppMode::kExact, cfg.weights_on = true;
  } else if (preset == "wo-all") {
    cfg.filter_on = false, cfg.dpp_mode = DppMode::kOff, cfg.weights_on = false;
  } else if (preset == "with-alpha") {
    cfg.filter_on = true, cfg.dpp_mode = DppMode::kOff, cfg.weights_on = false;
  } else if (preset == "with-dpp") {
    cfg.filter_on = false, cfg.dpp_mode = DppMode::kExact, cfg.weights_on = false;
  } else if (preset == "with-w") {
    cfg.filter_on = false, cfg.dpp_mode = DppMode::kOff, cfg.weights_on = true;
  } else {
    throw ParseError("unknown preset '" + preset + "'");
  }
}

void apply_profile(TrainConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.epochs = 300, cfg.probe_runs = 10;
  } else if (profile == "full") {
    cfg.epochs = 2000, cfg.probe_runs = 50;
  } else {
    throw ParseError("unknown profile '" + profile + "' (expected desk or full)");
  }
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw ParseError("unknown config key '" + key + "'");
}

std::vector<std::string> parse_config_text(TrainConfig& cfg, const std::string& text,
                                           const std::string& source) {
  std::vector<std::string> keys;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    keys.push_back(key);
  }
  return keys;
}

std::vector<std::string> load_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(cfg, ss.str(), path.string());
}

}  // namespace gcl
