// gcl: ingest, sbm, train, eval, export and dpp-demo.

#include "gcl/config.hpp"
#include "gcl/dpp.hpp"
#include "gcl/graph.hpp"
#include "gcl/kernels.hpp"
#include "gcl/log.hpp"
#include "gcl/pipeline.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace gcl;

namespace {

std::string fmt(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---- ingest -------------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string linqs;
  std::string out;
  std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a) {
  IngestResult r = a.linqs.empty()
                       ? ingest_bundle(a.input)
                       : ingest_linqs(fs::path(a.linqs + ".content"), fs::path(a.linqs + ".cites"), a.seed);
  for (const auto& w : r.warnings) log_warn(w);
  write_citation_bundle(r.graph, a.out);
  if (r.remapped) {
    std::string map = "node\toriginal_id\n";
    for (std::size_t i = 0; i < r.original_ids.size(); ++i)
      map += std::to_string(i) + "\t" + r.original_ids[i] + "\n";
    write_file(fs::path(a.out) / "id_map.tsv", map);
    log_warn("node ids were remapped; mapping written to " + (fs::path(a.out) / "id_map.tsv").string());
  }
  std::cout << "nodes=" << r.graph.num_nodes() << " edges=" << r.graph.num_edges()
            << " classes=" << r.graph.num_classes() << '\n';
  return 0;
}

// ---- sbm ----------------------------------------------------------------------

struct SbmArgs {
  std::vector<std::size_t> blocks;
  double p_in = 0.0;
  double p_out = 0.0;
  Index feature_dim = 0;  // 0: max(8, block count)
  double separation = 3.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sbm(const SbmArgs& a) {
  SbmParams p{a.blocks, a.p_in, a.p_out,
              a.feature_dim > 0 ? a.feature_dim : std::max<Index>(8, static_cast<Index>(a.blocks.size())),
              a.separation};
  const Graph g = generate_sbm(p, a.seed);
  write_citation_bundle(g, a.out);
  std::cout << "nodes=" << g.num_nodes() << " edges=" << g.num_edges()
            << " classes=" << g.num_classes() << '\n';
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::string preset;
  std::string profile;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg;
  std::map<std::string, std::string> source;
  auto mark = [&](const std::vector<std::string>& keys, const char* from) {
    for (const auto& k : keys) source[k] = from;
  };
  if (!a.config.empty()) mark(load_config_file(cfg, a.config), "file");
  if (!a.profile.empty()) {
    apply_profile(cfg, a.profile);
    mark({"epochs", "probe_runs"}, "cli");
  }
  if (!a.preset.empty()) {
    apply_preset(cfg, a.preset);
    mark({"filter_on", "dpp_mode", "weights_on"}, "cli");
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    set_config_value(cfg, key, kv.substr(eq + 1));
    mark({key}, "cli");
  }
  if (a.seed) {
    cfg.seed = *a.seed;
    mark({"seed"}, "cli");
  }
  cfg.validate();

  std::istringstream lines(cfg.to_text());
  std::string line;
  std::cerr << "configuration (cli > file > default):\n";
  while (std::getline(lines, line)) {
    const std::string key = line.substr(0, line.find(' '));
    const auto it = source.find(key);
    std::cerr << "  " << line << "  [" << (it == source.end() ? "default" : it->second) << "]\n";
  }
  return cfg;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = resolve_config(a);
  const Graph graph = load_citation_bundle(a.data);
  const fs::path out = a.out;
  fs::create_directories(out);
  write_file(out / "config.txt", cfg.to_text());

  TrainHooks hooks;
  hooks.diagnostics_dir = out / "diagnostics";
  hooks.on_epoch = [](const Trainer&, const EpochRecord& r) {
    log_info("epoch " + std::to_string(r.epoch) + " loss=" + fmt(r.loss) + " val=" + fmt(r.val_acc));
  };
  const TrainResult res = train(graph, cfg, hooks);

  save_checkpoint(res.checkpoint, out / "checkpoint.bin");
  write_metrics(res.report, out / "metrics.tsv");
  write_probe_runs(res.report.test, out / "probe.tsv");
  write_summary(res.report, cfg, out / "summary.txt");
  export_embeddings(res.embeddings, graph.labels(), out / "embeddings.tsv");
  std::cout << "epochs=" << res.report.epochs.size() << " best_epoch=" << res.report.best_epoch
            << " test_acc_mean=" << fmt(res.report.test.mean, 6)
            << " test_acc_std=" << fmt(res.report.test.std, 6) << '\n';
  return 0;
}

// ---- eval / export --------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string embeddings;
  int runs = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Restored {
  Checkpoint ckpt;
  TrainConfig cfg;
};

Restored restore(const fs::path& dir, const Graph& graph) {
  const fs::path file = fs::is_directory(dir) ? dir / "checkpoint.bin" : dir;
  const fs::path cfg_path = file.parent_path() / "config.txt";
  Restored r{load_checkpoint(file), {}};
  if (fs::exists(cfg_path)) load_config_file(r.cfg, cfg_path);
  else log_warn(cfg_path.string() + " not found; using default walk settings");
  if (r.cfg.hash() != r.ckpt.config_hash)
    log_warn("config.txt does not match the configuration stored in the checkpoint");
  const EncoderDims dims = r.ckpt.params.dims();
  if (dims.d_in != graph.feature_dim())
    throw FormatError("checkpoint expects " + std::to_string(dims.d_in) +
                      " input features but the bundle has " + std::to_string(graph.feature_dim()));
  return r;
}

int run_eval(const EvalArgs& a) {
  const Graph graph = load_citation_bundle(a.data);
  Mat emb;
  std::uint64_t seed = a.seed.value_or(0);
  fs::path out = a.out;
  if (!a.embeddings.empty()) {
    EmbeddingFile f = read_embeddings(a.embeddings);
    if (f.ids.size() != graph.num_nodes())
      throw FormatError(a.embeddings + ": " + std::to_string(f.ids.size()) + " rows but the bundle has " +
                        std::to_string(graph.num_nodes()) + " nodes");
    emb = Mat(f.values.rows(), f.values.cols());
    for (std::size_t i = 0; i < f.ids.size(); ++i) {
      if (f.ids[i] < 0 || static_cast<std::size_t>(f.ids[i]) >= graph.num_nodes())
        throw RangeError(a.embeddings + ": node id " + std::to_string(f.ids[i]) + " out of range");
      emb.row(f.ids[i]) = f.values.row(static_cast<Index>(i));
    }
    if (out.empty()) out = fs::path(a.embeddings).parent_path() / "eval.tsv";
  } else {
    if (a.checkpoint.empty()) throw ParseError("eval needs --checkpoint or --embeddings");
    const Restored r = restore(a.checkpoint, graph);
    if (!a.seed) seed = r.cfg.seed;
    emb = final_embeddings(r.ckpt.params, graph, r.cfg);
    if (out.empty())
      out = (fs::is_directory(a.checkpoint) ? fs::path(a.checkpoint) : fs::path(a.checkpoint).parent_path()) /
            "eval.tsv";
  }
  const ProbeResult p = linear_evaluate(emb, graph.labels(), graph.splits(), a.runs, seed);
  write_probe_runs(p, out);
  std::cout << "accuracy mean=" << fmt(p.mean, 6) << " std=" << fmt(p.std, 6) << " runs=" << a.runs
            << '\n';
  return 0;
}

struct ExportArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int run_export(const ExportArgs& a) {
  const Graph graph = load_citation_bundle(a.data);
  const Restored r = restore(a.checkpoint, graph);
  const Mat emb = final_embeddings(r.ckpt.params, graph, r.cfg);
  const fs::path pca = export_embeddings(emb, graph.labels(), a.out);
  std::cout << "wrote " << a.out << " and " << pca.string() << '\n';
  return 0;
}

// ---- dpp-demo -------------------------------------------------------------------

struct DemoArgs {
  int pool_size = 6;
  int m = 3;
  long draws = 200000;
  std::uint64_t seed = 0;
  int dim = 3;
  double bandwidth = 0.0;  // 0: median heuristic
};

int run_dpp_demo(const DemoArgs& a) {
  if (a.pool_size < 1 || a.pool_size > kBruteForceLimit)
    throw ContractViolation("--pool-size must be in [1, " + std::to_string(kBruteForceLimit) + "]");
  if (a.m < 0 || a.m > a.pool_size) throw ContractViolation("--m must be in [0, pool size]");
  if (a.draws < 0) throw ContractViolation("--draws must be non-negative");

  Rng rng = make_stream(a.seed, Phase::kDemo);
  std::normal_distribution<double> normal;
  Mat pool(a.pool_size, a.dim);
  for (Index i = 0; i < pool.size(); ++i) pool.data()[i] = normal(rng);
  const KernelMatrix kernel =
      build_kernel(pool, a.bandwidth > 0 ? Bandwidth::of(a.bandwidth) : Bandwidth::median());
  const SubsetLaw law = dpp_brute_probabilities(kernel);

  std::vector<double> counts(std::size_t{1} << a.pool_size, 0.0);
  if (a.draws > 0) {
    const KdppSampler sampler(kernel, a.m);
    for (long d = 0; d < a.draws; ++d) {
      unsigned mask = 0;
      for (Index i : sampler.draw(rng)) mask |= 1u << i;
      counts[mask] += 1.0;
    }
  }

  std::cout << "# pool_size=" << a.pool_size << " m=" << a.m << " draws=" << a.draws
            << " bandwidth=" << fmt(kernel.bandwidth) << '\n';
  std::cout << "# kernel\n";
  for (Index i = 0; i < kernel.size(); ++i) {
    std::cout << '#';
    for (Index j = 0; j < kernel.size(); ++j) std::cout << ' ' << fmt(kernel.L(i, j), 6);
    std::cout << '\n';
  }
  const Eigen::SelfAdjointEigenSolver<Mat> eig(kernel.L, Eigen::EigenvaluesOnly);
  std::cout << "# eigenvalues";
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) std::cout << ' ' << fmt(eig.eigenvalues()[i], 6);
  std::cout << '\n';
  std::cout << (a.draws > 0 ? "subset\tlaw\tempirical\n" : "subset\tlaw\n");
  double tv = 0.0;
  for (unsigned mask = 0; mask < counts.size(); ++mask) {
    if (std::popcount(mask) != a.m) continue;
    std::string name = "{";
    for (int i = 0; i < a.pool_size; ++i)
      if (mask >> i & 1u) name += (name.size() > 1 ? "," : "") + std::to_string(i);
    name += "}";
    const double p = law.conditional(mask, a.m);
    std::cout << name << '\t' << fmt(p, 8);
    if (a.draws > 0) {
      const double e = counts[mask] / static_cast<double>(a.draws);
      tv += std::abs(p - e);
      std::cout << '\t' << fmt(e, 8);
    }
    std::cout << '\n';
  }
  if (a.draws > 0) std::cout << "tv=" << fmt(0.5 * tv, 6) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Node-wise graph contrastive learning with class-collision filtering and DPP negatives"};
  app.require_subcommand(1);
  int threads = 0;
  bool verbose = false, quiet = false;
  app.add_option("--threads", threads, "worker threads (overrides GCL_NUM_THREADS)");
  app.add_flag("-v,--verbose", verbose, "log per-epoch progress");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "validate and normalize a citation bundle");
  c_ingest->add_option("--input", ingest.input, "bundle directory (edges/features/labels/splits .tsv)");
  c_ingest->add_option("--linqs", ingest.linqs,
                       "LINQS prefix instead of a bundle: reads <prefix>.content and <prefix>.cites");
  c_ingest->add_option("--out", ingest.out, "output bundle directory")->required();
  c_ingest->add_option("--seed", ingest.seed, "split seed for --linqs");

  SbmArgs sbm;
  auto* c_sbm = app.add_subcommand("sbm", "generate a planted-partition bundle");
  c_sbm->add_option("--blocks", sbm.blocks, "block sizes, comma separated")->required()->delimiter(',');
  c_sbm->add_option("--p-in", sbm.p_in, "within-block edge probability")->required();
  c_sbm->add_option("--p-out", sbm.p_out, "between-block edge probability")->required();
  c_sbm->add_option("--feature-dim", sbm.feature_dim, "feature width (default max(8, blocks))");
  c_sbm->add_option("--separation", sbm.separation, "distance between block feature means");
  c_sbm->add_option("--seed", sbm.seed);
  c_sbm->add_option("--out", sbm.out, "output bundle directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train an encoder and evaluate it with the linear probe");
  c_train->add_option("--data", tr.data, "bundle directory")->required();
  c_train->add_option("--config", tr.config, "key = value config file");
  c_train->add_option("--preset", tr.preset, "ablation preset")
      ->check(CLI::IsMember(preset_names()));
  c_train->add_option("--profile", tr.profile, "desk (300 epochs, 10 probe runs) or full (2000, 50)")
      ->check(CLI::IsMember({"desk", "full"}));
  c_train->add_option("--set", tr.overrides, "override one config key (key=value), repeatable");
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--out", tr.out, "run directory")->required();
  c_train->footer(preset_help());

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "linear probe on a trained encoder or exported embeddings");
  c_eval->add_option("--checkpoint", ev.checkpoint, "run directory or checkpoint file");
  c_eval->add_option("--embeddings", ev.embeddings, "embeddings TSV written by train/export");
  c_eval->add_option("--data", ev.data, "bundle directory")->required();
  c_eval->add_option("--runs", ev.runs, "probe runs")->check(CLI::PositiveNumber);
  c_eval->add_option("--seed", ev.seed, "probe seed (default: the run's seed)");
  c_eval->add_option("--out", ev.out, "per-run accuracy TSV");

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export", "write final embeddings and their 2-D PCA");
  c_export->add_option("--checkpoint", ex.checkpoint, "run directory or checkpoint file")->required();
  c_export->add_option("--data", ex.data, "bundle directory")->required();
  c_export->add_option("--out", ex.out, "embeddings TSV path")->required();

  DemoArgs demo;
  auto* c_demo = app.add_subcommand("dpp-demo", "compare exact k-DPP draws with the enumerated law");
  c_demo->add_option("--pool-size", demo.pool_size, "items (at most 12)");
  c_demo->add_option("--m", demo.m, "subset size");
  c_demo->add_option("--draws", demo.draws, "sampler draws (0 prints the law only)");
  c_demo->add_option("--seed", demo.seed);
  c_demo->add_option("--dim", demo.dim, "embedding width")->check(CLI::PositiveNumber);
  c_demo->add_option("--bandwidth", demo.bandwidth, "kernel bandwidth (default: median heuristic)");

  CLI11_PARSE(app, argc, argv);

  set_log_level(quiet ? LogLevel::kQuiet : verbose ? LogLevel::kInfo : LogLevel::kWarn);
  if (threads > 0) setenv("GCL_NUM_THREADS", std::to_string(threads).c_str(), 1);
  configure_threads_from_env();

  try {
    if (*c_ingest) {
      if (ingest.input.empty() == ingest.linqs.empty())
        throw ParseError("ingest needs exactly one of --input or --linqs");
      return run_ingest(ingest);
    }
    if (*c_sbm) return run_sbm(sbm);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev);
    if (*c_export) return run_export(ex);
    if (*c_demo) return run_dpp_demo(demo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
