// Acceptance suite: one line per criterion, PASS / FAIL / SKIP.
//
//   acceptance            run everything
//   acceptance --only N   run criterion N; exit 0 pass, 1 fail, 77 skip
//
// Criteria 8-10 need real citation data: set GCL_CORA_DIR and
// GCL_CITESEER_DIR to canonical bundles (see `gcl ingest --linqs`).

#include "common/oracles.hpp"
#include "common/reported.hpp"

#include "gcl/config.hpp"
#include "gcl/dpp.hpp"
#include "gcl/graph.hpp"
#include "gcl/kernels.hpp"
#include "gcl/log.hpp"
#include "gcl/objective.hpp"
#include "gcl/pipeline.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace gcl;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::kPass : Status::kFail, std::move(detail)};
}

unsigned mask_of(const std::vector<Index>& items) {
  unsigned m = 0;
  for (Index i : items) m |= 1u << i;
  return m;
}

// ---- 1: DPP law --------------------------------------------------------------

Outcome c1_dpp() {
  Stopwatch clock;
  const int draws = 200000;
  double worst_tv = 0.0;
  int inclusion_checks = 0, inclusion_misses = 0;
  for (int items = 4; items <= 6; ++items) {
    const KernelMatrix k =
        build_kernel(oracle::gaussian_pool(items, 3, 100 + static_cast<std::uint64_t>(items)),
                     Bandwidth::median());
    const SubsetLaw law = dpp_brute_probabilities(k);
    const int m = items / 2;
    const KdppSampler sampler(k, m);
    Rng rng = make_stream(1, Phase::kDemo, static_cast<std::uint64_t>(items));
    std::vector<double> freq(std::size_t{1} << items, 0.0);
    for (int d = 0; d < draws; ++d) freq[mask_of(sampler.draw(rng))] += 1.0 / draws;
    worst_tv = std::max(worst_tv, oracle::subset_tv(freq, law, m));

    // Unconstrained draws: singleton and pair inclusion against det(B_S).
    std::vector<double> hits(std::size_t{1} << items, 0.0);
    for (int d = 0; d < draws; ++d) {
      const unsigned y = mask_of(sample_dpp(k, rng));
      for (int a = 0; a < items; ++a) {
        if (!(y >> a & 1u)) continue;
        hits[1u << a] += 1.0;
        for (int b = a + 1; b < items; ++b)
          if (y >> b & 1u) hits[(1u << a) | (1u << b)] += 1.0;
      }
    }
    const Mat& bm = law.marginal;
    for (int a = 0; a < items; ++a)
      for (int b = a; b < items; ++b) {
        const double p = a == b ? bm(a, a) : bm(a, a) * bm(b, b) - bm(a, b) * bm(a, b);
        const double f = hits[(1u << a) | (1u << b)] / draws;
        const double sigma = std::sqrt(p * (1 - p) / draws);
        ++inclusion_checks;
        if (std::abs(f - p) > 3 * sigma) ++inclusion_misses;
      }
  }
  const double secs = clock.seconds();
  return verdict(worst_tv < 0.02 && inclusion_misses == 0 && secs < 120,
                 "max TV " + fmt(worst_tv, 4) + " (< 0.02), inclusion outside 3 sigma " +
                     std::to_string(inclusion_misses) + "/" + std::to_string(inclusion_checks) +
                     ", " + fmt(secs, 3) + " s (< 120)");
}

// ---- 2: gradients ------------------------------------------------------------

Outcome c2_gradients() {
  Stopwatch clock;
  double worst = 0.0;
  const int instances = 25;
  for (int s = 0; s < instances; ++s)
    worst = std::max(worst, oracle::make_grad_instance(static_cast<std::uint64_t>(s)).max_relative_error());
  const double secs = clock.seconds();
  return verdict(worst < 1e-4 && secs < 60,
                 std::to_string(instances) + " instances, max relative error " + fmt(worst, 3) +
                     " (< 1e-4), " + fmt(secs, 3) + " s (< 60)");
}

// ---- 3: unit-weight reduction -----------------------------------------------

Outcome c3_reduction() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    const Index d = 1 + static_cast<Index>(uniform_index(rng, 16));
    const Index m = 1 + static_cast<Index>(uniform_index(rng, 32));
    const Vec q = oracle::gaussian_pool(d, 1, s * 3 + 1).col(0) * 0.5;
    const Vec k = oracle::gaussian_pool(d, 1, s * 3 + 2).col(0) * 0.5;
    const Mat negs = oracle::gaussian_pool(m, d, s * 3 + 3) * 0.5;
    const double tau = 0.2 + 2.0 * uniform01(rng);
    const double got = contrastive_loss(q, k, negs, Vec::Ones(m), tau).loss;
    worst = std::max(worst, std::abs(got - oracle::plain_infonce(q, k, negs, tau)));
  }
  return verdict(worst <= 1e-12, "200 random inputs, max |difference| " + fmt(worst, 3) + " (<= 1e-12)");
}

// ---- 4: readout ---------------------------------------------------------------

Outcome c4_readout() {
  bool perm_exact = true, in_range = true;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Mat h = oracle::gaussian_pool(2 + static_cast<Index>(s % 9), 6, s) * 3.0;
    const Vec base = readout(h).out;
    in_range = in_range && base.minCoeff() > 0.0 && base.maxCoeff() < 1.0;
    std::vector<Index> perm(static_cast<std::size_t>(h.rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(i);
    Rng rng(s);
    shuffle_range(perm.begin(), perm.end(), rng);
    Mat p(h.rows(), h.cols());
    for (Index i = 0; i < h.rows(); ++i) p.row(i) = h.row(perm[static_cast<std::size_t>(i)]);
    perm_exact = perm_exact && readout(p).out == base;
  }
  Mat hand(2, 2);
  hand << 1, -1, 3, 1;
  const Vec out = readout(hand).out;
  const double err = std::max(std::abs(out[0] - 1.0 / (1.0 + std::exp(-5.0))),
                              std::abs(out[1] - 1.0 / (1.0 + std::exp(-1.0))));
  return verdict(perm_exact && in_range && err <= 1e-9,
                 std::string("permutation invariance ") + (perm_exact ? "exact" : "BROKEN") +
                     ", range " + (in_range ? "(0,1)" : "VIOLATED") + ", hand value error " +
                     fmt(err, 3) + " (<= 1e-9)");
}

// ---- 5: normalization --------------------------------------------------------

Outcome c5_normalization() {
  double worst = 0.0, asym = 0.0, eig_lo = 0.0, eig_hi = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    const Index n = 1 + static_cast<Index>(uniform_index(rng, 20));
    const double p = uniform01(rng);
    Mat adj = Mat::Zero(n, n);
    for (Index a = 0; a < n; ++a)
      for (Index b = a + 1; b < n; ++b)
        if (uniform01(rng) < p) adj(a, b) = adj(b, a) = 1.0;
    const Mat got = normalize_adjacency(adj).values;
    Mat dense = adj + Mat::Identity(n, n);
    const Vec deg = dense.rowwise().sum();
    const Mat d = deg.cwiseInverse().cwiseSqrt().asDiagonal();
    const Mat ref = d * dense * d;
    worst = std::max(worst, (got - ref).cwiseAbs().maxCoeff());
    asym = std::max(asym, (got - got.transpose()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Mat> eig(got);
    eig_lo = std::min(eig_lo, eig.eigenvalues().minCoeff());
    eig_hi = std::max(eig_hi, eig.eigenvalues().maxCoeff());
  }
  const bool ok = worst <= 1e-12 && asym == 0.0 && eig_lo >= -1.0 - 1e-12 && eig_hi <= 1.0 + 1e-12;
  return verdict(ok, "100 graphs (n <= 20), max |diff| " + fmt(worst, 3) + " (<= 1e-12), asymmetry " +
                         fmt(asym, 3) + ", eigenvalues in [" + fmt(eig_lo, 6) + ", " + fmt(eig_hi, 6) + "]");
}

// ---- 6: filter efficacy ------------------------------------------------------

// Block probabilities are not fixed by the criterion. With 0.2 / 0.005 a node
// has about 10 in-block edges and one cross edge every four nodes, so a
// 25-step walk usually stays in its block. At p_out = 0.02 single-walk views
// already mix the blocks and the filter is at chance even on the initial table.
// The "init" figure printed alongside is the same measurement before training.
Graph two_block_sbm(std::uint64_t seed) {
  SbmParams p{{50, 50}, 0.2, 0.005, 8, 3.0};
  return generate_sbm(p, seed);
}

TrainConfig synthetic_config(std::uint64_t seed, int epochs) {
  TrainConfig c;
  apply_preset(c, "full");
  c.epochs = epochs;
  c.batch_size = 50;
  c.patience = 0;
  c.seed = seed;
  return c;
}

struct FilterProbe {
  double fraction = 0.0;  // mean over anchors that transferred anything
  int anchors = 0;
  std::size_t moved = 0;

  std::string describe() const {
    if (anchors == 0) return "no transfers";
    return fmt(fraction, 3) + " over " + std::to_string(anchors) + " anchors (" + std::to_string(moved) +
           " moved)";
  }
};

// Rebuilds the sets of 20 evenly spaced anchors from the trainer's current table.
FilterProbe probe_filter(const Graph& g, const Trainer& t, const TrainConfig& cfg) {
  FilterProbe p;
  double frac = 0.0;
  for (NodeId a = 0; a < 100; a += 5) {
    const AnchorSets s = rebuild_anchor(g, t.table(), t.khops()[a], a, cfg, t.epoch());
    p.moved += s.transferred;
    if (s.transferred == 0) continue;
    frac += static_cast<double>(s.transferred_same_label) / static_cast<double>(s.transferred);
    ++p.anchors;
  }
  if (p.anchors) p.fraction = frac / p.anchors;
  return p;
}

Outcome c6_filter() {
  Stopwatch clock;
  double sum = 0.0;
  int seeds_with_transfers = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Graph g = two_block_sbm(seed);
    const TrainConfig cfg = synthetic_config(seed, 50);
    Trainer t(g, cfg);
    // The same measurement on the initial table, for context only.
    const FilterProbe at_init = probe_filter(g, t, cfg);
    while (!t.done()) t.step();
    const FilterProbe after = probe_filter(g, t, cfg);
    per_seed += " seed" + std::to_string(seed) + ": " + after.describe() + " [init: " + at_init.describe() + "];";
    if (after.anchors == 0) continue;
    sum += after.fraction;
    ++seeds_with_transfers;
  }
  const double secs = clock.seconds();
  if (seeds_with_transfers == 0)
    return {Status::kFail, "no transfers after 50 epochs on any seed, fraction undefined;" + per_seed +
                               " " + fmt(secs, 3) + " s"};
  const double mean = sum / seeds_with_transfers;
  return verdict(mean > 0.7 && seeds_with_transfers == 3 && secs < 300,
                 "same-block fraction " + fmt(mean, 3) + " (> 0.7);" + per_seed + " " + fmt(secs, 3) +
                     " s (< 300)");
}

// ---- 7: end-to-end sanity ----------------------------------------------------

Outcome c7_sanity() {
  Stopwatch clock;
  double loss10 = 0.0, loss50 = 0.0, worst_acc = 1.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SbmParams p{{50, 50}, 1.0, 0.0, 8, 3.0};
    const Graph g = generate_sbm(p, seed);
    TrainConfig cfg = synthetic_config(seed, 100);
    cfg.probe_runs = 10;
    const TrainResult r = train(g, cfg);
    loss10 += r.report.epochs.at(9).loss / 3.0;
    loss50 += r.report.epochs.at(49).loss / 3.0;
    worst_acc = std::min(worst_acc, r.report.test.mean);
    // Negatives per anchor are reported too: when the filter empties them the
    // loss is 0 by definition, which says nothing about representation quality.
    const EpochRecord& e10 = r.report.epochs.at(9);
    const EpochRecord& e50 = r.report.epochs.at(49);
    per_seed += " seed" + std::to_string(seed) + ": acc " + fmt(r.report.test.mean, 4) + " (best epoch " +
                std::to_string(r.report.best_epoch) + "), loss10 " + fmt(e10.loss, 4) + " (negatives " +
                fmt(e10.mean_negatives, 3) + "), loss50 " + fmt(e50.loss, 4) + " (negatives " +
                fmt(e50.mean_negatives, 3) + ", transferred " + std::to_string(e50.transferred) + ");";
  }
  return verdict(worst_acc == 1.0 && loss50 < loss10,
                 "min probe accuracy " + fmt(worst_acc, 4) + " (= 1), mean loss at 50 " + fmt(loss50, 5) +
                     " vs at 10 " + fmt(loss10, 5) + " (must be lower);" + per_seed + " " +
                     fmt(clock.seconds(), 3) + " s");
}

// ---- 8-10: citation data -----------------------------------------------------

std::optional<fs::path> dataset_dir(const char* env) {
  const char* v = std::getenv(env);
  if (!v || !*v) return std::nullopt;
  if (!fs::exists(fs::path(v) / "edges.tsv")) return std::nullopt;
  return fs::path(v);
}

Outcome missing(const char* what) {
  return {Status::kSkip, std::string(what) +
                             " bundle not available (set GCL_CORA_DIR / GCL_CITESEER_DIR to a bundle "
                             "written by `gcl ingest`)"};
}

struct DeskRun {
  double accuracy;
  double seconds;
};

DeskRun desk_run(const Graph& g, const std::string& preset, std::uint64_t seed,
                 const std::function<void(TrainConfig&)>& tweak = {}) {
  TrainConfig cfg;
  apply_preset(cfg, preset);
  apply_profile(cfg, "desk");
  cfg.seed = seed;
  if (tweak) tweak(cfg);
  Stopwatch clock;
  const TrainResult r = train(g, cfg);
  return {r.report.test.mean, clock.seconds()};
}

Outcome c8_cora() {
  const auto dir = dataset_dir("GCL_CORA_DIR");
  if (!dir) return missing("Cora");
  const Graph g = load_citation_bundle(*dir);
  double mean = 0.0, slowest = 0.0;
  std::string runs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DeskRun r = desk_run(g, "full", seed);
    mean += r.accuracy / 3.0;
    slowest = std::max(slowest, r.seconds);
    runs += " " + fmt(r.accuracy, 4);
  }
  return verdict(mean >= reported::kCoraDeskFloor && slowest <= 1800,
                 "mean accuracy " + fmt(mean, 4) + " (>= " + fmt(reported::kCoraDeskFloor, 3) +
                     "; full-scale target " + fmt(reported::kCoraFull, 3) + "%), seeds:" + runs +
                     ", slowest seed " + fmt(slowest, 4) + " s (<= 1800)");
}

Outcome c9_ablation() {
  const auto cora = dataset_dir("GCL_CORA_DIR");
  const auto citeseer = dataset_dir("GCL_CITESEER_DIR");
  if (!cora || !citeseer) return missing(!cora ? "Cora" : "Citeseer");
  std::array<double, 2> gap{};
  std::string detail;
  const std::array<fs::path, 2> dirs{*cora, *citeseer};
  for (std::size_t d = 0; d < 2; ++d) {
    const Graph g = load_citation_bundle(dirs[d]);
    double full = 0.0, plain = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      full += desk_run(g, "full", seed).accuracy / 5.0;
      plain += desk_run(g, "wo-all", seed).accuracy / 5.0;
    }
    gap[d] = full - plain;
    detail += std::string(d == 0 ? "Cora" : " Citeseer") + ": full " + fmt(full, 4) + " vs wo-all " +
              fmt(plain, 4) + ";";
  }
  const bool ok = (gap[0] >= 0.0 && gap[1] >= -0.005) || (gap[1] >= 0.0 && gap[0] >= -0.005);
  return verdict(ok, detail + " need full >= wo-all on one dataset, other within 0.5 points");
}

Outcome c10_sensitivity() {
  const auto dir = dataset_dir("GCL_CORA_DIR");
  if (!dir) return missing("Cora");
  const Graph g = load_citation_bundle(*dir);
  auto spread = [&](const std::vector<std::function<void(TrainConfig&)>>& variants, std::string& log) {
    double lo = 1.0, hi = 0.0;
    for (const auto& v : variants) {
      const double acc = desk_run(g, "full", 0, v).accuracy;
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
      log += " " + fmt(acc, 4);
    }
    return hi - lo;
  };
  std::string batch_log, walk_log;
  const double batch_spread = spread({[](TrainConfig& c) { c.batch_size = 50; },
                                      [](TrainConfig& c) { c.batch_size = 256; },
                                      [](TrainConfig& c) { c.batch_size = 1024; }},
                                     batch_log);
  const double walk_spread = spread({[](TrainConfig& c) { c.walk_steps = 10; },
                                     [](TrainConfig& c) { c.walk_steps = 25; },
                                     [](TrainConfig& c) { c.walk_steps = 40; }},
                                    walk_log);
  const double alpha_hi = desk_run(g, "full", 0, [](TrainConfig& c) { c.alpha = 0.99; }).accuracy;
  return verdict(batch_spread < 0.03 && walk_spread < 0.03,
                 "batch {50,256,1024}:" + batch_log + " (spread " + fmt(batch_spread, 3) +
                     "); walk {10,25,40}:" + walk_log + " (spread " + fmt(walk_spread, 3) +
                     "); alpha 0.99: " + fmt(alpha_hi, 4) + " (reported, not gated)");
}

// ---- 11: determinism -----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c11_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("gcl_accept_c11_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const std::string cli = GCL_CLI_PATH;
  auto sh = [](const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); };
  if (sh(cli + " sbm --blocks 40,40 --p-in 0.2 --p-out 0.02 --seed 11 --out " + (dir / "data").string()) != 0)
    return {Status::kFail, "could not generate the bundle"};
  const std::string train = cli + " train --data " + (dir / "data").string() +
                            " --set epochs=12 --set batch_size=50 --set probe_runs=2 --seed 5 --out ";
  if (sh(train + (dir / "a").string()) != 0 || sh(train + (dir / "b").string()) != 0)
    return {Status::kFail, "training run failed"};
  const std::string a = slurp(dir / "a" / "metrics.tsv"), b = slurp(dir / "b" / "metrics.tsv");
  const bool same = !a.empty() && a == b && slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin");
  fs::remove_all(dir);
  return verdict(same, std::string("two runs of `gcl train`, 12 epochs: metrics.tsv and checkpoint ") +
                           (same ? "byte-identical" : "DIFFER") + " (" + std::to_string(a.size()) + " bytes)");
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "DPP law", c1_dpp},
    {2, "gradient exactness", c2_gradients},
    {3, "unit-weight reduction", c3_reduction},
    {4, "readout contract", c4_readout},
    {5, "normalization contract", c5_normalization},
    {6, "filter efficacy (SBM)", c6_filter},
    {7, "end-to-end sanity (2-clique SBM)", c7_sanity},
    {8, "desk-scale Cora accuracy", c8_cora},
    {9, "ablation ordering", c9_ablation},
    {10, "hyperparameter insensitivity", c10_sensitivity},
    {11, "determinism", c11_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  set_log_level(LogLevel::kQuiet);
  configure_threads_from_env();
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }

  int failures = 0, passes = 0, skips = 0;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    std::cout << "C" << c.id << " " << tag << "  " << c.name << ": " << o.detail << std::endl;
    (o.status == Status::kPass ? passes : o.status == Status::kFail ? failures : skips)++;
  }
  if (only) {
    if (passes + failures + skips == 0) {
      std::cerr << "no criterion " << only << '\n';
      return 2;
    }
    return failures ? 1 : skips ? 77 : 0;
  }
  std::cout << passes << " passed, " << failures << " failed, " << skips << " skipped\n";
  return failures ? 1 : 0;
}
