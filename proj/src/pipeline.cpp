#include "gcl/pipeline.hpp"

#include "gcl/log.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace gcl {
namespace {

std::string fmt(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Index argmax_row(const Eigen::Ref<const RowVec>& r) {
  Index best = 0;
  for (Index j = 1; j < r.size(); ++j)
    if (r[j] > r[best]) best = j;
  return best;
}

double accuracy(const Mat& x, const Mat& w, const RowVec& b, const std::vector<int>& y) {
  if (y.empty()) return 0.0;
  Mat logits = x * w;
  logits.rowwise() += b;
  std::size_t hit = 0;
  for (Index i = 0; i < logits.rows(); ++i)
    if (argmax_row(logits.row(i)) == y[static_cast<std::size_t>(i)]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

struct Split {
  Mat x;
  std::vector<int> y;
};

// Z-scores every split with the train split's column statistics. Sigmoid
// readouts vary by ~1e-2 per column, which a fixed-step probe barely moves on.
void standardize(Split& tr, Split& va, Split& te) {
  const RowVec mean = tr.x.colwise().mean();
  RowVec sd = ((tr.x.rowwise() - mean).cwiseAbs2().colwise().mean()).cwiseSqrt();
  for (Index j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 1e-12)) sd[j] = 1.0;
  for (Split* s : {&tr, &va, &te})
    if (s->x.rows() > 0) s->x = (s->x.rowwise() - mean).array().rowwise() / sd.array();
}

Split gather(const Mat& emb, const std::vector<int>& labels, const NodeSet& ids) {
  Split s{Mat(static_cast<Index>(ids.size()), emb.cols()), {}};
  s.y.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    s.x.row(static_cast<Index>(i)) = emb.row(ids[i]);
    s.y.push_back(labels[static_cast<std::size_t>(ids[i])]);
  }
  return s;
}

struct RunScore {
  double val = 0.0;
  double test = 0.0;
};

RunScore probe_run(const Split& tr, const Split& va, const Split& te, int classes, Rng& rng,
                   const ProbeOptions& opt) {
  const Index d = tr.x.cols(), n = tr.x.rows();
  std::normal_distribution<double> init(0.0, 0.01);
  Mat w(d, classes);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = init(rng);
  RowVec b = RowVec::Zero(classes);
  Mat mw = Mat::Zero(d, classes), vw = Mat::Zero(d, classes);
  RowVec mb = RowVec::Zero(classes), vb = RowVec::Zero(classes);
  Mat y = Mat::Zero(n, classes);
  for (Index i = 0; i < n; ++i) y(i, tr.y[static_cast<std::size_t>(i)]) = 1.0;

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  RunScore best{-1.0, 0.0};
  for (int step = 1; step <= opt.steps; ++step) {
    Mat p = tr.x * w;
    p.rowwise() += b;
    for (Index i = 0; i < n; ++i) {
      const double mx = p.row(i).maxCoeff();
      p.row(i) = (p.row(i).array() - mx).exp().matrix();
      p.row(i) /= p.row(i).sum();
    }
    const Mat g = (p - y) / static_cast<double>(n);
    const Mat gw = tr.x.transpose() * g + opt.l2 * w;
    const RowVec gb = g.colwise().sum();
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseAbs2();
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
    w.array() -= opt.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    b.array() -= opt.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);

    if (step % opt.check_every == 0 || step == opt.steps) {
      const double v = accuracy(va.x, w, b, va.y);
      if (v > best.val) best = {v, te.y.empty() ? 0.0 : accuracy(te.x, w, b, te.y)};
    }
  }
  return best;
}

int class_count(const std::vector<int>& labels) {
  require(!labels.empty(), "probe needs labels");
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

// Validation-only probe used to monitor training; separate stream from the
// final evaluation.
double probe_validation(const Mat& emb, const std::vector<int>& labels, const Splits& splits,
                        std::uint64_t seed) {
  Split tr = gather(emb, labels, splits.train), va = gather(emb, labels, splits.val), te;
  standardize(tr, va, te);
  Rng rng = make_stream(seed, Phase::kProbe, ~0ULL);
  return probe_run(tr, va, te, class_count(labels), rng, {}).val;
}

}  // namespace

ProbeResult linear_evaluate(const Mat& embeddings, const std::vector<int>& labels,
                            const Splits& splits, int runs, std::uint64_t seed,
                            const ProbeOptions& opt) {
  require(runs >= 1, "linear_evaluate: runs must be at least 1");
  require(static_cast<std::size_t>(embeddings.rows()) == labels.size(),
          "linear_evaluate: one embedding row per label");
  if (splits.train.empty() || splits.val.empty() || splits.test.empty())
    throw FormatError("linear_evaluate: train, val and test splits must all be non-empty");
  if (!embeddings.allFinite()) throw NumericError("linear_evaluate: non-finite embeddings");
  const int classes = class_count(labels);
  Split tr = gather(embeddings, labels, splits.train);
  Split va = gather(embeddings, labels, splits.val);
  Split te = gather(embeddings, labels, splits.test);
  standardize(tr, va, te);

  ProbeResult out;
  for (int r = 0; r < runs; ++r) {
    Rng rng = make_stream(seed, Phase::kProbe, static_cast<std::uint64_t>(r));
    const RunScore s = probe_run(tr, va, te, classes, rng, opt);
    out.test_accuracies.push_back(s.test);
    out.val_accuracies.push_back(s.val);
  }
  const double n = static_cast<double>(runs);
  out.mean = std::accumulate(out.test_accuracies.begin(), out.test_accuracies.end(), 0.0) / n;
  out.val_mean = std::accumulate(out.val_accuracies.begin(), out.val_accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : out.test_accuracies) ss += (a - out.mean) * (a - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

// ---- Trainer ----------------------------------------------------------------

Trainer::Trainer(const Graph& graph, TrainConfig cfg) : graph_(graph), cfg_(std::move(cfg)) {
  cfg_.validate();
  require(graph.num_nodes() > 0, "training needs at least one node");
  if (static_cast<std::size_t>(cfg_.batch_size) > graph.num_nodes())
    throw ContractViolation("config: batch_size (" + std::to_string(cfg_.batch_size) +
                            ") exceeds the node count (" + std::to_string(graph.num_nodes()) + ")");
  if (cfg_.stop_metric == StopMetric::kValAccuracy &&
      (graph.splits().train.empty() || graph.splits().val.empty()))
    throw FormatError("validation-based stopping needs non-empty train and val splits");

  params_ = xavier_init({graph.feature_dim(), cfg_.hidden_dim, cfg_.embed_dim}, cfg_.seed);
  adam_ = AdamState::fresh(params_.dims(), cfg_.lr);
  khops_ = all_k_hop(graph, cfg_.hops);
  anchors_.resize(graph.num_nodes());
  std::iota(anchors_.begin(), anchors_.end(), NodeId{0});
  table_ = refresh_embeddings(params_, graph_, cfg_, 0);

  best_params_ = params_;
  best_adam_ = adam_;
  report_.config_hash = cfg_.hash();
  if (cfg_.stop_metric == StopMetric::kValAccuracy) {
    best_score_ = probe_validation(table_.hq, graph_.labels(), graph_.splits(), cfg_.seed);
    report_.best_val = best_score_;
  } else {
    best_score_ = -std::numeric_limits<double>::infinity();
  }
}

double Trainer::monitor(const EpochRecord& r) const {
  return cfg_.stop_metric == StopMetric::kValAccuracy ? r.val_acc : -r.loss;
}

bool Trainer::done() const { return epoch_ >= cfg_.epochs || report_.stopped_early; }

EpochRecord Trainer::step() {
  require(!done(), "training already finished");
  if (epoch_ % cfg_.refresh_interval == 0) {
    sets_ = rebuild_contrast_sets(graph_, table_, khops_, cfg_, epoch_);
    last_transferred_ = 0;
    double negs = 0.0;
    for (const auto& s : sets_) {
      last_transferred_ += s.transferred;
      negs += static_cast<double>(s.negatives.size());
    }
    last_negatives_ = negs / static_cast<double>(sets_.size());
  }

  Rng shuffle = make_stream(cfg_.seed, Phase::kShuffle, static_cast<std::uint64_t>(epoch_));
  shuffle_range(anchors_.begin(), anchors_.end(), shuffle);

  EpochRecord rec;
  double loss_sum = 0.0;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < anchors_.size(); start += bs) {
    const std::size_t len = std::min(bs, anchors_.size() - start);
    const std::span<const NodeId> batch(anchors_.data() + start, len);
    const GradientResult g = batch_gradients(params_, graph_, batch, sets_, table_, cfg_, epoch_);
    adam_step(params_, g.grads, adam_);
    loss_sum += g.loss_sum;
    rec.max_weight_deviation = std::max(rec.max_weight_deviation, g.max_weight_deviation);
  }
  ++epoch_;
  table_ = refresh_embeddings(params_, graph_, cfg_, epoch_);

  rec.epoch = epoch_;
  rec.loss = loss_sum / static_cast<double>(anchors_.size());
  rec.transferred = last_transferred_;
  rec.mean_negatives = last_negatives_;
  if (!graph_.splits().train.empty() && !graph_.splits().val.empty())
    rec.val_acc = probe_validation(table_.hq, graph_.labels(), graph_.splits(), cfg_.seed);
  report_.epochs.push_back(rec);

  const double score = monitor(rec);
  if (score > best_score_) {
    best_score_ = score;
    since_best_ = 0;
    best_params_ = params_;
    best_adam_ = adam_;
    report_.best_epoch = epoch_;
    report_.best_val = rec.val_acc;
  } else if (cfg_.patience > 0 && ++since_best_ >= cfg_.patience) {
    report_.stopped_early = true;
  }
  return rec;
}

Checkpoint Trainer::best_checkpoint() const {
  return {best_params_, best_adam_, cfg_.hash(), report_.best_epoch};
}

TrainResult train(const Graph& graph, const TrainConfig& cfg, const TrainHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Trainer> trainer;
  try {
    trainer.emplace(graph, cfg);
    while (!trainer->done()) {
      const EpochRecord rec = trainer->step();
      if (hooks.on_epoch) hooks.on_epoch(*trainer, rec);
    }
  } catch (const NumericError& e) {
    if (hooks.diagnostics_dir)
      write_diagnostics(*hooks.diagnostics_dir, cfg, trainer ? trainer->report() : RunReport{},
                        e.what());
    throw;
  }

  TrainResult out{trainer->best_checkpoint(), trainer->report(), {}};
  out.embeddings = final_embeddings(out.checkpoint.params, graph, cfg);
  out.report.test =
      linear_evaluate(out.embeddings, graph.labels(), graph.splits(), cfg.probe_runs, cfg.seed);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- reports ----------------------------------------------------------------

void write_metrics(const RunReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "epoch\tloss\tval_acc\ttransferred\tmean_negatives\tmax_weight_dev\n";
  for (const auto& r : report.epochs)
    out << r.epoch << '\t' << fmt(r.loss) << '\t' << fmt(r.val_acc) << '\t' << r.transferred
        << '\t' << fmt(r.mean_negatives) << '\t' << fmt(r.max_weight_deviation) << '\n';
  close_checked(out, path);
}

void write_probe_runs(const ProbeResult& probe, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "run\tval_acc\ttest_acc\n";
  for (std::size_t i = 0; i < probe.test_accuracies.size(); ++i)
    out << i << '\t' << fmt(probe.val_accuracies[i]) << '\t' << fmt(probe.test_accuracies[i])
        << '\n';
  close_checked(out, path);
}

void write_summary(const RunReport& report, const TrainConfig& cfg,
                   const std::filesystem::path& path) {
  auto out = open_out(path);
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(report.config_hash));
  out << "config_hash: " << hash << '\n'
      << "seed: " << cfg.seed << '\n'
      << "epochs_run: " << report.epochs.size() << '\n'
      << "stopped_early: " << (report.stopped_early ? "yes" : "no") << '\n'
      << "best_epoch: " << report.best_epoch << '\n'
      << "best_val_acc: " << fmt(report.best_val, 6) << '\n'
      << "test_acc_mean: " << fmt(report.test.mean, 6) << '\n'
      << "test_acc_std: " << fmt(report.test.std, 6) << '\n'
      << "probe_runs: " << report.test.test_accuracies.size() << '\n'
      << "threads: " << max_threads() << '\n'
      << "wall_seconds: " << fmt(report.wall_seconds, 6) << '\n';
  close_checked(out, path);
}

void write_diagnostics(const std::filesystem::path& dir, const TrainConfig& cfg,
                       const RunReport& partial, const std::string& message) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "diagnostics.txt");
    out << "error: " << message << '\n' << "epochs_completed: " << partial.epochs.size() << '\n';
    close_checked(out, dir / "diagnostics.txt");
  }
  {
    auto out = open_out(dir / "config.txt");
    out << cfg.to_text();
    close_checked(out, dir / "config.txt");
  }
  write_metrics(partial, dir / "metrics_partial.tsv");
}

// ---- exports ----------------------------------------------------------------

Mat pca_2d(const Mat& x) {
  Mat out = Mat::Zero(x.rows(), 2);
  if (x.rows() == 0 || x.cols() == 0) return out;
  const RowVec mean = x.colwise().mean();
  const Mat centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  const Index d = x.cols();
  for (int c = 0; c < 2 && c < d; ++c) {
    Vec axis = es.eigenvectors().col(d - 1 - c);  // eigenvalues ascend
    Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis[big] < 0) axis = -axis;
    out.col(c) = centered * axis;
  }
  return out;
}

std::filesystem::path export_embeddings(const Mat& embeddings, const std::vector<int>& labels,
                                        const std::filesystem::path& path) {
  require(static_cast<std::size_t>(embeddings.rows()) == labels.size(),
          "export_embeddings: one row per label");
  {
    auto out = open_out(path);
    out << "node\tlabel";
    for (Index j = 0; j < embeddings.cols(); ++j) out << "\te" << j;
    out << '\n';
    for (Index i = 0; i < embeddings.rows(); ++i) {
      out << i << '\t' << labels[static_cast<std::size_t>(i)];
      for (Index j = 0; j < embeddings.cols(); ++j) out << '\t' << fmt(embeddings(i, j), 12);
      out << '\n';
    }
    close_checked(out, path);
  }
  std::filesystem::path pca_path = path;
  pca_path.replace_extension(".pca.tsv");
  const Mat p = pca_2d(embeddings);
  auto out = open_out(pca_path);
  out << "node\tlabel\tpc1\tpc2\n";
  for (Index i = 0; i < p.rows(); ++i)
    out << i << '\t' << labels[static_cast<std::size_t>(i)] << '\t' << fmt(p(i, 0), 12) << '\t'
        << fmt(p(i, 1), 12) << '\n';
  close_checked(out, pca_path);
  return pca_path;
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  EmbeddingFile f;
  std::vector<double> values;
  Index width = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    NodeId id;
    int label;
    if (!(ss >> id >> label))
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected node and label");
    Index count = 0;
    double v;
    while (ss >> v) values.push_back(v), ++count;
    if (width < 0) width = count;
    if (count != width)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": row has " +
                        std::to_string(count) + " values, expected " + std::to_string(width));
    f.ids.push_back(id);
    f.labels.push_back(label);
  }
  f.values = Mat(static_cast<Index>(f.ids.size()), std::max<Index>(width, 0));
  std::copy(values.begin(), values.end(), f.values.data());
  return f;
}

}  // namespace gcl
