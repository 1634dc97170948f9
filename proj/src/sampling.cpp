#include "gcl/sampling.hpp"

#include "gcl/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gcl {
namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

bool contains(const NodeSet& sorted, NodeId v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

double beta_sample(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

// Largest eigenvalue of X'X by power iteration from a fixed start.
double top_eigenvalue_gram(const Mat& x) {
  Vec v = Vec::Ones(x.cols());
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    const double norm = v.norm();
    if (norm == 0.0) return 0.0;
    v /= norm;
    const Vec next = x.transpose() * (x * v);
    const double est = v.dot(next);
    v = next;
    if (std::abs(est - lambda) <= 1e-6 * std::abs(est)) return est;
    lambda = est;
  }
  return lambda;
}

}  // namespace

NodeSet random_walk(const Graph& graph, NodeId v, int steps, Rng& rng) {
  require(v >= 0 && static_cast<std::size_t>(v) < graph.num_nodes(), "walk start out of range");
  require(steps >= 1, "walk needs at least one step");
  NodeSet visited{v};
  visited.reserve(static_cast<std::size_t>(steps) + 1);
  NodeId cur = v;
  for (int s = 0; s < steps; ++s) {
    auto nb = graph.neighbors(cur);
    if (nb.empty()) continue;
    cur = nb[uniform_index(rng, nb.size())];
    visited.push_back(cur);
  }
  std::sort(visited.begin(), visited.end());
  visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
  return visited;
}

std::pair<SubgraphView, SubgraphView> make_views(const Graph& graph, NodeId v, int steps, Rng& rng) {
  const NodeSet q = random_walk(graph, v, steps, rng);
  const NodeSet k = random_walk(graph, v, steps, rng);
  return {induced_subgraph(graph, q, v), induced_subgraph(graph, k, v)};
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kSelfView: return "self-view";
    case Provenance::kKHop: return "k-hop";
    case Provenance::kMixup: return "mixup";
    case Provenance::kTransferred: return "transferred";
  }
  return "?";
}

std::size_t ContrastSets::count(Provenance tag) const {
  return static_cast<std::size_t>(std::count_if(
      positives.begin(), positives.end(), [tag](const Positive& p) { return p.tag == tag; }));
}

ContrastSets init_contrast_sets(NodeId anchor, std::size_t num_nodes, const NodeSet& khop,
                                const Mat& kview_table) {
  require(contains(khop, anchor), "k-hop set must contain the anchor");
  require(static_cast<std::size_t>(kview_table.rows()) == num_nodes, "k-view table needs one row per node");
  ContrastSets s;
  s.anchor = anchor;
  for (NodeId v : khop)
    s.positives.push_back({kview_table.row(v).transpose(),
                           v == anchor ? Provenance::kSelfView : Provenance::kKHop, v});
  s.negatives.reserve(num_nodes - khop.size());
  auto it = khop.begin();
  for (NodeId v = 0; v < static_cast<NodeId>(num_nodes); ++v) {
    while (it != khop.end() && *it < v) ++it;
    if (it != khop.end() && *it == v) continue;
    s.negatives.push_back(v);
  }
  return s;
}

Vec mix_pair(const Vec& a, const Vec& b, double lambda) { return lambda * a + (1.0 - lambda) * b; }

void mixup_augment(std::vector<Positive>& positives, std::size_t count, double beta, Rng& rng) {
  if (count == 0) return;
  require(!positives.empty(), "mixup needs at least one positive");
  require(beta > 0.0, "mixup beta must be positive");
  const std::size_t base = positives.size();
  positives.reserve(base + count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& a = positives[uniform_index(rng, base)].h;
    const auto& b = positives[uniform_index(rng, base)].h;
    const double lambda = beta_sample(beta, beta, rng);
    positives.push_back({mix_pair(a, b, lambda), Provenance::kMixup, -1});
  }
}

double LogisticHead::prob(const Vec& x) const { return sigmoid(w.dot(x) + b); }

LogisticHead train_logistic_head(const Mat& class1, const Mat& class0, const HeadOptions& opt) {
  require(class1.rows() > 0 && class0.rows() > 0, "logistic head needs both classes");
  require(class1.cols() == class0.cols(), "logistic head: class widths differ");
  const Index n1 = class1.rows(), n = class1.rows() + class0.rows(), d = class1.cols();
  Mat x(n, d);
  x.topRows(n1) = class1;
  x.bottomRows(n - n1) = class0;
  Vec y = Vec::Zero(n);
  y.head(n1).setOnes();
  // Each class carries half the loss mass, so the odds estimate the density ratio.
  Vec cw(n);
  cw.head(n1).setConstant(0.5 * static_cast<double>(n) / static_cast<double>(n1));
  cw.tail(n - n1).setConstant(0.5 * static_cast<double>(n) / static_cast<double>(n - n1));

  // Train on centered inputs and fold the shift into the bias afterwards.
  const RowVec mean = x.colwise().mean();
  x.rowwise() -= mean;
  const double inv_n = 1.0 / static_cast<double>(n);
  // The gradient in (w, b) is L-Lipschitz with
  //   L <= max_w / 4 * max(lambda_max(X'X) / n, 1) + l2
  // (X is centered, so the bias column is orthogonal to it). Steps above 1/L
  // diverge on wide embeddings or very unequal classes.
  // Slack of 1.1 covers the power-iteration estimate being slightly low.
  const double curvature = std::max(inv_n * top_eigenvalue_gram(x), 1.0);
  const double lipschitz = 1.1 * (0.25 * cw.maxCoeff() * curvature + opt.l2);
  const double step_size = std::min(opt.lr, 1.0 / std::max(lipschitz, 1e-12));

  LogisticHead head{Vec::Zero(d), 0.0};
  for (int step = 0; step < opt.steps; ++step) {
    Vec logits = x * head.w;
    logits.array() += head.b;
    Vec resid(n);
    for (Index i = 0; i < n; ++i) resid[i] = cw[i] * (sigmoid(logits[i]) - y[i]);
    const Vec gw = x.transpose() * resid * inv_n + opt.l2 * head.w;
    const double gb = resid.sum() * inv_n;
    head.w -= step_size * gw;
    head.b -= step_size * gb;
  }
  head.b -= mean.dot(head.w.transpose());
  return head;
}

FilterHeads train_filter_heads(const Mat& positives, const Mat& negatives, const HeadOptions& opt) {
  FilterHeads heads;
  heads.plus = train_logistic_head(positives, negatives, opt);
  heads.minus = train_logistic_head(negatives, positives, opt);
  heads.trained_steps = opt.steps;
  return heads;
}

ContrastSets filter_transfer(const FilterHeads& heads, const ContrastSets& sets,
                             const Mat& kview_table, double alpha, const NodeSet& khop,
                             std::vector<TransferRecord>* log) {
  require(alpha > 0.0, "soft margin alpha must be positive");
  ContrastSets out;
  out.anchor = sets.anchor;
  out.positives = sets.positives;
  out.negatives.reserve(sets.negatives.size());
  for (NodeId j : sets.negatives) {
    if (j == sets.anchor || contains(khop, j)) {
      out.negatives.push_back(j);
      continue;
    }
    const Vec h = kview_table.row(j).transpose();
    const double p_plus = heads.plus.prob(h);
    const double p_minus = heads.minus.prob(h);
    double ratio;
    if (p_minus == 0.0) {
      ratio = std::numeric_limits<double>::infinity();
      log_info("filter_transfer: p- = 0 for node " + std::to_string(j) + "; treating ratio as +inf");
    } else {
      ratio = p_plus / std::max(p_minus, kMinusFloor);
    }
    if (ratio > alpha) {
      out.positives.push_back({h, Provenance::kTransferred, j});
      if (log) log->push_back({sets.anchor, j, p_plus, p_minus, ratio});
    } else {
      out.negatives.push_back(j);
    }
  }
  return out;
}

void write_transfer_log(std::ostream& out, const std::vector<TransferRecord>& records) {
  out << "anchor\tnode\tp_plus\tp_minus\tratio\n";
  out.precision(12);
  for (const auto& r : records)
    out << r.anchor << '\t' << r.node << '\t' << r.p_plus << '\t' << r.p_minus << '\t' << r.ratio
        << '\n';
}

}  // namespace gcl
