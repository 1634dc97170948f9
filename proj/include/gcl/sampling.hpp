#pragma once

#include "gcl/graph.hpp"
#include "gcl/rng.hpp"
#include "gcl/types.hpp"

#include <ostream>
#include <utility>
#include <vector>

namespace gcl {

/// Uniform random walk of `steps` transitions from `v`; returns the sorted set
/// of visited vertices. A walk at a degree-0 node stays put.
NodeSet random_walk(const Graph& graph, NodeId v, int steps, Rng& rng);

/// Two independent walks from `v`, each inducing a subgraph anchored at `v`.
std::pair<SubgraphView, SubgraphView> make_views(const Graph& graph, NodeId v, int steps, Rng& rng);

enum class Provenance { kSelfView, kKHop, kMixup, kTransferred };

const char* to_string(Provenance p);

struct Positive {
  Vec h;
  Provenance tag = Provenance::kKHop;
  NodeId source = -1;  // -1 for mixup entries
};

struct ContrastSets {
  NodeId anchor = 0;
  std::vector<Positive> positives;
  NodeSet negatives;  // sorted node ids into the k-view table

  std::size_t count(Provenance tag) const;
};

/// Positives are the k-view rows of `khop` (the anchor's own row tagged as
/// the self view); negatives are every other node.
ContrastSets init_contrast_sets(NodeId anchor, std::size_t num_nodes, const NodeSet& khop,
                                const Mat& kview_table);

/// lambda * a + (1 - lambda) * b.
Vec mix_pair(const Vec& a, const Vec& b, double lambda);

/// Appends `count` mixup positives: pairs drawn uniformly (with replacement)
/// from the existing positives, lambda ~ Beta(beta, beta).
void mixup_augment(std::vector<Positive>& positives, std::size_t count, double beta, Rng& rng);

/// Logistic classifier over embeddings.
struct LogisticHead {
  Vec w;
  double b = 0.0;

  double prob(const Vec& x) const;
};

struct HeadOptions {
  int steps = 100;
  double lr = 0.5;
  double l2 = 1e-3;
};

struct FilterHeads {
  LogisticHead plus;   // P(positive | h)
  LogisticHead minus;  // P(negative | h)
  int trained_steps = 0;
};

/// Full-batch gradient descent on mean logistic loss + (l2/2)|w|^2 from zero
/// weights. Rows of `class1` come first in the design matrix, then `class0`.
LogisticHead train_logistic_head(const Mat& class1, const Mat& class0, const HeadOptions& opt);

/// plus head: positives = 1, negatives = 0. minus head: roles reversed.
FilterHeads train_filter_heads(const Mat& positives, const Mat& negatives, const HeadOptions& opt);

struct TransferRecord {
  NodeId anchor;
  NodeId node;
  double p_plus;
  double p_minus;
  double ratio;
};

constexpr double kMinusFloor = 1e-12;

/// Moves a negative j (not in `khop`) into the positives when
/// p+(h_j) / p-(h_j) > alpha. p- = 0 counts as an infinite ratio.
ContrastSets filter_transfer(const FilterHeads& heads, const ContrastSets& sets,
                             const Mat& kview_table, double alpha, const NodeSet& khop,
                             std::vector<TransferRecord>* log = nullptr);

/// Audit log: anchor, node, p+, p-, ratio.
void write_transfer_log(std::ostream& out, const std::vector<TransferRecord>& records);

}  // namespace gcl
