#include "gcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_map>

namespace gcl {

Graph Graph::create(std::size_t num_nodes, std::vector<Edge> edges, Mat features,
                    std::vector<int> labels, Splits splits) {
  const auto n = static_cast<NodeId>(num_nodes);
  if (static_cast<std::size_t>(features.rows()) != num_nodes)
    throw FormatError("feature matrix has " + std::to_string(features.rows()) + " rows, expected " +
                      std::to_string(num_nodes));
  if (labels.size() != num_nodes)
    throw FormatError("label count " + std::to_string(labels.size()) + " does not match " +
                      std::to_string(num_nodes) + " nodes");

  Graph g;
  g.num_nodes_ = num_nodes;

  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw RangeError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                       ") has an endpoint outside [0," + std::to_string(n) + ")");
    if (a == b) continue;
    canon.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
  g.edges_ = std::move(canon);

  std::vector<std::size_t> deg(num_nodes, 0);
  for (auto [a, b] : g.edges_) {
    ++deg[a];
    ++deg[b];
  }
  g.offsets_.assign(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
  g.neighbors_.resize(g.offsets_[num_nodes]);
  std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  for (auto [a, b] : g.edges_) {
    g.neighbors_[fill[a]++] = b;
    g.neighbors_[fill[b]++] = a;
  }
  for (std::size_t i = 0; i < num_nodes; ++i)
    std::sort(g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]),
              g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]));

  int max_label = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0)
      throw RangeError("node " + std::to_string(i) + " has negative label " +
                       std::to_string(labels[i]));
    max_label = std::max(max_label, labels[i]);
  }
  g.labels_ = std::move(labels);
  g.num_classes_ = max_label + 1;

  std::vector<char> seen(num_nodes, 0);
  auto check_split = [&](NodeSet& s, const char* name) {
    std::sort(s.begin(), s.end());
    for (NodeId v : s) {
      if (v < 0 || v >= n)
        throw RangeError(std::string(name) + " split lists node " + std::to_string(v) +
                         " outside [0," + std::to_string(n) + ")");
      if (seen[v]) throw FormatError("node " + std::to_string(v) + " appears in more than one split");
      seen[v] = 1;
    }
  };
  check_split(splits.train, "train");
  check_split(splits.val, "val");
  check_split(splits.test, "test");
  g.splits_ = std::move(splits);

  if (!features.allFinite()) throw FormatError("feature matrix contains non-finite values");
  g.features_ = std::move(features);
  return g;
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

void SbmParams::validate() const {
  if (block_sizes.empty()) throw ContractViolation("SBM needs at least one block");
  for (auto s : block_sizes)
    if (s < 1) throw ContractViolation("SBM block sizes must be >= 1");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
    throw ContractViolation("SBM probabilities must lie in [0,1]");
  if (feature_dim < static_cast<Index>(block_sizes.size()))
    throw ContractViolation("SBM feature_dim must be >= number of blocks");
  if (!(feature_separation >= 0.0)) throw ContractViolation("feature_separation must be >= 0");
}

NormalizedAdj normalize_adjacency(const Mat& adj) {
  require(adj.rows() == adj.cols(), "adjacency must be square");
  const Index n = adj.rows();
  for (Index i = 0; i < n; ++i) {
    require(adj(i, i) == 0.0, "adjacency must have a zero diagonal");
    for (Index j = i + 1; j < n; ++j)
      require(adj(i, j) == adj(j, i), "adjacency must be symmetric");
  }
  Vec inv_sqrt_deg(n);
  for (Index i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(adj.row(i).sum() + 1.0);

  NormalizedAdj out;
  out.values.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double a = adj(i, j) + (i == j ? 1.0 : 0.0);
      out.values(i, j) = a == 0.0 ? 0.0 : inv_sqrt_deg[i] * a * inv_sqrt_deg[j];
    }
  return out;
}

NodeSet k_hop_neighbors(const Graph& graph, NodeId v, int hops) {
  require(v >= 0 && static_cast<std::size_t>(v) < graph.num_nodes(), "node id out of range");
  require(hops >= 0, "hop count must be >= 0");
  std::unordered_map<NodeId, int> dist{{v, 0}};
  std::deque<NodeId> queue{v};
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    int du = dist[u];
    if (du == hops) continue;
    for (NodeId w : graph.neighbors(u)) {
      if (dist.emplace(w, du + 1).second) queue.push_back(w);
    }
  }
  NodeSet out;
  out.reserve(dist.size());
  for (auto& [node, d] : dist) out.push_back(node);
  std::sort(out.begin(), out.end());
  return out;
}

SubgraphView induced_subgraph(const Graph& graph, std::span<const NodeId> vertices,
                              NodeId anchor) {
  NodeSet ids(vertices.begin(), vertices.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (NodeId v : ids)
    require(v >= 0 && static_cast<std::size_t>(v) < graph.num_nodes(),
            "subgraph vertex out of range");
  auto it = std::lower_bound(ids.begin(), ids.end(), anchor);
  require(it != ids.end() && *it == anchor, "anchor must belong to the subgraph vertex set");

  const auto n = static_cast<Index>(ids.size());
  Mat adj = Mat::Zero(n, n);
  for (Index a = 0; a < n; ++a) {
    auto nb = graph.neighbors(ids[a]);
    // Merge the sorted neighbor list with the sorted vertex list.
    auto p = nb.begin();
    for (Index b = 0; b < n && p != nb.end(); ++b) {
      while (p != nb.end() && *p < ids[b]) ++p;
      if (p != nb.end() && *p == ids[b]) adj(a, b) = 1.0;
    }
  }

  SubgraphView view;
  view.anchor = anchor;
  view.anchor_local = std::distance(ids.begin(), it);
  view.norm_adj = normalize_adjacency(adj);
  view.features.resize(n, graph.feature_dim());
  for (Index a = 0; a < n; ++a) view.features.row(a) = graph.features().row(ids[a]);
  view.local_to_global = std::move(ids);
  return view;
}

Graph generate_sbm(const SbmParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng = make_stream(seed, Phase::kGenerate);
  const std::size_t n = std::accumulate(params.block_sizes.begin(), params.block_sizes.end(),
                                        std::size_t{0});
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t b = 0; b < params.block_sizes.size(); ++b)
    labels.insert(labels.end(), params.block_sizes[b], static_cast<int>(b));

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? params.p_in : params.p_out;
      // Always consume one draw per pair so the stream layout is fixed.
      const double u = uniform01(rng);
      if (u < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }

  std::normal_distribution<double> normal(0.0, 1.0);
  Mat features(static_cast<Index>(n), params.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (Index c = 0; c < params.feature_dim; ++c) features(i, c) = normal(rng);
    // Block b has mean (separation / sqrt 2) * e_b, so any two block means
    // are exactly `separation` apart.
    features(i, labels[i]) += params.feature_separation / std::sqrt(2.0);
  }

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng split_rng = make_stream(seed, Phase::kSplit);
  shuffle_range(order.begin(), order.end(), split_rng);
  const std::size_t n_train = (n * 8) / 10;
  const std::size_t n_val = n / 10;
  Splits splits;
  splits.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  splits.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                    order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  splits.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());

  return Graph::create(n, std::move(edges), std::move(features), std::move(labels),
                       std::move(splits));
}

}  // namespace gcl
