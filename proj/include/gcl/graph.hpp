#pragma once

#include "gcl/rng.hpp"
#include "gcl/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gcl {

using Edge = std::pair<NodeId, NodeId>;

struct Splits {
  NodeSet train;
  NodeSet val;
  NodeSet test;
};

/// Immutable undirected attributed graph.
///
/// Edges are stored once per unordered pair with `first < second`, sorted.
/// Adjacency is kept in compressed sparse row form for walks and BFS.
class Graph {
 public:
  /// Validates and canonicalizes its inputs: self-loops are dropped and
  /// duplicate undirected pairs collapsed. Throws RangeError for endpoints
  /// or labels out of range, FormatError for shape or split problems.
  static Graph create(std::size_t num_nodes, std::vector<Edge> edges, Mat features,
                      std::vector<int> labels, Splits splits);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  Index feature_dim() const { return features_.cols(); }
  int num_classes() const { return num_classes_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Mat& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const Splits& splits() const { return splits_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId a, NodeId b) const;

 private:
  Graph() = default;

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
  Mat features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  Splits splits_;
};

/// D^{-1/2}(A+I)D^{-1/2} of a subgraph, dense.
struct NormalizedAdj {
  Mat values;
  Index size() const { return values.rows(); }
};

/// Induced subgraph around an anchor, locally re-indexed.
struct SubgraphView {
  NodeId anchor = 0;
  Index anchor_local = 0;
  NodeSet local_to_global;  // sorted
  NormalizedAdj norm_adj;
  Mat features;

  Index size() const { return static_cast<Index>(local_to_global.size()); }
};

struct SbmParams {
  std::vector<std::size_t> block_sizes;
  double p_in = 0.0;
  double p_out = 0.0;
  Index feature_dim = 8;
  double feature_separation = 0.0;

  void validate() const;
};

/// Symmetric normalization with self-loops added. `adj` must be symmetric,
/// binary, and have a zero diagonal.
NormalizedAdj normalize_adjacency(const Mat& adj);

/// All nodes within shortest-path distance `hops` of `v`, including `v`.
NodeSet k_hop_neighbors(const Graph& graph, NodeId v, int hops);

/// Subgraph induced by `vertices` (need not be sorted; duplicates removed).
SubgraphView induced_subgraph(const Graph& graph, std::span<const NodeId> vertices,
                              NodeId anchor);

/// Planted-partition graph. Labels are block ids; features are unit-variance
/// Gaussians whose per-block means are pairwise `feature_separation` apart.
/// Splits are 80/10/10, shuffled per seed.
Graph generate_sbm(const SbmParams& params, std::uint64_t seed);

// ---- bundle I/O -----------------------------------------------------------

/// Reads the four-file bundle (edges.tsv, features.tsv, labels.tsv,
/// splits.tsv). Node ids must be contiguous from 0.
Graph load_citation_bundle(const std::filesystem::path& dir);

/// Writes a canonical bundle. Numbers are printed with 17 significant digits
/// so the round trip is exact.
void write_citation_bundle(const Graph& graph, const std::filesystem::path& dir);

struct IngestResult {
  Graph graph;
  std::vector<std::string> original_ids;  // compact id -> id as written in the source files
  bool remapped = false;
  std::vector<std::string> warnings;
};

/// Lenient reader used by `ingest`: accepts arbitrary integer ids, compacts
/// them in ascending order.
IngestResult ingest_bundle(const std::filesystem::path& dir);

/// Converts the public LINQS citation layout (`<prefix>.content` with
/// "paper_id f_1..f_d class_name" and `<prefix>.cites` with "cited citing")
/// into a Graph with the usual split: 20 training nodes per class, then 500
/// validation and 1000 test nodes drawn from the rest.
IngestResult ingest_linqs(const std::filesystem::path& content, const std::filesystem::path& cites,
                          std::uint64_t seed);

}  // namespace gcl
