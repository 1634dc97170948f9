#pragma once

// Data-parallel phases of a training epoch. Each kernel has an OpenMP
// implementation (namespace gcl) and a plain loop reference (gcl::serial)
// that the tests compare against. Randomness is keyed per item, so both
// produce the same draws; results differ only by floating-point summation
// order in the gradient reduction.

#include "gcl/config.hpp"
#include "gcl/encoder.hpp"
#include "gcl/graph.hpp"
#include "gcl/sampling.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gcl {

/// Per-node query and key embeddings from one refresh.
struct EmbeddingTable {
  Mat hq;
  Mat hk;
  int epoch = -1;
};

/// Everything rebuilt for one anchor every refresh_interval epochs.
struct AnchorSets {
  ContrastSets sets;    // after mixup and (optionally) the filter
  NodeSet negatives;    // the subset used in the loss
  std::size_t transferred = 0;
  std::size_t transferred_same_label = 0;
};

struct GradientResult {
  EncoderGrads grads;  // of the mean loss over the batch
  double loss_sum = 0.0;
  double max_weight_deviation = 0.0;  // max |w_j - 1| seen in the batch
};

/// Number of fixed gradient slots. Anchors map to slots by position, not
/// by thread, so the reduction order is independent of the thread count.
inline constexpr int kGradientSlots = 8;

/// Worker count from GCL_NUM_THREADS if set; otherwise the OpenMP default.
void configure_threads_from_env();
int max_threads();

/// Rebuilds one anchor's sets. Exposed for tests and the acceptance suite.
AnchorSets rebuild_anchor(const Graph& graph, const EmbeddingTable& table, const NodeSet& khop,
                          NodeId anchor, const TrainConfig& cfg, int epoch,
                          std::vector<TransferRecord>* log = nullptr);

EmbeddingTable refresh_embeddings(const EncoderParams& params, const Graph& graph,
                                  const TrainConfig& cfg, int epoch);

std::vector<AnchorSets> rebuild_contrast_sets(const Graph& graph, const EmbeddingTable& table,
                                              const std::vector<NodeSet>& khops,
                                              const TrainConfig& cfg, int epoch);

GradientResult batch_gradients(const EncoderParams& params, const Graph& graph,
                               std::span<const NodeId> batch,
                               const std::vector<AnchorSets>& sets, const EmbeddingTable& table,
                               const TrainConfig& cfg, int epoch);

/// Mean of `walks` eval-mode query embeddings per node.
Mat final_embeddings(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg);

std::vector<NodeSet> all_k_hop(const Graph& graph, int hops);

namespace serial {

EmbeddingTable refresh_embeddings(const EncoderParams& params, const Graph& graph,
                                  const TrainConfig& cfg, int epoch);

std::vector<AnchorSets> rebuild_contrast_sets(const Graph& graph, const EmbeddingTable& table,
                                              const std::vector<NodeSet>& khops,
                                              const TrainConfig& cfg, int epoch);

GradientResult batch_gradients(const EncoderParams& params, const Graph& graph,
                               std::span<const NodeId> batch,
                               const std::vector<AnchorSets>& sets, const EmbeddingTable& table,
                               const TrainConfig& cfg, int epoch);

Mat final_embeddings(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg);

}  // namespace serial
}  // namespace gcl
