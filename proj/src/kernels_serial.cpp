// Plain-loop references for the OpenMP kernels.

#include "gcl/kernels.hpp"

#include "kernel_items.hpp"

namespace gcl::serial {

EmbeddingTable refresh_embeddings(const EncoderParams& params, const Graph& graph,
                                  const TrainConfig& cfg, int epoch) {
  const auto n = static_cast<Index>(graph.num_nodes());
  EmbeddingTable table{Mat(n, params.w2.cols()), Mat(n, params.w2.cols()), epoch};
  for (NodeId v = 0; v < n; ++v) detail::refresh_row(params, graph, cfg, epoch, v, table);
  return table;
}

std::vector<AnchorSets> rebuild_contrast_sets(const Graph& graph, const EmbeddingTable& table,
                                              const std::vector<NodeSet>& khops,
                                              const TrainConfig& cfg, int epoch) {
  require(khops.size() == graph.num_nodes(), "need one k-hop set per node");
  std::vector<AnchorSets> out;
  out.reserve(graph.num_nodes());
  for (NodeId v = 0; v < static_cast<NodeId>(graph.num_nodes()); ++v)
    out.push_back(rebuild_anchor(graph, table, khops[v], v, cfg, epoch));
  return out;
}

GradientResult batch_gradients(const EncoderParams& params, const Graph& graph,
                               std::span<const NodeId> batch,
                               const std::vector<AnchorSets>& sets, const EmbeddingTable& table,
                               const TrainConfig& cfg, int epoch) {
  require(!batch.empty(), "empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  GradientResult out{EncoderGrads::zeros(params.dims()), 0.0, 0.0};
  for (NodeId a : batch) {
    const auto l = detail::anchor_gradient(params, graph, a, sets[a], table, cfg, epoch, scale,
                                           out.grads);
    out.loss_sum += l.loss;
    out.max_weight_deviation = std::max(out.max_weight_deviation, l.max_weight_deviation);
  }
  return out;
}

Mat final_embeddings(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg) {
  const auto n = static_cast<Index>(graph.num_nodes());
  Mat out(n, params.w2.cols());
  for (NodeId v = 0; v < n; ++v) out.row(v) = detail::final_row(params, graph, cfg, v).transpose();
  return out;
}

}  // namespace gcl::serial
