#include "gcl/kernels.hpp"

#include "kernel_items.hpp"

#include <omp.h>

#include <cstdlib>
#include <exception>
#include <mutex>

namespace gcl {
namespace {

// Exceptions must not escape an OpenMP region; the first one is kept and
// rethrown after the join.
class FirstError {
 public:
  template <typename F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

void configure_threads_from_env() {
  if (const char* env = std::getenv("GCL_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) omp_set_num_threads(n);
    else log_warn(std::string("ignoring GCL_NUM_THREADS='") + env + "'");
  }
}

int max_threads() { return omp_get_max_threads(); }

AnchorSets rebuild_anchor(const Graph& graph, const EmbeddingTable& table, const NodeSet& khop,
                          NodeId anchor, const TrainConfig& cfg, int epoch,
                          std::vector<TransferRecord>* log) {
  Rng rng = make_stream(cfg.seed, Phase::kRebuild, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(anchor));
  AnchorSets out;
  out.sets = init_contrast_sets(anchor, graph.num_nodes(), khop, table.hk);
  const std::size_t mix = cfg.mixup_count < 0 ? out.sets.positives.size()
                                              : static_cast<std::size_t>(cfg.mixup_count);
  mixup_augment(out.sets.positives, mix, cfg.mixup_beta, rng);

  if (cfg.filter_on && !out.sets.negatives.empty()) {
    const NodeSet pool = detail::subsample(out.sets.negatives,
                                           static_cast<std::size_t>(cfg.head_pool), rng);
    Mat pos(static_cast<Index>(out.sets.positives.size()), table.hk.cols());
    for (std::size_t i = 0; i < out.sets.positives.size(); ++i)
      pos.row(static_cast<Index>(i)) = out.sets.positives[i].h.transpose();
    const FilterHeads heads = train_filter_heads(
        pos, detail::gather_rows(table.hk, pool), {cfg.head_steps, cfg.head_lr, cfg.head_l2});
    const std::size_t before = out.sets.positives.size();
    out.sets = filter_transfer(heads, out.sets, table.hk, cfg.alpha, khop, log);
    const auto& labels = graph.labels();
    for (std::size_t i = before; i < out.sets.positives.size(); ++i) {
      ++out.transferred;
      if (labels[out.sets.positives[i].source] == labels[anchor]) ++out.transferred_same_label;
    }
  }
  out.negatives = detail::select_negatives(out.sets.negatives, table.hk, cfg, rng);
  return out;
}

EmbeddingTable refresh_embeddings(const EncoderParams& params, const Graph& graph,
                                  const TrainConfig& cfg, int epoch) {
  const auto n = static_cast<std::int64_t>(graph.num_nodes());
  EmbeddingTable table{Mat(n, params.w2.cols()), Mat(n, params.w2.cols()), epoch};
  FirstError err;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t v = 0; v < n; ++v)
    err.run([&] { detail::refresh_row(params, graph, cfg, epoch, v, table); });
  err.rethrow();
  return table;
}

std::vector<AnchorSets> rebuild_contrast_sets(const Graph& graph, const EmbeddingTable& table,
                                              const std::vector<NodeSet>& khops,
                                              const TrainConfig& cfg, int epoch) {
  const auto n = static_cast<std::int64_t>(graph.num_nodes());
  require(khops.size() == graph.num_nodes(), "need one k-hop set per node");
  std::vector<AnchorSets> out(graph.num_nodes());
  FirstError err;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t v = 0; v < n; ++v)
    err.run([&] { out[v] = rebuild_anchor(graph, table, khops[v], v, cfg, epoch); });
  err.rethrow();
  return out;
}

GradientResult batch_gradients(const EncoderParams& params, const Graph& graph,
                               std::span<const NodeId> batch,
                               const std::vector<AnchorSets>& sets, const EmbeddingTable& table,
                               const TrainConfig& cfg, int epoch) {
  require(!batch.empty(), "empty batch");
  const EncoderDims dims = params.dims();
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<EncoderGrads> slots(kGradientSlots, EncoderGrads::zeros(dims));
  std::vector<detail::AnchorLoss> losses(batch.size());
  FirstError err;
  // Slot s owns batch positions s, s + kGradientSlots, ... and walks them in
  // order, so each slot's sum is fixed regardless of scheduling.
#pragma omp parallel for schedule(dynamic, 1)
  for (int s = 0; s < kGradientSlots; ++s)
    for (std::size_t i = static_cast<std::size_t>(s); i < batch.size(); i += kGradientSlots)
      err.run([&] {
        losses[i] = detail::anchor_gradient(params, graph, batch[i], sets[batch[i]], table, cfg,
                                            epoch, scale, slots[s]);
      });
  err.rethrow();

  GradientResult out{EncoderGrads::zeros(dims), 0.0, 0.0};
  for (const auto& g : slots) {
    out.grads.w1 += g.w1;
    out.grads.w2 += g.w2;
  }
  for (const auto& l : losses) {
    out.loss_sum += l.loss;
    out.max_weight_deviation = std::max(out.max_weight_deviation, l.max_weight_deviation);
  }
  return out;
}

Mat final_embeddings(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg) {
  const auto n = static_cast<std::int64_t>(graph.num_nodes());
  Mat out(n, params.w2.cols());
  FirstError err;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t v = 0; v < n; ++v)
    err.run([&] { out.row(v) = detail::final_row(params, graph, cfg, v).transpose(); });
  err.rethrow();
  return out;
}

std::vector<NodeSet> all_k_hop(const Graph& graph, int hops) {
  const auto n = static_cast<std::int64_t>(graph.num_nodes());
  std::vector<NodeSet> out(graph.num_nodes());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t v = 0; v < n; ++v) out[v] = k_hop_neighbors(graph, v, hops);
  return out;
}

}  // namespace gcl
