#pragma once

// Per-item bodies shared by the OpenMP kernels and their serial references.

#include "gcl/dpp.hpp"
#include "gcl/kernels.hpp"
#include "gcl/log.hpp"
#include "gcl/objective.hpp"

#include <algorithm>
#include <cmath>

namespace gcl::detail {

inline Vec query_embedding(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg,
                           Rng& rng, NodeId v) {
  const NodeSet walk = random_walk(graph, v, cfg.walk_steps, rng);
  return embed(params, induced_subgraph(graph, walk, v));
}

inline void refresh_row(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg,
                        int epoch, NodeId v, EmbeddingTable& table) {
  Rng rng = make_stream(cfg.seed, Phase::kRefresh, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(v));
  auto [q, k] = make_views(graph, v, cfg.walk_steps, rng);
  table.hq.row(v) = embed(params, q).transpose();
  table.hk.row(v) = embed(params, k).transpose();
}

inline Vec final_row(const EncoderParams& params, const Graph& graph, const TrainConfig& cfg,
                     NodeId v) {
  Vec acc = Vec::Zero(params.w2.cols());
  for (int w = 0; w < cfg.eval_walks; ++w) {
    Rng rng = make_stream(cfg.seed, Phase::kEvalWalk, static_cast<std::uint64_t>(w),
                          static_cast<std::uint64_t>(v));
    acc += query_embedding(params, graph, cfg, rng, v);
  }
  return acc / static_cast<double>(cfg.eval_walks);
}

/// Uniform sample of min(k, |ids|) ids without replacement, returned sorted.
inline NodeSet subsample(const NodeSet& ids, std::size_t k, Rng& rng) {
  if (ids.size() <= k) return ids;
  NodeSet copy = ids;
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + uniform_index(rng, copy.size() - i);
    std::swap(copy[i], copy[j]);
  }
  copy.resize(k);
  std::sort(copy.begin(), copy.end());
  return copy;
}

inline Mat gather_rows(const Mat& table, const NodeSet& ids) {
  Mat out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = table.row(ids[i]);
  return out;
}

inline NodeSet select_negatives(const NodeSet& candidates, const Mat& kview, const TrainConfig& cfg,
                                Rng& rng) {
  const auto m = static_cast<std::size_t>(cfg.m_negatives);
  if (cfg.dpp_mode == DppMode::kOff || candidates.size() <= m) return subsample(candidates, m, rng);

  const NodeSet pool = subsample(candidates, static_cast<std::size_t>(cfg.pool_size), rng);
  const KernelMatrix kernel = build_kernel(gather_rows(kview, pool), Bandwidth::median());
  std::vector<Index> picked;
  if (cfg.dpp_mode == DppMode::kExact) {
    try {
      picked = KdppSampler(kernel, static_cast<Index>(m)).draw(rng);
    } catch (const NumericError& e) {
      log_warn(std::string(e.what()) + "; falling back to greedy MAP");
      picked = greedy_map(kernel, static_cast<Index>(m));
    }
  } else {
    picked = greedy_map(kernel, static_cast<Index>(m));
  }
  NodeSet out;
  out.reserve(picked.size());
  for (Index i : picked) out.push_back(pool[static_cast<std::size_t>(i)]);
  std::sort(out.begin(), out.end());
  return out;
}

struct AnchorLoss {
  double loss = 0.0;
  double max_weight_deviation = 0.0;
};

/// Loss for one anchor with fresh training-mode views; gradients of the
/// anchor's loss are added to `into`.
inline AnchorLoss anchor_gradient(const EncoderParams& params, const Graph& graph, NodeId anchor,
                                  const AnchorSets& sets, const EmbeddingTable& table,
                                  const TrainConfig& cfg, int epoch, double scale,
                                  EncoderGrads& into) {
  Rng rng = make_stream(cfg.seed, Phase::kBatch, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(anchor));
  auto [vq, vk] = make_views(graph, anchor, cfg.walk_steps, rng);
  const ForwardCache cq = encode(params, vq, cfg.dropout, true, rng);
  const ForwardCache ck = encode(params, vk, cfg.dropout, true, rng);
  const Mat negs = gather_rows(table.hk, sets.negatives);

  LossTerms t = cfg.weights_on
                    ? weighted_contrastive_loss(cq.out, ck.out, negs, cfg.tau, cfg.tau_w)
                    : contrastive_loss(cq.out, ck.out, negs, Vec::Ones(negs.rows()), cfg.tau);
  if (!std::isfinite(t.loss))
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", anchor " +
                       std::to_string(anchor) + " (pos score " + std::to_string(t.pos_score) + ")");
  AnchorLoss out;
  out.loss = t.loss;
  for (Index j = 0; j < t.weights.size(); ++j)
    out.max_weight_deviation = std::max(out.max_weight_deviation, std::abs(t.weights[j] - 1.0));

  Vec grad_q = t.grad_hq;
  if (cfg.positives_in_loss) {
    // Extra numerator terms: every non-self positive, held constant.
    for (const auto& p : sets.sets.positives) {
      if (p.tag == Provenance::kSelfView) continue;
      LossTerms extra = cfg.weights_on
                            ? weighted_contrastive_loss(cq.out, p.h, negs, cfg.tau, cfg.tau_w)
                            : contrastive_loss(cq.out, p.h, negs, Vec::Ones(negs.rows()), cfg.tau);
      out.loss += extra.loss;
      grad_q += extra.grad_hq;
    }
  }
  encoder_backward_accumulate(cq, params, grad_q * scale, into);
  encoder_backward_accumulate(ck, params, t.grad_hk * scale, into);
  return out;
}

}  // namespace gcl::detail
