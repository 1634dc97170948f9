#pragma once

#include "gcl/types.hpp"

#include <vector>

namespace gcl {

/// Dot-product agreement between two embeddings.
double score(const Vec& a, const Vec& b);

/// Hardness weights for negatives (rows of `negs`): raw_j = <h_q, h_j> / tau_w,
/// clamped at zero, then rescaled to mean 1 over all negatives. If every raw
/// weight clamps to zero, all weights are 1.
Vec negative_weights(const Vec& h_q, const Mat& negs, double tau_w);

struct LossTerms {
  double pos_score = 0.0;
  Vec neg_scores;
  Vec weights;
  double tau = 1.0;
  double tau_w = 1.0;
  double loss = 0.0;
  Vec grad_hq;
  Vec grad_hk;
  Mat grad_negs;  // one row per negative
};

/// -log( e^{s+} / (e^{s+} + sum_j w_j e^{s_j}) ) with s = score / tau, weights
/// held fixed. Evaluated with max-shift; gradients w.r.t. h_q, h_k and each
/// negative are exact.
LossTerms contrastive_loss(const Vec& h_q, const Vec& h_k, const Mat& negs, const Vec& weights,
                           double tau);

/// contrastive_loss with weights computed from h_q by negative_weights. The
/// h_q and negative gradients include the path through the weights (the
/// clamp is treated as locally constant).
LossTerms weighted_contrastive_loss(const Vec& h_q, const Vec& h_k, const Mat& negs, double tau,
                                    double tau_w);

/// One anchor's participants in a batch.
struct AnchorTerms {
  Vec h_q;
  Vec h_k;
  Mat negs;
};

struct BatchLoss {
  double total = 0.0;
  std::vector<Vec> grad_hq;  // per anchor
  std::vector<Vec> grad_hk;
};

/// Sum of per-anchor losses, reduced in anchor order. Negative gradients are
/// dropped: negatives are constants read from the embedding table.
BatchLoss batch_loss(const std::vector<AnchorTerms>& anchors, double tau, double tau_w,
                     bool weights_on);

}  // namespace gcl
