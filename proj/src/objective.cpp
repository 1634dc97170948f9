#include "gcl/objective.hpp"

#include <cmath>

namespace gcl {

double score(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "score: dimension mismatch");
  return a.dot(b);
}

Vec negative_weights(const Vec& h_q, const Mat& negs, double tau_w) {
  require(tau_w > 0.0, "tau_w must be positive");
  require(negs.rows() == 0 || negs.cols() == h_q.size(), "negative_weights: dimension mismatch");
  Vec w = ((negs * h_q) / tau_w).cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) return Vec::Ones(negs.rows());
  return w * (static_cast<double>(negs.rows()) / total);
}

LossTerms contrastive_loss(const Vec& h_q, const Vec& h_k, const Mat& negs, const Vec& weights,
                           double tau) {
  require(tau > 0.0, "tau must be positive");
  require(h_q.size() == h_k.size(), "contrastive_loss: h_q/h_k dimension mismatch");
  require(weights.size() == negs.rows(), "contrastive_loss: one weight per negative");
  require(negs.rows() == 0 || negs.cols() == h_q.size(), "contrastive_loss: negative width");

  LossTerms t;
  t.tau = tau;
  t.weights = weights;
  t.grad_hq = Vec::Zero(h_q.size());
  t.grad_hk = Vec::Zero(h_q.size());
  t.grad_negs = Mat::Zero(negs.rows(), h_q.size());
  t.pos_score = score(h_q, h_k);
  t.neg_scores = negs * h_q;
  if (!std::isfinite(t.pos_score) || !t.neg_scores.allFinite())
    throw NumericError("contrastive_loss: non-finite score");
  if (negs.rows() == 0) return t;

  const double s_pos = t.pos_score / tau;
  const Vec s_neg = t.neg_scores / tau;
  double shift = s_pos;
  for (Index j = 0; j < s_neg.size(); ++j)
    if (weights[j] > 0.0) shift = std::max(shift, s_neg[j]);

  const double e_pos = std::exp(s_pos - shift);
  Vec e_neg(s_neg.size());
  for (Index j = 0; j < s_neg.size(); ++j)
    e_neg[j] = weights[j] > 0.0 ? weights[j] * std::exp(s_neg[j] - shift) : 0.0;
  const double z = e_pos + e_neg.sum();
  t.loss = std::log(z) - (s_pos - shift);

  // dL/ds_pos = pi_pos - 1, dL/ds_j = pi_j.
  const double d_pos = e_pos / z - 1.0;
  const Vec d_neg = e_neg / z;
  t.grad_hq = (d_pos * h_k + negs.transpose() * d_neg) / tau;
  t.grad_hk = (d_pos / tau) * h_q;
  t.grad_negs = (d_neg / tau) * h_q.transpose();
  return t;
}

LossTerms weighted_contrastive_loss(const Vec& h_q, const Vec& h_k, const Mat& negs, double tau,
                                    double tau_w) {
  const Vec w = negative_weights(h_q, negs, tau_w);
  LossTerms t = contrastive_loss(h_q, h_k, negs, w, tau);
  t.tau_w = tau_w;
  if (negs.rows() == 0) return t;

  const Vec raw = (negs * h_q) / tau_w;
  Vec clamped = raw.cwiseMax(0.0);
  const double total = clamped.sum();
  if (!(total > 0.0)) return t;  // all-ones fallback is locally constant

  // u_j = dL/dw_j = e^{s_j} / Z. Recompute with the same shift as the loss.
  const double s_pos = t.pos_score / tau;
  const Vec s_neg = t.neg_scores / tau;
  double shift = s_pos;
  for (Index j = 0; j < s_neg.size(); ++j)
    if (w[j] > 0.0) shift = std::max(shift, s_neg[j]);
  Vec u(s_neg.size());
  double z = std::exp(s_pos - shift);
  for (Index j = 0; j < s_neg.size(); ++j) {
    u[j] = std::exp(s_neg[j] - shift);
    if (w[j] > 0.0) z += w[j] * u[j];
  }
  u /= z;

  // w_j = n c_j / S  =>  dL/dc_k = (n/S) (u_k - <u, w>/n).
  const double n = static_cast<double>(negs.rows());
  const double mean_uw = u.dot(w) / n;
  Vec d_raw(raw.size());
  for (Index k = 0; k < raw.size(); ++k)
    d_raw[k] = raw[k] > 0.0 ? (n / total) * (u[k] - mean_uw) : 0.0;
  t.grad_hq += negs.transpose() * d_raw / tau_w;
  t.grad_negs += (d_raw / tau_w) * h_q.transpose();
  return t;
}

BatchLoss batch_loss(const std::vector<AnchorTerms>& anchors, double tau, double tau_w,
                     bool weights_on) {
  BatchLoss out;
  out.grad_hq.reserve(anchors.size());
  out.grad_hk.reserve(anchors.size());
  for (const auto& a : anchors) {
    LossTerms t = weights_on ? weighted_contrastive_loss(a.h_q, a.h_k, a.negs, tau, tau_w)
                             : contrastive_loss(a.h_q, a.h_k, a.negs, Vec::Ones(a.negs.rows()), tau);
    out.total += t.loss;
    out.grad_hq.push_back(std::move(t.grad_hq));
    out.grad_hk.push_back(std::move(t.grad_hk));
  }
  return out;
}

}  // namespace gcl
