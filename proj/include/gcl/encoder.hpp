#pragma once

#include "gcl/graph.hpp"
#include "gcl/rng.hpp"
#include "gcl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gcl {

struct EncoderDims {
  Index d_in = 0;
  Index d_hidden = 512;
  Index d_out = 512;

  bool operator==(const EncoderDims&) const = default;
};

/// Two bias-free GCN layers: W1 is d_in x d_hidden, W2 is d_hidden x d_out.
struct EncoderParams {
  Mat w1;
  Mat w2;

  EncoderDims dims() const { return {w1.rows(), w1.cols(), w2.cols()}; }
  static EncoderParams zeros(const EncoderDims& dims);
};

/// Same shapes as EncoderParams; used for gradients and optimizer moments.
using EncoderGrads = EncoderParams;

/// Everything the backward pass needs from one forward pass + readout.
struct ForwardCache {
  Mat adj;        // normalized adjacency of the view
  Mat x_in;       // features after input dropout
  Mat z1;         // adj * x_in * W1
  Mat h1_in;      // dropout(ReLU(z1))
  Mat z2;         // adj * h1_in * W2
  Mat h;          // ReLU(z2)
  double keep_scale = 1.0;  // 1/(1-p) when training, 1 otherwise
  Mat hidden_mask;          // 0/1 dropout mask on the hidden layer (empty if unused)

  // Readout.
  Vec pooled;                 // mean + max, before the sigmoid
  Vec out;                    // sigmoid(pooled)
  std::vector<Index> argmax;  // per column, first row attaining the max
};

struct Readout {
  Vec out;
  Vec pooled;
  std::vector<Index> argmax;
};

/// Uniform Xavier initialization; deterministic in `seed`.
EncoderParams xavier_init(const EncoderDims& dims, std::uint64_t seed);

/// H = ReLU(A * drop(ReLU(A * drop(X) * W1)) * W2) with inverted dropout when
/// `training` is set. The returned cache holds every intermediate; its
/// readout fields are left empty.
ForwardCache gcn_forward(const EncoderParams& params, const SubgraphView& view, double dropout_p,
                         bool training, Rng& rng);

/// sigmoid(mean over rows + column-wise max). Ties in the max go to the
/// lowest row index.
Readout readout(const Mat& h);

/// Forward pass followed by readout, cache filled completely.
ForwardCache encode(const EncoderParams& params, const SubgraphView& view, double dropout_p,
                    bool training, Rng& rng);

/// Eval-mode embedding of a view.
Vec embed(const EncoderParams& params, const SubgraphView& view);

/// Adds d<grad_h, h>/dW into `grads`.
void encoder_backward_accumulate(const ForwardCache& cache, const EncoderParams& params,
                                 const Vec& grad_h, EncoderGrads& grads);

EncoderGrads encoder_backward(const ForwardCache& cache, const EncoderParams& params,
                              const Vec& grad_h);

struct AdamState {
  EncoderParams m;
  EncoderParams v;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const EncoderDims& dims, double lr);
};

/// One bias-corrected Adam update, in place.
void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state);

// ---- checkpoint -------------------------------------------------------------

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
  std::uint64_t config_hash = 0;
  std::int64_t epoch = 0;
};

/// Binary layout documented in docs/checkpoint_format.md.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gcl
