#include "gcl/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gcl {
namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// x * w where most entries of x are zero (bag-of-words features). Zero
/// entries are skipped; the result is identical to the dense product up to
/// summation order.
Mat sparse_rows_times(const Mat& x, const Mat& w) {
  Mat out = Mat::Zero(x.rows(), w.cols());
  for (Index r = 0; r < x.rows(); ++r)
    for (Index k = 0; k < x.cols(); ++k) {
      const double v = x(r, k);
      if (v != 0.0) out.row(r).noalias() += v * w.row(k);
    }
  return out;
}

}  // namespace

EncoderParams EncoderParams::zeros(const EncoderDims& dims) {
  return {Mat::Zero(dims.d_in, dims.d_hidden), Mat::Zero(dims.d_hidden, dims.d_out)};
}

EncoderParams xavier_init(const EncoderDims& dims, std::uint64_t seed) {
  require(dims.d_in >= 1 && dims.d_hidden >= 1 && dims.d_out >= 1, "encoder dims must be >= 1");
  Rng rng = make_stream(seed, Phase::kInit);
  auto fill = [&rng](Index rows, Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat w(rows, cols);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
    return w;
  };
  EncoderParams p;
  p.w1 = fill(dims.d_in, dims.d_hidden);
  p.w2 = fill(dims.d_hidden, dims.d_out);
  return p;
}

ForwardCache gcn_forward(const EncoderParams& params, const SubgraphView& view, double dropout_p,
                         bool training, Rng& rng) {
  require(view.features.cols() == params.w1.rows(), "view feature width does not match W1");
  require(params.w1.cols() == params.w2.rows(), "W1/W2 inner dimensions differ");
  require(view.norm_adj.size() == view.features.rows(), "adjacency and feature rows differ");
  require(dropout_p >= 0.0 && dropout_p < 1.0, "dropout must lie in [0,1)");

  const bool drop = training && dropout_p > 0.0;
  ForwardCache c;
  c.keep_scale = drop ? 1.0 / (1.0 - dropout_p) : 1.0;
  c.adj = view.norm_adj.values;
  c.x_in = view.features;
  if (drop) {
    // Zero entries stay zero under dropout, so only nonzeros draw.
    for (Index i = 0; i < c.x_in.size(); ++i) {
      double& v = c.x_in.data()[i];
      if (v != 0.0) v = uniform01(rng) < dropout_p ? 0.0 : v * c.keep_scale;
    }
  }
  c.z1 = c.adj * sparse_rows_times(c.x_in, params.w1);
  c.h1_in = c.z1.cwiseMax(0.0);
  if (drop) {
    c.hidden_mask.resize(c.h1_in.rows(), c.h1_in.cols());
    for (Index i = 0; i < c.h1_in.size(); ++i) {
      const bool keep = uniform01(rng) >= dropout_p;
      c.hidden_mask.data()[i] = keep ? 1.0 : 0.0;
      c.h1_in.data()[i] = keep ? c.h1_in.data()[i] * c.keep_scale : 0.0;
    }
  }
  c.z2.noalias() = c.adj * (c.h1_in * params.w2);
  c.h = c.z2.cwiseMax(0.0);
  return c;
}

Readout readout(const Mat& h) {
  require(h.rows() >= 1, "readout needs at least one row");
  Readout r;
  r.argmax.assign(static_cast<std::size_t>(h.cols()), 0);
  r.pooled.resize(h.cols());
  r.out.resize(h.cols());
  const double inv_n = 1.0 / static_cast<double>(h.rows());
  std::vector<double> column(static_cast<std::size_t>(h.rows()));
  for (Index c = 0; c < h.cols(); ++c) {
    double best = h(0, c);
    Index arg = 0;
    for (Index row = 0; row < h.rows(); ++row) {
      const double v = h(row, c);
      column[static_cast<std::size_t>(row)] = v;
      if (v > best) {
        best = v;
        arg = row;
      }
    }
    // Summing in sorted order keeps the mean bit-identical under row permutations.
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    r.argmax[static_cast<std::size_t>(c)] = arg;
    r.pooled[c] = sum * inv_n + best;
    r.out[c] = sigmoid(r.pooled[c]);
  }
  return r;
}

ForwardCache encode(const EncoderParams& params, const SubgraphView& view, double dropout_p,
                    bool training, Rng& rng) {
  ForwardCache c = gcn_forward(params, view, dropout_p, training, rng);
  Readout r = readout(c.h);
  c.pooled = std::move(r.pooled);
  c.out = std::move(r.out);
  c.argmax = std::move(r.argmax);
  return c;
}

Vec embed(const EncoderParams& params, const SubgraphView& view) {
  Rng unused(0);
  return encode(params, view, 0.0, false, unused).out;
}

void encoder_backward_accumulate(const ForwardCache& c, const EncoderParams& params,
                                 const Vec& grad_h, EncoderGrads& grads) {
  const Index n = c.h.rows(), d = c.h.cols();
  require(grad_h.size() == d && c.out.size() == d &&
              static_cast<Index>(c.argmax.size()) == d,
          "stale forward cache: readout shape does not match grad_h");
  require(params.w2.cols() == d && params.w1.cols() == c.z1.cols() &&
              c.x_in.cols() == params.w1.rows(),
          "stale forward cache: parameter shapes changed");
  require(grads.w1.rows() == params.w1.rows() && grads.w1.cols() == params.w1.cols() &&
              grads.w2.rows() == params.w2.rows() && grads.w2.cols() == params.w2.cols(),
          "gradient buffer shape mismatch");

  // Through the sigmoid, then split between the mean and max paths.
  const Vec dpool = grad_h.cwiseProduct(c.out.cwiseProduct((1.0 - c.out.array()).matrix()));
  Mat dz2(n, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index row = 0; row < n; ++row) dz2.row(row) = dpool.transpose() * inv_n;
  for (Index col = 0; col < d; ++col) dz2(c.argmax[static_cast<std::size_t>(col)], col) += dpool[col];
  dz2 = dz2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());

  // z2 = A * h1_in * W2 with A symmetric.
  const Mat p = c.adj.transpose() * dz2;
  grads.w2.noalias() += c.h1_in.transpose() * p;
  Mat dh1 = p * params.w2.transpose();
  if (c.hidden_mask.size() > 0) dh1 = dh1.cwiseProduct(c.hidden_mask) * c.keep_scale;
  const Mat dz1 = dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());

  // z1 = A * x_in * W1; only rows of W1 hit by a nonzero feature get gradient.
  const Mat q = c.adj.transpose() * dz1;
  for (Index row = 0; row < n; ++row)
    for (Index k = 0; k < c.x_in.cols(); ++k) {
      const double v = c.x_in(row, k);
      if (v != 0.0) grads.w1.row(k).noalias() += v * q.row(row);
    }
}

EncoderGrads encoder_backward(const ForwardCache& cache, const EncoderParams& params,
                              const Vec& grad_h) {
  EncoderGrads g = EncoderParams::zeros(params.dims());
  encoder_backward_accumulate(cache, params, grad_h, g);
  return g;
}

AdamState AdamState::fresh(const EncoderDims& dims, double lr) {
  AdamState s;
  s.m = EncoderParams::zeros(dims);
  s.v = EncoderParams::zeros(dims);
  s.lr = lr;
  return s;
}

void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& s) {
  require(params.dims() == grads.dims() && params.dims() == s.m.dims() &&
              params.dims() == s.v.dims(),
          "adam_step shape mismatch");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  auto update = [&](Mat& w, const Mat& g, Mat& m, Mat& v) {
    double* wp = w.data();
    const double* gp = g.data();
    double* mp = m.data();
    double* vp = v.data();
    for (Index i = 0; i < w.size(); ++i) {
      mp[i] = s.beta1 * mp[i] + (1.0 - s.beta1) * gp[i];
      vp[i] = s.beta2 * vp[i] + (1.0 - s.beta2) * gp[i] * gp[i];
      wp[i] -= s.lr * (mp[i] / bc1) / (std::sqrt(vp[i] / bc2) + s.eps);
    }
  };
  update(params.w1, grads.w1, s.m.w1, s.v.w1);
  update(params.w2, grads.w2, s.m.w2, s.v.w2);
}

// ---- checkpoint -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'G', 'C', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError(path.string() + ": truncated checkpoint");
  return v;
}

void put_mat(std::ofstream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * static_cast<Index>(sizeof(double))));
}

Mat get_mat(std::ifstream& in, Index rows, Index cols, const std::filesystem::path& path) {
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * static_cast<Index>(sizeof(double))));
  if (!in) throw FormatError(path.string() + ": truncated checkpoint");
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  const EncoderDims dims = ckpt.params.dims();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, ckpt.config_hash);
  put<std::int64_t>(out, ckpt.epoch);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(dims.d_in));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(dims.d_hidden));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(dims.d_out));
  put<std::uint64_t>(out, ckpt.adam.t);
  put<double>(out, ckpt.adam.lr);
  put<double>(out, ckpt.adam.beta1);
  put<double>(out, ckpt.adam.beta2);
  put<double>(out, ckpt.adam.eps);
  put_mat(out, ckpt.params.w1);
  put_mat(out, ckpt.params.w2);
  put_mat(out, ckpt.adam.m.w1);
  put_mat(out, ckpt.adam.m.w2);
  put_mat(out, ckpt.adam.v.w1);
  put_mat(out, ckpt.adam.v.w2);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open checkpoint");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": not a checkpoint file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  get<std::uint32_t>(in, path);
  Checkpoint c;
  c.config_hash = get<std::uint64_t>(in, path);
  c.epoch = get<std::int64_t>(in, path);
  EncoderDims dims;
  dims.d_in = static_cast<Index>(get<std::uint64_t>(in, path));
  dims.d_hidden = static_cast<Index>(get<std::uint64_t>(in, path));
  dims.d_out = static_cast<Index>(get<std::uint64_t>(in, path));
  if (dims.d_in < 1 || dims.d_hidden < 1 || dims.d_out < 1 || dims.d_in > (1 << 24) ||
      dims.d_hidden > (1 << 16) || dims.d_out > (1 << 16))
    throw FormatError(path.string() + ": implausible encoder dims");
  c.adam.t = get<std::uint64_t>(in, path);
  c.adam.lr = get<double>(in, path);
  c.adam.beta1 = get<double>(in, path);
  c.adam.beta2 = get<double>(in, path);
  c.adam.eps = get<double>(in, path);
  c.params.w1 = get_mat(in, dims.d_in, dims.d_hidden, path);
  c.params.w2 = get_mat(in, dims.d_hidden, dims.d_out, path);
  c.adam.m.w1 = get_mat(in, dims.d_in, dims.d_hidden, path);
  c.adam.m.w2 = get_mat(in, dims.d_hidden, dims.d_out, path);
  c.adam.v.w1 = get_mat(in, dims.d_in, dims.d_hidden, path);
  c.adam.v.w2 = get_mat(in, dims.d_hidden, dims.d_out, path);
  in.peek();
  if (!in.eof()) throw FormatError(path.string() + ": trailing bytes after checkpoint payload");
  return c;
}

}  // namespace gcl
