#include "gcl/dpp.hpp"

#include "gcl/log.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace gcl {
namespace {

constexpr double kRankTol = 1e-10;
constexpr double kJitter = 1e-10;

Index categorical(const Vec& weights, Rng& rng) {
  const double total = weights.sum();
  double u = uniform01(rng) * total;
  for (Index i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  // Round-off: return the last index with positive weight.
  for (Index i = weights.size() - 1; i >= 0; --i)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

/// Draws from the projection DPP whose kernel is V V^T (orthonormal columns
/// of `v`) by the chain rule, conditioning with an incremental Cholesky
/// factor: O(M k^2) per draw.
std::vector<Index> sample_projection(const Eigen::MatrixXd& v, Rng& rng) {
  const Index m = v.rows(), k = v.cols();
  Vec residual = v.rowwise().squaredNorm();
  Eigen::MatrixXd factor(m, k);
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(k));
  for (Index t = 0; t < k; ++t) {
    residual = residual.cwiseMax(0.0);
    const Index i = categorical(residual, rng);
    picked.push_back(i);
    Vec col = v * v.row(i).transpose();
    if (t > 0) col.noalias() -= factor.leftCols(t) * factor.row(i).head(t).transpose();
    col /= std::sqrt(residual[i]);
    factor.col(t) = col;
    residual -= col.cwiseAbs2();
    residual[i] = 0.0;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

struct Spectrum {
  Vec values;
  Eigen::MatrixXd vectors;
};

Spectrum eigendecompose(const Mat& l) {
  Eigen::MatrixXd jittered = l;
  jittered.diagonal().array() += kJitter;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jittered);
  if (solver.info() != Eigen::Success) throw NumericError("kernel eigendecomposition failed");
  return {solver.eigenvalues().cwiseMax(0.0), solver.eigenvectors()};
}

}  // namespace

double pairwise_distance(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "pairwise_distance: dimension mismatch");
  return (a - b).norm();
}

KernelMatrix build_kernel(const Mat& pool, Bandwidth bandwidth, std::vector<NodeId> item_ids) {
  const Index m = pool.rows();
  require(m >= 1, "build_kernel: empty pool");
  require(item_ids.empty() || static_cast<Index>(item_ids.size()) == m,
          "build_kernel: one id per pool item");

  Mat sq(m, m);
  std::vector<double> nonzero;
  for (Index a = 0; a < m; ++a) {
    sq(a, a) = 0.0;
    for (Index b = a + 1; b < m; ++b) {
      const double d2 = (pool.row(a) - pool.row(b)).squaredNorm();
      sq(a, b) = sq(b, a) = d2;
      if (d2 > 0.0) nonzero.push_back(std::sqrt(d2));
    }
  }

  double sigma = 1.0;
  if (bandwidth.fixed) {
    require(*bandwidth.fixed > 0.0, "build_kernel: bandwidth must be positive");
    sigma = *bandwidth.fixed;
  } else if (nonzero.empty()) {
    if (m > 1) log_warn("build_kernel: all pairwise distances are zero; using sigma = 1");
  } else {
    const std::size_t mid = nonzero.size() / 2;
    std::nth_element(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(mid), nonzero.end());
    sigma = nonzero[mid];
    if (nonzero.size() % 2 == 0) {
      const double lower = *std::max_element(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(mid));
      sigma = 0.5 * (sigma + lower);
    }
  }

  KernelMatrix k;
  k.bandwidth = sigma;
  k.L = (-sq.array() / (2.0 * sigma * sigma)).exp().matrix();
  k.L.diagonal().setOnes();
  k.item_ids = std::move(item_ids);
  return k;
}

double SubsetLaw::inclusion(unsigned mask) const {
  double p = 0.0;
  for (unsigned a = 0; a < probability.size(); ++a)
    if ((a & mask) == mask) p += probability[a];
  return p;
}

double SubsetLaw::conditional(unsigned mask, int k) const {
  double mass = 0.0;
  for (unsigned a = 0; a < probability.size(); ++a)
    if (std::popcount(a) == k) mass += probability[a];
  if (std::popcount(mask) != k || mass <= 0.0) return 0.0;
  return probability[mask] / mass;
}

SubsetLaw dpp_brute_probabilities(const KernelMatrix& kernel) {
  const Index m = kernel.size();
  if (m > kBruteForceLimit)
    throw ContractViolation("dpp_brute_probabilities: pool of " + std::to_string(m) +
                            " exceeds the enumeration limit of " + std::to_string(kBruteForceLimit));
  SubsetLaw law;
  law.size = m;
  const Eigen::MatrixXd l = kernel.L;
  const Eigen::MatrixXd l_plus_i = l + Eigen::MatrixXd::Identity(m, m);
  law.normalizer = l_plus_i.determinant();
  law.marginal = l * l_plus_i.inverse();

  const unsigned count = 1u << m;
  law.probability.assign(count, 0.0);
  for (unsigned mask = 0; mask < count; ++mask) {
    std::vector<Index> idx;
    for (Index i = 0; i < m; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    double det = 1.0;
    if (!idx.empty()) {
      Eigen::MatrixXd sub(idx.size(), idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) sub(a, b) = l(idx[a], idx[b]);
      det = sub.determinant();
    }
    law.probability[mask] = det / law.normalizer;
  }
  return law;
}

std::vector<double> elementary_symmetric(const std::vector<double>& values, Index k) {
  require(k >= 0 && k <= static_cast<Index>(values.size()),
          "elementary_symmetric: k must lie in [0, M]");
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  for (double x : values)
    for (Index j = k; j >= 1; --j) e[j] += x * e[j - 1];
  return e;
}

KdppSampler::KdppSampler(const KernelMatrix& kernel, Index k) : k_(k) {
  const Index m = kernel.size();
  require(k >= 0 && k <= m, "sample_kdpp: subset size must lie in [0, pool size]");
  auto [values, vectors] = eigendecompose(kernel.L);
  eigenvalues_ = values;
  eigenvectors_ = vectors;
  // The jitter lifts null directions to kJitter; they must not count.
  const double cut = kJitter + kRankTol * std::max(1.0, m > 0 ? eigenvalues_.maxCoeff() : 0.0);
  for (Index i = 0; i < m; ++i) rank_ += eigenvalues_[i] > cut;
  if (k > rank_)
    throw NumericError("sample_kdpp: requested " + std::to_string(k) +
                       " items but the kernel has numerical rank " + std::to_string(rank_) +
                       "; use greedy_map or a smaller subset size");

  esp_.assign(static_cast<std::size_t>(k) + 1, std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0));
  for (Index n = 0; n <= m; ++n) esp_[0][n] = 1.0;
  for (Index l = 1; l <= k; ++l)
    for (Index n = 1; n <= m; ++n)
      esp_[l][n] = esp_[l][n - 1] + eigenvalues_[n - 1] * esp_[l - 1][n - 1];
}

std::vector<Index> KdppSampler::draw(Rng& rng) const {
  const Index m = eigenvalues_.size();
  std::vector<Index> chosen;
  Index remaining = k_;
  for (Index n = m; n >= 1 && remaining > 0; --n) {
    // Eigenvector n is kept with probability lambda_n e_{l-1}^{n-1} / e_l^{n}.
    const double denom = esp_[remaining][n];
    if (denom <= 0.0) continue;
    const double keep = eigenvalues_[n - 1] * esp_[remaining - 1][n - 1] / denom;
    if (uniform01(rng) < keep) {
      chosen.push_back(n - 1);
      --remaining;
    }
  }
  Eigen::MatrixXd v(m, static_cast<Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c) v.col(static_cast<Index>(c)) = eigenvectors_.col(chosen[c]);
  return sample_projection(v, rng);
}

std::vector<Index> sample_kdpp(const KernelMatrix& kernel, Index m, Rng& rng) {
  return KdppSampler(kernel, m).draw(rng);
}

std::vector<Index> sample_dpp(const KernelMatrix& kernel, Rng& rng) {
  auto [values, vectors] = eigendecompose(kernel.L);
  std::vector<Index> chosen;
  for (Index i = 0; i < values.size(); ++i)
    if (uniform01(rng) < values[i] / (1.0 + values[i])) chosen.push_back(i);
  Eigen::MatrixXd v(values.size(), static_cast<Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c) v.col(static_cast<Index>(c)) = vectors.col(chosen[c]);
  return sample_projection(v, rng);
}

std::vector<Index> greedy_map(const KernelMatrix& kernel, Index m, std::string* warning) {
  const Index n = kernel.size();
  require(m >= 0 && m <= n, "greedy_map: subset size must lie in [0, pool size]");
  const Mat& l = kernel.L;
  Mat chol = Mat::Zero(m, n);  // column i holds the Cholesky row for item i
  Vec d2 = l.diagonal();
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<Index> picked;

  auto best = [&]() {
    Index arg = -1;
    for (Index i = 0; i < n; ++i)
      if (!taken[i] && (arg < 0 || d2[i] > d2[arg])) arg = i;
    return arg;
  };

  while (static_cast<Index>(picked.size()) < m) {
    const Index j = best();
    if (d2[j] <= 1e-12) {
      const std::string msg = "greedy_map: non-positive pivot after " +
                              std::to_string(picked.size()) + " of " + std::to_string(m) +
                              " items; returning the partial subset";
      log_warn(msg);
      if (warning) *warning = msg;
      break;
    }
    const Index row = static_cast<Index>(picked.size());
    picked.push_back(j);
    taken[j] = 1;
    const double dj = std::sqrt(d2[j]);
    for (Index i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double e = (l(j, i) - chol.col(j).head(row).dot(chol.col(i).head(row))) / dj;
      chol(row, i) = e;
      d2[i] -= e * e;
    }
    chol(row, j) = dj;
  }
  return picked;
}

}  // namespace gcl
