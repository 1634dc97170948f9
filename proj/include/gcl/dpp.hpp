#pragma once

#include "gcl/rng.hpp"
#include "gcl/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gcl {

/// Symmetric PSD similarity kernel over a candidate pool, unit diagonal.
struct KernelMatrix {
  Mat L;
  std::vector<NodeId> item_ids;  // pool index -> global node id
  double bandwidth = 1.0;

  Index size() const { return L.rows(); }
};

/// Gaussian bandwidth: the median of nonzero pairwise distances, or fixed.
struct Bandwidth {
  std::optional<double> fixed;  // empty = median heuristic

  static Bandwidth median() { return {}; }
  static Bandwidth of(double sigma) { return {sigma}; }
};

double pairwise_distance(const Vec& a, const Vec& b);

/// L_jl = exp(-|x_j - x_l|^2 / (2 sigma^2)) over the rows of `pool`.
/// Median mode falls back to sigma = 1 (with a warning) when every pairwise
/// distance is zero.
KernelMatrix build_kernel(const Mat& pool, Bandwidth bandwidth,
                          std::vector<NodeId> item_ids = {});

/// Exact L-ensemble law by enumeration, for pools of at most 12 items.
struct SubsetLaw {
  Index size = 0;
  std::vector<double> probability;  // indexed by subset bitmask
  Mat marginal;                     // B = L (L + I)^{-1}
  double normalizer = 0.0;          // det(L + I)

  /// P(A ⊆ Y), by summing the enumerated law.
  double inclusion(unsigned mask) const;
  /// P(Y = A | |Y| = k).
  double conditional(unsigned mask, int k) const;
};

constexpr Index kBruteForceLimit = 12;

SubsetLaw dpp_brute_probabilities(const KernelMatrix& kernel);

/// e_0..e_k of the given values via e_j^(m) = e_j^(m-1) + x_m e_{j-1}^(m-1).
std::vector<double> elementary_symmetric(const std::vector<double>& values, Index k);

/// Exact k-DPP sampler. The eigendecomposition and the elementary symmetric
/// table are computed once; draw() is then O(M k^2).
class KdppSampler {
 public:
  /// Throws NumericError when k exceeds the numerical rank of L.
  KdppSampler(const KernelMatrix& kernel, Index k);

  std::vector<Index> draw(Rng& rng) const;

  Index rank() const { return rank_; }
  const Vec& eigenvalues() const { return eigenvalues_; }

 private:
  Index k_;
  Index rank_ = 0;
  Vec eigenvalues_;
  Eigen::MatrixXd eigenvectors_;  // column i <-> eigenvalue i
  std::vector<std::vector<double>> esp_;  // esp_[l][m] = e_l(lambda_1..lambda_m)
};

/// One exact draw of size m.
std::vector<Index> sample_kdpp(const KernelMatrix& kernel, Index m, Rng& rng);

/// Exact draw from the unconstrained L-ensemble (random size).
std::vector<Index> sample_dpp(const KernelMatrix& kernel, Rng& rng);

/// Greedy log-det maximization with incremental Cholesky; ties go to the
/// lowest index. Stops early (with a warning) if the next pivot is not
/// positive.
std::vector<Index> greedy_map(const KernelMatrix& kernel, Index m,
                              std::string* warning = nullptr);

}  // namespace gcl
