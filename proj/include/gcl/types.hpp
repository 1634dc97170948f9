#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcl {

using Index = Eigen::Index;
using NodeId = std::int64_t;

// Row-major so that row slices (node features, embedding rows) are contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

using NodeSet = std::vector<NodeId>;  // sorted, unique

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input text; message carries file and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An id or index outside its valid range.
class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid input (duplicate ids, inconsistent shapes).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not proceed (rank deficiency, non-finite values).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace gcl
