#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace deconvo {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
/// Row-major storage so that each measurement row b_l / c_l is contiguous.
using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A caller supplied arguments that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No admissible partition was found within the allotted tries.
class PartitionFailure : public std::runtime_error {
 public:
  PartitionFailure(const std::string& what, double best_alpha)
      : std::runtime_error(what), best_alpha_(best_alpha) {}
  double best_alpha() const noexcept { return best_alpha_; }

 private:
  double best_alpha_;
};

/// The measurement operator is too far from an isometry on the tangent space.
class IllConditionedTangent : public std::runtime_error {
 public:
  IllConditionedTangent(const std::string& what, double delta)
      : std::runtime_error(what), delta_(delta) {}
  double delta() const noexcept { return delta_; }

 private:
  double delta_;
};

class SolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateSubspace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frobenius inner product tr(X^* Z), conjugate-linear in X.
inline cplx frob_inner(const Matrix& X, const Matrix& Z) {
  return (X.array().conjugate() * Z.array()).sum();
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

}  // namespace deconvo
