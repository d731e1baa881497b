#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "deconvo/common.hpp"
#include "deconvo/rng.hpp"

namespace deconvo {

enum class BType { IdentityColumns, RandomIsometry };

std::string to_string(BType type);
/// Accepts "identity-columns" and "random-isometry".
BType parse_btype(const std::string& name);

/// Rank-1 ground truth X0 = nu * h0 m0^* with unit h0, m0.
struct GroundTruth {
  Vector h0;
  Vector m0;
  double nu = 1.0;

  /// Normalizes h and m; the scale of the inputs is discarded.
  static GroundTruth make(const Vector& h, const Vector& m, double nu);
  static GroundTruth random(Eigen::Index K, Eigen::Index N, double nu, Rng& rng);

  Matrix X0() const { return nu * h0 * m0.adjoint(); }
  /// The unit-norm base point h0 m0^*.
  Matrix base_point() const { return h0 * m0.adjoint(); }
};

/// Subspace model: isometry B (L x K), Gaussian C (L x N) with entry
/// variance 1/L, and the materialized measurement rows
///   b_l = l-th row of conj(F B),   c_l = l-th row of sqrt(L) F C.
/// Immutable after construction.
class SubspaceModel {
 public:
  SubspaceModel(BType type, std::uint64_t seed, Matrix B, Matrix C);

  Eigen::Index L() const { return B_.rows(); }
  Eigen::Index K() const { return B_.cols(); }
  Eigen::Index N() const { return C_.cols(); }
  BType b_type() const { return type_; }
  std::uint64_t seed() const { return seed_; }

  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const RowMatrix& b_rows() const { return b_rows_; }
  const RowMatrix& c_rows() const { return c_rows_; }

 private:
  BType type_;
  std::uint64_t seed_;
  Matrix B_;
  Matrix C_;
  RowMatrix b_rows_;
  RowMatrix c_rows_;
};

SubspaceModel build_model(Eigen::Index L, Eigen::Index K, Eigen::Index N, BType type,
                          std::uint64_t seed);

struct MeasurementSet {
  Vector y;
  double tau = 0.0;
  std::optional<Vector> e;
};

/// y = A(X0) + e; requires ||e|| <= tau (1 + 1e-9).
MeasurementSet measure(const SubspaceModel& model, const GroundTruth& truth, const Vector& e,
                       double tau);

/// (A X)_l = <b_l c_l^*, X>_F = b_l^* X c_l.
Vector apply_A(const SubspaceModel& model, const Matrix& X);
/// A(h m^*) through the convolution theorem: sqrt(L) (F B h) .* (F C conj(m)).
Vector apply_A_rank1(const SubspaceModel& model, const Vector& h, const Vector& m);
/// A^*(z) = sum_l z_l b_l c_l^*.
Matrix apply_A_adjoint(const SubspaceModel& model, const Vector& z);

/// Direct circular convolution (w * x)_k = sum_j w_j x_{(k - j) mod L}.
Vector convolve_oracle(const Vector& w, const Vector& x);

/// mu^2_max = (L/K) max_l ||b_l||^2.
double coherence_mu_max(const SubspaceModel& model);
/// mu^2_h0 = (L/||h0||^2) max_l |<b_l, h0>|^2.
double coherence_mu_h0(const SubspaceModel& model, const Vector& h0);
/// Operator-norm bound 2 sqrt(omega max{1, mu_max K N / L} log(L + K N)),
/// with mu_max the square root of coherence_mu_max().
double opnorm_bound(const SubspaceModel& model, double omega);

/// JSON document with dims, b_type, seed and base64 little-endian complex128
/// arrays (row-major) for B and C. Round-trips bit-exactly.
nlohmann::json model_to_json(const SubspaceModel& model);
SubspaceModel model_from_json(const nlohmann::json& doc);

}  // namespace deconvo
