#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconvo/common.hpp"
#include "deconvo/model.hpp"

namespace deconvo {

/// Tangent space at the rank-1 point h0 m0^*:  T = { h0 a^* + b m0^* }.
class TangentSpace {
 public:
  /// h0 and m0 are normalized on entry.
  TangentSpace(const Vector& h0, const Vector& m0);
  explicit TangentSpace(const GroundTruth& truth) : TangentSpace(truth.h0, truth.m0) {}

  const Vector& h0() const { return h0_; }
  const Vector& m0() const { return m0_; }
  Eigen::Index K() const { return h0_.size(); }
  Eigen::Index N() const { return m0_.size(); }
  /// Complex dimension K + N - 1.
  Eigen::Index dimension() const { return K() + N() - 1; }

  /// h0h0^* Z + Z m0m0^* - h0h0^* Z m0m0^*.
  Matrix project(const Matrix& Z) const;
  /// (I - h0h0^*) Z (I - m0m0^*).
  Matrix project_perp(const Matrix& Z) const;

  /// Orthonormal basis of T (Frobenius inner product): u_0 v_j^* for
  /// j < N followed by u_i v_0^* for 1 <= i < K, where U and V are unitary
  /// completions of h0 and m0.
  const std::vector<Matrix>& basis() const { return basis_; }
  const Matrix& U() const { return U_; }
  const Matrix& V() const { return V_; }

 private:
  void check(const Matrix& Z) const;

  Vector h0_;
  Vector m0_;
  Matrix U_;
  Matrix V_;
  std::vector<Matrix> basis_;
};

/// Z = (-beta + i iota) h0 m0^* + gamma h0 m0_perp^* + eta h0_perp m0^* + M,
/// with gamma, eta >= 0 and M in the orthogonal complement of T.
struct DescentDecomposition {
  double beta = 0.0;
  double iota = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  Vector h0_perp;
  Vector m0_perp;
  Matrix M;

  Matrix reassemble(const TangentSpace& ts) const;
  double m_nuclear() const;
  double m_frobenius() const { return M.norm(); }
  nlohmann::json to_json() const;
};

DescentDecomposition decompose_descent(const TangentSpace& ts, const Matrix& Z);

struct DescentCheck {
  bool is_descent = false;
  /// -Re<h0 m0^*, Z>_F - ||P_Tperp Z||_*
  double margin = 0.0;
};

/// Membership in the closed descent cone of the nuclear norm at h0 m0^*,
/// accepting margins down to -1e-10.
DescentCheck is_descent_direction(const TangentSpace& ts, const Matrix& Z);

enum class ConeMix { TangentHeavy, OrthogonalHeavy, Uniform };
std::string to_string(ConeMix mix);
ConeMix parse_cone_mix(const std::string& name);

/// Random unit-Frobenius element of the descent cone.
Matrix sample_descent_cone(const TangentSpace& ts, std::uint64_t seed, ConeMix mix);

double nuclear_norm(const Matrix& X);
/// Nuclear norm of [[a, b], [c, 0]]: sqrt(a^2 + (|b| + |c|)^2).
double nuclear_norm_2x2(double a, double b, double c);
/// min{epsilon / (4 nu), 1/2}.
double beta_lower_bound(double epsilon, double nu);

struct ConicEstimate {
  /// min over the samples of ||A(Z)|| / ||Z||_F; an upper bound on the
  /// minimum conic singular value.
  double value = 0.0;
  std::size_t argmin_index = 0;
  Matrix Z;
  DescentDecomposition decomposition;
};

/// Sample 0 is always -h0 m0^*; sample k >= 1 is drawn from its own stream,
/// so sample sets for increasing n_samples are nested.
ConicEstimate min_conic_singular_estimate(const SubspaceModel& model, const TangentSpace& ts,
                                          std::size_t n_samples, std::uint64_t seed);

}  // namespace deconvo
