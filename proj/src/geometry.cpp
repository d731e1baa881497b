#include "deconvo/geometry.hpp"

#include <cmath>
#include <limits>

#include "deconvo/linalg.hpp"
#include "deconvo/rng.hpp"

namespace deconvo {

TangentSpace::TangentSpace(const Vector& h0, const Vector& m0) {
  require(h0.size() >= 1 && m0.size() >= 1, "tangent space needs K, N >= 1");
  require(h0.norm() > 0.0 && m0.norm() > 0.0, "tangent space base point must be nonzero");
  h0_ = h0.normalized();
  m0_ = m0.normalized();
  U_ = unitary_completion(h0_);
  V_ = unitary_completion(m0_);
  basis_.reserve(static_cast<std::size_t>(dimension()));
  for (Eigen::Index j = 0; j < N(); ++j) basis_.push_back(U_.col(0) * V_.col(j).adjoint());
  for (Eigen::Index i = 1; i < K(); ++i) basis_.push_back(U_.col(i) * V_.col(0).adjoint());
}

void TangentSpace::check(const Matrix& Z) const {
  require(Z.rows() == K() && Z.cols() == N(), "matrix does not match the tangent space");
}

Matrix TangentSpace::project(const Matrix& Z) const {
  check(Z);
  const Matrix left = h0_ * (h0_.adjoint() * Z);  // h0 h0^* Z
  const Matrix right = (Z * m0_) * m0_.adjoint();  // Z m0 m0^*
  const Matrix both = h0_ * (h0_.adjoint() * Z * m0_) * m0_.adjoint();
  return left + right - both;
}

Matrix TangentSpace::project_perp(const Matrix& Z) const {
  check(Z);
  Matrix W = Z - h0_ * (h0_.adjoint() * Z);
  W -= (W * m0_) * m0_.adjoint();
  return W;
}

Matrix DescentDecomposition::reassemble(const TangentSpace& ts) const {
  const cplx base(-beta, iota);
  return base * ts.h0() * ts.m0().adjoint() + gamma * ts.h0() * m0_perp.adjoint() +
         eta * h0_perp * ts.m0().adjoint() + M;
}

double DescentDecomposition::m_nuclear() const { return nuclear_norm(M); }

nlohmann::json DescentDecomposition::to_json() const {
  return {{"beta", beta},   {"iota", iota},           {"gamma", gamma},
          {"eta", eta},     {"m_nuclear", m_nuclear()}, {"m_frobenius", m_frobenius()}};
}

DescentDecomposition decompose_descent(const TangentSpace& ts, const Matrix& Z) {
  require(Z.rows() == ts.K() && Z.cols() == ts.N(), "matrix does not match the tangent space");
  const double znorm = Z.norm();
  require(znorm > 0.0, "cannot decompose the zero matrix");
  const double degenerate = 1e-13 * znorm;
  const Vector& h0 = ts.h0();
  const Vector& m0 = ts.m0();

  DescentDecomposition d;
  const cplx a = h0.dot(Z * m0);  // h0^* Z m0
  d.beta = -a.real();
  d.iota = a.imag();

  // Row component h0^* Z (I - m0 m0^*), stored as a column.
  Vector row = Z.adjoint() * h0;
  row -= m0 * m0.dot(row);
  d.gamma = row.norm();
  if (d.gamma > degenerate) {
    d.m0_perp = row / d.gamma;
  } else {
    d.gamma = 0.0;
    d.m0_perp = first_orthogonal(m0);
  }

  Vector col = Z * m0;
  col -= h0 * h0.dot(col);
  d.eta = col.norm();
  if (d.eta > degenerate) {
    d.h0_perp = col / d.eta;
  } else {
    d.eta = 0.0;
    d.h0_perp = first_orthogonal(h0);
  }

  d.M = ts.project_perp(Z);
  return d;
}

DescentCheck is_descent_direction(const TangentSpace& ts, const Matrix& Z) {
  require(Z.rows() == ts.K() && Z.cols() == ts.N(), "matrix does not match the tangent space");
  require(Z.norm() > 0.0, "descent test needs a nonzero direction");
  const double decrease = -frob_inner(ts.h0() * ts.m0().adjoint(), Z).real();
  const double margin = decrease - nuclear_norm(ts.project_perp(Z));
  return {margin >= -1e-10, margin};
}

std::string to_string(ConeMix mix) {
  switch (mix) {
    case ConeMix::TangentHeavy:
      return "tangent-heavy";
    case ConeMix::OrthogonalHeavy:
      return "orthogonal-heavy";
    case ConeMix::Uniform:
      return "uniform";
  }
  return "unknown";
}

ConeMix parse_cone_mix(const std::string& name) {
  if (name == "tangent-heavy") return ConeMix::TangentHeavy;
  if (name == "orthogonal-heavy") return ConeMix::OrthogonalHeavy;
  if (name == "uniform") return ConeMix::Uniform;
  throw InvalidInput("unknown cone mix '" + name + "'");
}

namespace {

// Random unit vector orthogonal to the unit vector v (zero if none exists).
Vector random_orthogonal(const Vector& v, Rng& rng) {
  Vector g = rng.complex_gaussian(v.size());
  g -= v * v.dot(g);
  const double n = g.norm();
  if (n < 1e-12) return Vector::Zero(v.size());
  return g / n;
}

}  // namespace

Matrix sample_descent_cone(const TangentSpace& ts, std::uint64_t seed, ConeMix mix) {
  Rng rng(seed);
  double gamma = 0.0, eta = 0.0, m_nuclear = 0.0, slack = 0.0;
  switch (mix) {
    case ConeMix::TangentHeavy:
      gamma = rng.uniform(0.5, 2.0);
      eta = rng.uniform(0.5, 2.0);
      m_nuclear = rng.uniform(0.0, 0.2);
      slack = rng.uniform(0.0, 0.1);
      break;
    case ConeMix::OrthogonalHeavy:
      gamma = rng.uniform(0.0, 0.2);
      eta = rng.uniform(0.0, 0.2);
      m_nuclear = rng.uniform(0.5, 2.0);
      slack = rng.uniform(0.0, 0.5);
      break;
    case ConeMix::Uniform:
      gamma = rng.uniform();
      eta = rng.uniform();
      m_nuclear = rng.uniform();
      slack = rng.uniform();
      break;
  }
  const Vector m_perp = random_orthogonal(ts.m0(), rng);
  const Vector h_perp = random_orthogonal(ts.h0(), rng);
  Matrix M = ts.project_perp(rng.complex_gaussian_matrix(ts.K(), ts.N()));
  const double raw = nuclear_norm(M);
  if (raw > 1e-12) {
    M *= m_nuclear / raw;
  } else {
    M.setZero();
    m_nuclear = 0.0;
  }
  const double beta = m_nuclear + slack;
  Matrix Z = -beta * ts.h0() * ts.m0().adjoint() + gamma * ts.h0() * m_perp.adjoint() +
             eta * h_perp * ts.m0().adjoint() + M;
  const double norm = Z.norm();
  if (norm < 1e-12) {
    return -ts.h0() * ts.m0().adjoint();
  }
  return Z / norm;
}

double nuclear_norm(const Matrix& X) { return singular_values(X).sum(); }

double nuclear_norm_2x2(double a, double b, double c) {
  const double off = std::abs(b) + std::abs(c);
  return std::hypot(a, off);
}

double beta_lower_bound(double epsilon, double nu) {
  require(nu > 0.0, "nu must be positive");
  require(epsilon >= 0.0, "epsilon must be nonnegative");
  return std::min(epsilon / (4.0 * nu), 0.5);
}

ConicEstimate min_conic_singular_estimate(const SubspaceModel& model, const TangentSpace& ts,
                                          std::size_t n_samples, std::uint64_t seed) {
  require(n_samples >= 1, "need at least one sample");
  require(model.K() == ts.K() && model.N() == ts.N(), "model and tangent space disagree");
  ConicEstimate best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_samples; ++k) {
    Matrix Z;
    if (k == 0) {
      Z = -ts.h0() * ts.m0().adjoint();
    } else {
      const auto mix = static_cast<ConeMix>(k % 3);
      Z = sample_descent_cone(ts, derive_seed(seed, k), mix);
    }
    const double ratio = apply_A(model, Z).norm() / Z.norm();
    if (ratio < best.value) {
      best.value = ratio;
      best.argmin_index = k;
      best.Z = Z;
    }
  }
  best.decomposition = decompose_descent(ts, best.Z);
  return best;
}

}  // namespace deconvo
