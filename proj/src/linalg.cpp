#include "deconvo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deconvo {

Svd::Svd(const Matrix& X) {
  const Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  sigma = svd.singularValues();
  U = svd.matrixU();
  V = svd.matrixV();
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      const double mag = std::abs(U(i, j));
      if (mag > 1e-14) {
        const cplx phase = std::conj(U(i, j)) / mag;
        U.col(j) *= phase;
        V.col(j) *= phase;
        break;
      }
    }
  }
}

Matrix Svd::reassemble() const { return U * sigma.cast<cplx>().asDiagonal() * V.adjoint(); }

RealVector singular_values(const Matrix& X) {
  if (X.size() == 0) return {};
  return Eigen::JacobiSVD<Matrix>(X).singularValues();
}

double spectral_norm(const Matrix& X) {
  const RealVector s = singular_values(X);
  return s.size() == 0 ? 0.0 : s(0);
}

Matrix unitary_completion(const Vector& v) {
  const Eigen::HouseholderQR<Matrix> qr{Matrix(v)};
  Matrix Q = qr.householderQ();
  // Q's first column is v up to a unit phase; drop the phase.
  Q.col(0) = v;
  return Q;
}

Vector first_orthogonal(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n <= 1) return Vector::Zero(n);
  // Sum over j of ||e_j - v v_j^*||^2 is n - 1, so some j clears 1/2.
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector r = -v * std::conj(v(j));
    r(j) += 1.0;
    const double norm2 = r.squaredNorm();
    if (norm2 >= 0.5) {
      // Second Gram-Schmidt pass for orthogonality to rounding error.
      r -= v * v.dot(r);
      return r.normalized();
    }
  }
  return Vector::Zero(n);
}

double max_deviation_from_one(const Matrix& hermitian) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(hermitian, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver did not converge");
  const RealVector& ev = eig.eigenvalues();
  return std::max(std::abs(ev.maxCoeff() - 1.0), std::abs(1.0 - ev.minCoeff()));
}

}  // namespace deconvo
