#pragma once

#include "deconvo/common.hpp"

namespace deconvo {

/// Thin SVD X = U diag(sigma) V^*, sigma nonincreasing. Each left singular
/// vector is rotated so that its first nonzero entry is real positive (the
/// matching right vector gets the same phase), which makes U and V unique
/// for distinct singular values.
struct Svd {
  RealVector sigma;
  Matrix U;
  Matrix V;

  explicit Svd(const Matrix& X);
  Matrix reassemble() const;
};

RealVector singular_values(const Matrix& X);
double spectral_norm(const Matrix& X);

/// Unitary matrix whose first column is exactly the unit vector `v`.
Matrix unitary_completion(const Vector& v);

/// First unit vector orthogonal to the unit vector `v` obtained by
/// Gram-Schmidt against e_0, e_1, ...; zero when v has length 1.
Vector first_orthogonal(const Vector& v);

/// Largest |lambda - 1| over the eigenvalues of a Hermitian matrix.
double max_deviation_from_one(const Matrix& hermitian);

}  // namespace deconvo
