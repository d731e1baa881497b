#pragma once

#include "deconvo/common.hpp"

namespace deconvo {

/// Unitary DFT, (Fx)_k = L^{-1/2} sum_j x_j exp(-2 pi i jk / L). Backed by FFTW.
Vector dft(const Vector& x);
/// Inverse of dft(); also unitary.
Vector idft(const Vector& x);
/// Applies dft() to every column.
Matrix dft_columns(const Matrix& X);

/// Direct O(L^2) evaluation of the same transform, for tests.
Vector dft_reference(const Vector& x);

}  // namespace deconvo
