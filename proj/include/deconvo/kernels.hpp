#pragma once

#include <vector>

#include "deconvo/common.hpp"

// Dense kernels for the lifted measurement map
//   y_l = b_l^* X c_l          (forward)
//   Y   = sum_l z_l b_l c_l^*  (adjoint)
// where b (L x K) and c (L x N) hold the measurement rows.
//
// The *_parallel variants split the rows into fixed-size chunks and run the
// chunks under OpenMP. Chunk boundaries do not depend on the thread count and
// adjoint partial sums are combined in chunk order, so results are
// bit-identical for any number of threads. The *_serial variants are plain
// loops kept as the reference implementation.

namespace deconvo::kernels {

inline constexpr Eigen::Index kRowChunk = 64;

Vector forward_serial(const RowMatrix& b, const RowMatrix& c, const Matrix& X);
Vector forward_parallel(const RowMatrix& b, const RowMatrix& c, const Matrix& X);

Matrix adjoint_serial(const RowMatrix& b, const RowMatrix& c, const Vector& z);
Matrix adjoint_parallel(const RowMatrix& b, const RowMatrix& c, const Vector& z);

/// Adjoint restricted to the listed rows; rows outside `rows` contribute zero.
Matrix adjoint_rows(const RowMatrix& b, const RowMatrix& c, const Vector& z,
                    const std::vector<Eigen::Index>& rows);

}  // namespace deconvo::kernels
