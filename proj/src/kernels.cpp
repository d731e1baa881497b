#include "deconvo/kernels.hpp"

namespace deconvo::kernels {
namespace {

Eigen::Index chunk_count(Eigen::Index rows) { return (rows + kRowChunk - 1) / kRowChunk; }

void check_shapes(const RowMatrix& b, const RowMatrix& c) {
  require(b.rows() == c.rows(), "measurement rows disagree on L");
}

}  // namespace

Vector forward_serial(const RowMatrix& b, const RowMatrix& c, const Matrix& X) {
  check_shapes(b, c);
  require(X.rows() == b.cols() && X.cols() == c.cols(), "X has wrong dimensions");
  const Eigen::Index L = b.rows(), K = b.cols(), N = c.cols();
  Vector y(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    cplx acc{0.0, 0.0};
    for (Eigen::Index k = 0; k < K; ++k) {
      cplx row{0.0, 0.0};
      for (Eigen::Index n = 0; n < N; ++n) row += X(k, n) * c(l, n);
      acc += std::conj(b(l, k)) * row;
    }
    y(l) = acc;
  }
  return y;
}

Vector forward_parallel(const RowMatrix& b, const RowMatrix& c, const Matrix& X) {
  check_shapes(b, c);
  require(X.rows() == b.cols() && X.cols() == c.cols(), "X has wrong dimensions");
  const Eigen::Index L = b.rows();
  const Eigen::Index chunks = chunk_count(L);
  Vector y(L);
#pragma omp parallel for schedule(static)
  for (Eigen::Index ch = 0; ch < chunks; ++ch) {
    const Eigen::Index r0 = ch * kRowChunk;
    const Eigen::Index n = std::min(kRowChunk, L - r0);
    const Matrix bx = b.middleRows(r0, n).conjugate() * X;
    y.segment(r0, n) = (bx.array() * c.middleRows(r0, n).array()).rowwise().sum();
  }
  return y;
}

Matrix adjoint_serial(const RowMatrix& b, const RowMatrix& c, const Vector& z) {
  check_shapes(b, c);
  require(z.size() == b.rows(), "z has wrong length");
  const Eigen::Index L = b.rows(), K = b.cols(), N = c.cols();
  Matrix Y = Matrix::Zero(K, N);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (Eigen::Index n = 0; n < N; ++n) {
      const cplx w = z(l) * std::conj(c(l, n));
      for (Eigen::Index k = 0; k < K; ++k) Y(k, n) += b(l, k) * w;
    }
  }
  return Y;
}

Matrix adjoint_parallel(const RowMatrix& b, const RowMatrix& c, const Vector& z) {
  check_shapes(b, c);
  require(z.size() == b.rows(), "z has wrong length");
  const Eigen::Index L = b.rows();
  const Eigen::Index chunks = chunk_count(L);
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index ch = 0; ch < chunks; ++ch) {
    const Eigen::Index r0 = ch * kRowChunk;
    const Eigen::Index n = std::min(kRowChunk, L - r0);
    const Matrix weighted = z.segment(r0, n).asDiagonal() * c.middleRows(r0, n).conjugate();
    partial[static_cast<std::size_t>(ch)] = b.middleRows(r0, n).transpose() * weighted;
  }
  Matrix Y = Matrix::Zero(b.cols(), c.cols());
  for (const auto& p : partial) Y += p;
  return Y;
}

Matrix adjoint_rows(const RowMatrix& b, const RowMatrix& c, const Vector& z,
                    const std::vector<Eigen::Index>& rows) {
  check_shapes(b, c);
  require(z.size() == b.rows(), "z has wrong length");
  Matrix Y = Matrix::Zero(b.cols(), c.cols());
  for (const Eigen::Index l : rows) {
    Y.noalias() += (z(l) * b.row(l).transpose()) * c.row(l).conjugate();
  }
  return Y;
}

}  // namespace deconvo::kernels
