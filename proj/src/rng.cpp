#include "deconvo/rng.hpp"

#include <cmath>
#include <numbers>

namespace deconvo {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t sub) {
  return derive_seed(derive_seed(master, index), sub);
}

double Rng::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

cplx Rng::complex_normal(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

Vector Rng::complex_gaussian(Eigen::Index n, double variance) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_normal(variance);
  return v;
}

Matrix Rng::complex_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double variance) {
  // Filled row by row so the draw order is independent of storage order.
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = complex_normal(variance);
  return m;
}

Vector Rng::unit_vector(Eigen::Index n) {
  Vector v = complex_gaussian(n);
  double norm = v.norm();
  while (norm == 0.0) {
    v = complex_gaussian(n);
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace deconvo
