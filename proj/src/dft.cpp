#include "deconvo/dft.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace deconvo {
namespace {

// The FFTW planner is not reentrant; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Vector transform(const Vector& x, int sign) {
  const auto n = static_cast<int>(x.size());
  if (n == 0) return {};
  Vector in = x;
  Vector out(n);
  auto* in_ptr = reinterpret_cast<fftw_complex*>(in.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, in_ptr, out_ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  out /= std::sqrt(static_cast<double>(n));
  return out;
}

}  // namespace

Vector dft(const Vector& x) { return transform(x, FFTW_FORWARD); }

Vector idft(const Vector& x) { return transform(x, FFTW_BACKWARD); }

Matrix dft_columns(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) out.col(j) = dft(X.col(j));
  return out;
}

Vector dft_reference(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector out = Vector::Zero(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < n; ++j) {
      // Reduce jk mod n first to keep the phase argument small.
      const auto idx = static_cast<double>((j * k) % n);
      const double angle = -2.0 * std::numbers::pi * idx / static_cast<double>(n);
      acc += x(j) * cplx(std::cos(angle), std::sin(angle));
    }
    out(k) = acc * scale;
  }
  return out;
}

}  // namespace deconvo
