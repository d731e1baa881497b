#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "deconvo/common.hpp"

namespace deconvo {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `index` under `master`. Distinct indices give
/// statistically independent mt19937_64 streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t sub);

/// Random source whose output depends only on the seed, not on the standard
/// library: std::*_distribution are implementation-defined, so the
/// transforms are written out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  /// Circularly-symmetric complex normal with E|z|^2 = variance.
  cplx complex_normal(double variance = 1.0);

  Vector complex_gaussian(Eigen::Index n, double variance = 1.0);
  Matrix complex_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0);
  /// Uniform on the complex unit sphere.
  Vector unit_vector(Eigen::Index n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace deconvo
