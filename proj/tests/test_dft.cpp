#include <gtest/gtest.h>

#include "deconvo/dft.hpp"
#include "deconvo/rng.hpp"

using namespace deconvo;

TEST(Dft, MatchesDirectSum) {
  Rng rng(1);
  for (const Eigen::Index L : {1, 2, 7, 16, 33, 64}) {
    const Vector x = rng.complex_gaussian(L);
    EXPECT_LE((dft(x) - dft_reference(x)).norm(), 1e-12 * x.norm()) << "L = " << L;
  }
}

TEST(Dft, IsUnitaryAndInvertible) {
  Rng rng(2);
  const Vector x = rng.complex_gaussian(48);
  EXPECT_NEAR(dft(x).norm(), x.norm(), 1e-12 * x.norm());
  EXPECT_LE((idft(dft(x)) - x).norm(), 1e-12 * x.norm());
}

TEST(Dft, DeltaMapsToFlatSpectrum) {
  Vector d = Vector::Zero(16);
  d(0) = 1.0;
  const Vector f = dft(d);
  for (Eigen::Index k = 0; k < 16; ++k) EXPECT_NEAR(std::abs(f(k) - cplx(0.25, 0.0)), 0.0, 1e-15);
}

TEST(Dft, ColumnsAreTransformedIndependently) {
  Rng rng(3);
  const Matrix X = rng.complex_gaussian_matrix(20, 3);
  const Matrix F = dft_columns(X);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_LE((F.col(j) - dft(X.col(j))).norm(), 1e-14 * X.col(j).norm());
  }
}
