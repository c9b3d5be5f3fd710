#include <gtest/gtest.h>

#include <cmath>

#include "schane/numerics.hpp"
#include "schane/rng.hpp"
#include "support/testutil.hpp"

using namespace schane;
using numerics::Matrix;
using numerics::Vector;

TEST(L2Normalize, ThreeFourFive) {
  const Vector out = numerics::l2_normalize({3.0, 4.0});
  EXPECT_DOUBLE_EQ(out[0], 0.6);
  EXPECT_DOUBLE_EQ(out[1], 0.8);
}

TEST(L2Normalize, AlreadyUnit) {
  const Vector out = numerics::l2_normalize({1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 0.0);
}

TEST(L2Normalize, ZeroVectorFails) {
  try {
    numerics::l2_normalize({0.0, 0.0});
    FAIL() << "expected DegenerateVector";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateVector);
  }
}

TEST(L2Normalize, Idempotent) {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    Vector v(8);
    for (double& x : v) x = rng.normal() * 100.0;
    const Vector once = numerics::l2_normalize(v);
    const Vector twice = numerics::l2_normalize(once);
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(once[j], twice[j], 1e-12);
  }
}

TEST(LogSumExp, TwoZeros) { EXPECT_NEAR(numerics::log_sum_exp({0.0, 0.0}), std::log(2.0), 1e-15); }

TEST(LogSumExp, LargeInputsNoOverflow) {
  EXPECT_NEAR(numerics::log_sum_exp({1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-12);
}

TEST(LogSumExp, OneZero) {
  // oracle: ln(e + 1)
  EXPECT_NEAR(numerics::log_sum_exp({1.0, 0.0}), 1.3132616875182228, 1e-15);
}

TEST(LogSumExp, EmptyFails) {
  try {
    numerics::log_sum_exp({});
    FAIL() << "expected EmptyInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
  }
}

TEST(LogSumExp, ShiftInvariance) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Vector v(6);
    for (double& x : v) x = rng.normal() * 5.0;
    const double c = rng.normal() * 10.0;
    Vector shifted = v;
    for (double& x : shifted) x += c;
    EXPECT_NEAR(numerics::log_sum_exp(shifted), numerics::log_sum_exp(v) + c, 1e-12);
  }
}

TEST(Softmax, Uniform) {
  const Vector out = numerics::softmax({0.0, 0.0, 0.0, 0.0});
  for (double x : out) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Softmax, Stability) {
  const Vector out = numerics::softmax({1000.0, 0.0});
  EXPECT_NEAR(out[0], 1.0, 1e-12);
  EXPECT_NEAR(out[1], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(out[0]) && std::isfinite(out[1]));
}

TEST(Softmax, OneZero) {
  // oracle: (e/(e+1), 1/(e+1))
  const Vector out = numerics::softmax({1.0, 0.0});
  EXPECT_NEAR(out[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(out[1], 0.2689414213699951, 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Vector v(5);
    for (double& x : v) x = rng.normal() * 4.0;
    const Vector p = numerics::softmax(v);
    double sum = 0.0;
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    Vector shifted = v;
    for (double& x : shifted) x += 17.25;
    const Vector q = numerics::softmax(shifted);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(p[j], q[j], 1e-12);
  }
}

TEST(SymmetricEigen, Identity) {
  const auto res = numerics::symmetric_eigen(Matrix::identity(3));
  for (double ev : res.eigenvalues) EXPECT_NEAR(ev, 1.0, 1e-12);
}

TEST(SymmetricEigen, Diagonal) {
  const auto res = numerics::symmetric_eigen(Matrix{{4.0, 0.0}, {0.0, 1.0}});
  EXPECT_NEAR(res.eigenvalues[0], 4.0, 1e-12);
  EXPECT_NEAR(res.eigenvalues[1], 1.0, 1e-12);
  // sign convention: largest component positive
  EXPECT_NEAR(std::abs(res.eigenvectors(0, 0)), 1.0, 1e-12);
  EXPECT_GT(res.eigenvectors(0, 0), 0.0);
  EXPECT_GT(res.eigenvectors(1, 1), 0.0);
}

TEST(SymmetricEigen, TwoByTwo) {
  // characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 = 0 -> l = 3, 1
  const auto res = numerics::symmetric_eigen(Matrix{{2.0, 1.0}, {1.0, 2.0}});
  EXPECT_NEAR(res.eigenvalues[0], 3.0, 1e-10);
  EXPECT_NEAR(res.eigenvalues[1], 1.0, 1e-10);
}

TEST(SymmetricEigen, RejectsNonSquareAndAsymmetric) {
  try {
    numerics::symmetric_eigen(Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeError);
  }
  try {
    numerics::symmetric_eigen(Matrix{{1.0, 2.0}, {0.0, 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeError);
  }
}

TEST(SymmetricEigen, RandomReconstruction) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = i; j < 8; ++j) m(i, j) = m(j, i) = rng.normal();
    const auto res = numerics::symmetric_eigen(m);

    for (std::size_t a = 0; a < 8; ++a) {
      for (std::size_t b = 0; b < 8; ++b) {
        double d = 0.0;
        for (std::size_t k = 0; k < 8; ++k) d += res.eigenvectors(k, a) * res.eigenvectors(k, b);
        EXPECT_NEAR(d, a == b ? 1.0 : 0.0, 1e-8);
      }
      if (a + 1 < 8) EXPECT_GE(res.eigenvalues[a], res.eigenvalues[a + 1]);
      // M u = lambda u
      for (std::size_t i = 0; i < 8; ++i) {
        double mu = 0.0;
        for (std::size_t k = 0; k < 8; ++k) mu += m(i, k) * res.eigenvectors(k, a);
        EXPECT_NEAR(mu, res.eigenvalues[a] * res.eigenvectors(i, a), 1e-7);
      }
    }
    // U diag(lambda) U^T == M
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        double rec = 0.0;
        for (std::size_t k = 0; k < 8; ++k)
          rec += res.eigenvectors(i, k) * res.eigenvalues[k] * res.eigenvectors(j, k);
        EXPECT_NEAR(rec, m(i, j), 1e-7);
      }
  }
}

TEST(PcaProject, LineIn3d) {
  Matrix pts(4, 3);
  const double dir[3] = {1.0, 2.0, 2.0};  // length 3
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) pts(i, j) = static_cast<double>(i) * dir[j];
  const Matrix proj = numerics::pca_project(pts, 1);
  ASSERT_EQ(proj.rows(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double orig = std::abs(static_cast<double>(i) - static_cast<double>(j)) * 3.0;
      EXPECT_NEAR(std::abs(proj(i, 0) - proj(j, 0)), orig, 1e-9);
    }
}

TEST(PcaProject, CenteredDataIsRotation) {
  Rng rng(13);
  Matrix pts(6, 2);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      pts(i, j) = rng.normal();
      mean += pts(i, j);
    }
    for (std::size_t i = 0; i < 6; ++i) pts(i, j) -= mean / 6.0;
  }
  const Matrix proj = numerics::pca_project(pts, 2);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double orig = 0.0, projected = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        orig += (pts(i, k) - pts(j, k)) * (pts(i, k) - pts(j, k));
        projected += (proj(i, k) - proj(j, k)) * (proj(i, k) - proj(j, k));
      }
      EXPECT_NEAR(std::sqrt(orig), std::sqrt(projected), 1e-9);
    }
}

TEST(PcaProject, RectangleVarianceOrdering) {
  // covariance eigen oracle: points (+-3, +-1) -> column variances 12 and 4/3
  const Matrix pts{{3.0, 1.0}, {3.0, -1.0}, {-3.0, 1.0}, {-3.0, -1.0}};
  const Matrix proj = numerics::pca_project(pts, 2);
  double var1 = 0.0, var2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    var1 += proj(i, 0) * proj(i, 0);
    var2 += proj(i, 1) * proj(i, 1);
  }
  var1 /= 3.0;
  var2 /= 3.0;
  EXPECT_GE(var1, var2);
  EXPECT_NEAR(var1, 12.0, 1e-9);
  EXPECT_NEAR(var2, 4.0 / 3.0, 1e-9);
}

TEST(PcaProject, DimsTooLargeFails) {
  try {
    numerics::pca_project(Matrix(3, 2), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeError);
  }
}

TEST(Matrix, RejectsNonFiniteAndZeroDims) {
  try {
    Matrix(1, 2, {1.0, std::nan("")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericError);
  }
  EXPECT_THROW(Matrix(0, 2), Error);
}
