#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bpdq/error.hpp"
#include "bpdq/linalg.hpp"
#include "bpdq/oracle.hpp"
#include "test_support.hpp"

namespace bpdq {
namespace {

using testing::max_abs_diff;
using testing::random_pd;
using testing::random_tensor;

double relative_factor_error(const Tensor2D& u, const Tensor2D& h) {
  // H (U^T U) should be the identity.
  const std::size_t n = h.rows();
  const Tensor2D utu = matmul(u.transpose(), u);
  const Tensor2D prod = matmul(h, utu);
  return frobenius_norm(prod - Tensor2D::identity(n)) / std::sqrt(static_cast<double>(n));
}

TEST(Hessian, IdentityActivations) {
  const auto hs = hessian_from_activations(Tensor2D::identity(2), 0.01);
  EXPECT_DOUBLE_EQ(hs.damp_lambda, 0.01);
  EXPECT_DOUBLE_EQ(hs.h(0, 0), 1.01);
  EXPECT_DOUBLE_EQ(hs.h(1, 1), 1.01);
  EXPECT_EQ(hs.h(0, 1), 0.0);
  EXPECT_NEAR(hs.u(0, 0), 1.0 / std::sqrt(1.01), 1e-15);
  EXPECT_NEAR(hs.u(1, 1), 1.0 / std::sqrt(1.01), 1e-15);
  EXPECT_EQ(hs.u(0, 1), 0.0);
  EXPECT_EQ(hs.u(1, 0), 0.0);
}

TEST(Hessian, HandComputedProduct) {
  const auto x = Tensor2D::from_rows({{1, 0, 1}, {0, 1, 1}});
  const auto hs = hessian_from_activations(x, 0.01);
  EXPECT_DOUBLE_EQ(hs.damp_lambda, 0.02);
  EXPECT_EQ(hs.h, Tensor2D::from_rows({{2.02, 1}, {1, 2.02}}));
  EXPECT_LT(relative_factor_error(hs.u, hs.h), 1e-12);
}

TEST(Hessian, UndampedRankDeficientIsSingular) {
  const auto x = Tensor2D::from_rows({{1, 2, 3}, {0, 0, 0}});
  try {
    hessian_from_activations(x, 0.0);
    FAIL() << "expected singular Hessian";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingular);
    EXPECT_NE(std::string(e.what()).find("singular Hessian"), std::string::npos);
  }
  const auto dup = Tensor2D::from_rows({{1, 2, 3}, {1, 2, 3}});
  EXPECT_THROW(hessian_from_activations(dup, 0.0), Error);
  EXPECT_NO_THROW(hessian_from_activations(dup, 0.01));
}

TEST(Hessian, StateInvariantsOnRandomActivations) {
  const auto x = random_tensor(24, 200, 5);
  const auto hs = hessian_from_activations(x, 0.01);
  for (std::size_t i = 0; i < 24; ++i) {
    EXPECT_GT(hs.h(i, i), 0.0);
    EXPECT_GT(hs.u(i, i), 0.0);
    for (std::size_t j = 0; j < i; ++j) {
      EXPECT_EQ(hs.u(i, j), 0.0);
      EXPECT_LE(std::abs(hs.h(i, j) - hs.h(j, i)), 1e-12 * std::abs(hs.h(i, j)));
    }
  }
}

TEST(InverseCholesky, IdentityAndDiagonal) {
  EXPECT_EQ(inverse_cholesky_factor(Tensor2D::identity(3)), Tensor2D::identity(3));
  const auto u = inverse_cholesky_factor(Tensor2D::from_rows({{4, 0}, {0, 1}}));
  EXPECT_DOUBLE_EQ(u(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(u(1, 1), 1.0);
  EXPECT_EQ(u(0, 1), 0.0);
}

TEST(InverseCholesky, RandomPdMultiplyBack) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Tensor2D h = random_pd(8, seed);
    const Tensor2D u = inverse_cholesky_factor(h);
    // Reference inverse by Gauss-Jordan, no Cholesky involved.
    Tensor2D aug = h;
    Tensor2D inv = Tensor2D::identity(8);
    for (std::size_t c = 0; c < 8; ++c) {
      const double p = aug(c, c);
      for (std::size_t j = 0; j < 8; ++j) {
        aug(c, j) /= p;
        inv(c, j) /= p;
      }
      for (std::size_t r = 0; r < 8; ++r) {
        if (r == c) continue;
        const double f = aug(r, c);
        for (std::size_t j = 0; j < 8; ++j) {
          aug(r, j) -= f * aug(c, j);
          inv(r, j) -= f * inv(c, j);
        }
      }
    }
    const Tensor2D utu = matmul(u.transpose(), u);
    EXPECT_LE(frobenius_norm(utu - inv), 1e-10 * frobenius_norm(inv)) << "seed " << seed;
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_GT(u(i, i), 0.0);
      for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(u(i, j), 0.0);
    }
  }
}

TEST(InverseCholesky, NonPdThrows) {
  EXPECT_THROW(inverse_cholesky_factor(Tensor2D::from_rows({{1, 2}, {2, 1}})), Error);
}

TEST(SolveUpperTranspose, Examples) {
  const auto rhs = random_tensor(3, 2, 4);
  EXPECT_EQ(solve_upper_transpose(Tensor2D::identity(3), rhs), rhs);

  const auto u = Tensor2D::from_rows({{2, 1}, {0, 1}});
  const auto y = solve_upper_transpose(u, Tensor2D::from_rows({{2}, {1}}));
  EXPECT_EQ(y, Tensor2D::from_rows({{1}, {0}}));
  EXPECT_EQ(matmul(u.transpose(), y), Tensor2D::from_rows({{2}, {1}}));

  const auto s = solve_upper_transpose(Tensor2D::from_rows({{4}}), Tensor2D::from_rows({{3}}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.75);
}

TEST(SolveUpperTranspose, ZeroDiagonalIsSingular) {
  const auto u = Tensor2D::from_rows({{1, 1}, {0, 0}});
  try {
    solve_upper_transpose(u, Tensor2D(2, 1, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingular);
  }
}

TEST(SolveRightUpper, Examples) {
  const auto m = random_tensor(4, 3, 8);
  EXPECT_EQ(solve_right_upper(m, Tensor2D::identity(3)), m);

  const auto u = Tensor2D::from_rows({{2, 1}, {0, 1}});
  const auto de = solve_right_upper(Tensor2D::from_rows({{2, 1}}), u);
  EXPECT_EQ(de, Tensor2D::from_rows({{1, 0}}));
  EXPECT_EQ(matmul(de, u), Tensor2D::from_rows({{2, 1}}));

  EXPECT_EQ(solve_right_upper(Tensor2D(3, 2), u), Tensor2D(3, 2));
  EXPECT_THROW(solve_right_upper(m, Tensor2D::from_rows({{1, 0, 0}, {0, 0, 1}, {0, 0, 1}})), Error);
}

TEST(SolveRightUpper, MultiplyBackOnRandomFactors) {
  const Tensor2D u = testing::random_u_loc(16, 3);
  const Tensor2D m = random_tensor(5, 16, 4);
  EXPECT_LT(max_abs_diff(matmul(solve_right_upper(m, u), u), m), 1e-12);
  const Tensor2D rhs = random_tensor(16, 3, 5);
  EXPECT_LT(max_abs_diff(matmul(u.transpose(), solve_upper_transpose(u, rhs)), rhs), 1e-12);
}

TEST(WlsFit, ExactTwoLevelFit) {
  const std::vector<std::uint8_t> codes{0, 0, 1, 1};
  const std::vector<double> target{1, 1, 3, 3};
  const auto c = wls_fit(make_design(codes, 1), target, Tensor2D::identity(4), 0.0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0], 1.0, 1e-14);
  EXPECT_NEAR(c[1], 2.0, 1e-14);
}

TEST(WlsFit, UniformGridReproduced) {
  const std::vector<std::uint8_t> codes{0, 1, 2, 3};
  const std::vector<double> target{0, 1, 2, 3};
  const auto design = make_design(codes, 2);
  EXPECT_EQ(design, Tensor2D::from_rows({{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}}));
  const auto c = wls_fit(design, target, Tensor2D::identity(4), 0.0);
  EXPECT_NEAR(c[0], 0.0, 1e-14);
  EXPECT_NEAR(c[1], 1.0, 1e-14);
  EXPECT_NEAR(c[2], 2.0, 1e-14);
}

TEST(WlsFit, RankDeficientWithoutDampingThrows) {
  const std::vector<std::uint8_t> codes{0, 0, 0, 0};  // plane all zero
  const std::vector<double> target{1, 2, 3, 4};
  try {
    wls_fit(make_design(codes, 1), target, Tensor2D::identity(4), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingular);
  }
  const auto c = wls_fit(make_design(codes, 1), target, Tensor2D::identity(4), 1e-4);
  EXPECT_NEAR(c[0], 2.5, 1e-4);
  EXPECT_EQ(c[1], 0.0);
}

TEST(WlsFit, MatchesDenseOracleOnRandomInstance) {
  const std::size_t g = 8;
  const Tensor2D u = testing::random_u_loc(g, 17);
  const std::vector<std::uint8_t> codes{0, 1, 2, 3, 1, 2, 0, 3};
  const auto design = make_design(codes, 2);
  const Tensor2D t = random_tensor(1, g, 18);
  for (double alpha : {0.0, 1e-4}) {
    const auto c = wls_fit(design, t.row(0), u, alpha);
    const auto ref = oracle::dense_wls(design, t.row(0), u, alpha);
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_NEAR(c[i], ref[i], 1e-10 * std::max(1.0, std::abs(ref[i])));
    }
  }
}

// Normal-equation residual and local optimality over random instances.
TEST(WlsFit, OptimalityProperties) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t g = 8 + 8 * (seed % 3);
    const int k = 1 + static_cast<int>(seed % 3);
    const Tensor2D u = testing::random_u_loc(g, 1000 + seed);
    SeededNormal rng(2000 + seed);
    std::vector<std::uint8_t> codes(g);
    // Every code appears at least once, so the design has full column rank.
    for (std::size_t j = 0; j < g; ++j) codes[j] = static_cast<std::uint8_t>(j % (1u << k));
    std::mt19937_64 shuffle_rng(seed);
    std::shuffle(codes.begin(), codes.end(), shuffle_rng);
    const auto design = make_design(codes, k);
    std::vector<double> target(g);
    for (auto& v : target) v = rng.normal();

    const auto c = wls_fit(design, target, u, 0.0);
    // D^T (D c - t~) with D = U^-T design.
    const Tensor2D d = solve_upper_transpose(u, design);
    Tensor2D tt(g, 1);
    for (std::size_t j = 0; j < g; ++j) tt(j, 0) = target[j];
    const Tensor2D tw = solve_upper_transpose(u, tt);
    double res = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        double dc = -tw(j, 0);
        for (std::size_t b = 0; b < c.size(); ++b) dc += d(j, b) * c[b];
        acc += d(j, a) * dc;
      }
      res += acc * acc;
    }
    EXPECT_LE(std::sqrt(res), 1e-8) << "seed " << seed;

    const double base = wls_objective(design, target, u, 0.0, c);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(c.size());
      double norm = 0.0;
      for (auto& v : p) {
        v = rng.normal();
        norm += v * v;
      }
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = c[i] + 1e-3 * p[i] / std::sqrt(norm);
      EXPECT_LE(base, wls_objective(design, target, u, 0.0, p));
    }
  }
}

}  // namespace
}  // namespace bpdq
