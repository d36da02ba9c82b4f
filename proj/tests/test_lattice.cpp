#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nehari/lattice.hpp"
#include "oracles.hpp"

using namespace nehari;

TEST(Torus, RejectsBadShapes) {
  EXPECT_THROW(build_torus(1, {10}, 3), ConfigError);
  EXPECT_THROW(build_torus(1, {2}, 1), ConfigError);
  EXPECT_THROW(build_torus(2, {8}, 1), ConfigError);
  EXPECT_THROW(build_torus(0, {}, 1), ConfigError);
  EXPECT_THROW(build_torus(1, {8}, 0), ConfigError);
  EXPECT_NO_THROW(build_torus(2, {6, 9}, 3));
}

TEST(Torus, NeighborTableIsSymmetricAndRegular) {
  for (auto t : {build_torus(1, {5}, 1), build_torus(2, {4, 6}, 2),
                 build_torus(3, {3, 3, 6}, 3)}) {
    EXPECT_EQ(t->degree(), 2u * t->dim());
    for (std::size_t v = 0; v < t->vertex_count(); ++v) {
      const auto nb = t->neighbors(v);
      ASSERT_EQ(nb.size(), t->degree());
      std::set<std::size_t> distinct(nb.begin(), nb.end());
      EXPECT_EQ(distinct.size(), nb.size()) << "side >= 3 gives simple graph";
      for (std::size_t w : nb) {
        const auto back = t->neighbors(w);
        EXPECT_NE(std::find(back.begin(), back.end(), v), back.end());
      }
    }
  }
}

TEST(Torus, CoordsRoundTripRowMajor) {
  auto t = build_torus(2, {4, 6}, 2);
  EXPECT_EQ(t->vertex_count(), 24u);
  for (std::size_t v = 0; v < t->vertex_count(); ++v) {
    const auto c = t->coords(v);
    EXPECT_EQ(static_cast<std::size_t>(c[0] * 6 + c[1]), v);
    EXPECT_EQ(t->index(c), v);
  }
  std::vector<int> wrapped{-1, 7};
  EXPECT_EQ(t->index(wrapped), static_cast<std::size_t>(3 * 6 + 1));
}

TEST(Torus, CellDecomposition) {
  auto t = build_torus(2, {4, 6}, 2);
  EXPECT_EQ(t->cell_vertex_count(), 4u);
  EXPECT_EQ(t->cells_per_axis(), (std::vector<int>{2, 3}));
  EXPECT_EQ(all_period_shifts(*t).size(), 6u);
  for (std::size_t v = 0; v < t->vertex_count(); ++v) {
    const auto c = t->coords(v);
    EXPECT_EQ(t->cell_position(v), static_cast<std::size_t>((c[0] % 2) * 2 + c[1] % 2));
  }
}

TEST(Laplacian, MatchesCoordinateLoops) {
  std::mt19937_64 rng(11);
  auto t1 = build_torus(1, {9}, 1);
  const Vector u1 = oracle::gaussian(9, rng);
  EXPECT_LE((-laplacian(*t1, u1) - oracle::laplacian_1d(u1)).norm(), 1e-13);

  auto t2 = build_torus(2, {4, 6}, 2);
  const Vector u2 = oracle::gaussian(24, rng);
  EXPECT_LE((-laplacian(*t2, u2) - oracle::laplacian_2d(u2, 4, 6)).norm(),
            1e-13);
}

TEST(Laplacian, ConstantsAreHarmonicAndSumIsZero) {
  auto t = build_torus(3, {4, 4, 4}, 2);
  const Vector c = Vector::Constant(64, 2.5);
  EXPECT_LE(laplacian(*t, c).cwiseAbs().maxCoeff(), 1e-14);
  std::mt19937_64 rng(3);
  const Vector u = oracle::gaussian(64, rng);
  EXPECT_NEAR(laplacian(*t, u).sum(), 0.0, 1e-12);
}

TEST(Laplacian, SummationByParts) {
  // sum Gamma(u,v) = -<Delta u, v> and the quadratic form is nonnegative.
  std::mt19937_64 rng(5);
  auto t = build_torus(2, {5, 7}, 1);
  for (int k = 0; k < 20; ++k) {
    const Vector u = oracle::gaussian(35, rng), v = oracle::gaussian(35, rng);
    const double lhs = gradient_form(*t, u, v).sum();
    EXPECT_NEAR(lhs, -laplacian(*t, u).dot(v), 1e-11 * (1 + std::abs(lhs)));
    EXPECT_GE(gradient_form(*t, u, u).sum(), 0.0);
  }
}

TEST(Laplacian, DeltaResponse) {
  auto t = build_torus(2, {4, 4}, 1);
  const VertexFunction d = VertexFunction::delta(t, 5);
  const VertexFunction Ld = laplacian_apply(d);
  EXPECT_DOUBLE_EQ(Ld[5], -4.0);
  for (std::size_t y : t->neighbors(5)) EXPECT_DOUBLE_EQ(Ld[y], 1.0);
  EXPECT_NEAR(Ld.values().sum(), 0.0, 1e-15);
}

TEST(Norms, LpBasics) {
  Vector u(4);
  u << 3, -4, 0, 0;
  EXPECT_DOUBLE_EQ(norm_lp(u, 2), 5.0);
  EXPECT_DOUBLE_EQ(norm_lp(u, 1), 7.0);
  EXPECT_DOUBLE_EQ(norm_lp(u, std::numeric_limits<double>::infinity()), 4.0);
  EXPECT_THROW(norm_lp(u, 0.5), DomainError);
  // No overflow for large entries and exponents.
  Vector big = Vector::Constant(3, 1e200);
  EXPECT_NEAR(norm_lp(big, 8) / (1e200 * std::pow(3.0, 1.0 / 8)), 1.0, 1e-14);
}

TEST(Norms, LpMonotoneInP) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 20; ++k) {
    const Vector u = oracle::gaussian(12, rng);
    double prev = norm_lp(u, 1.0);
    for (double p : {1.5, 2.0, 3.0, 6.0, 20.0}) {
      const double cur = norm_lp(u, p);
      EXPECT_LE(cur, prev * (1 + 1e-14));
      prev = cur;
    }
    EXPECT_GE(prev, norm_lp(u, std::numeric_limits<double>::infinity()) * (1 - 1e-14));
  }
}

TEST(Norms, W12ComparableToL2) {
  std::mt19937_64 rng(19);
  auto t = build_torus(2, {6, 6}, 1);
  for (int k = 0; k < 20; ++k) {
    const Vector u = oracle::gaussian(36, rng);
    const double w = norm_w12(*t, u), l2 = u.norm();
    EXPECT_GE(w, l2 * (1 - 1e-14));
    EXPECT_LE(w, std::sqrt(4.0 * 2 + 1.0) * l2 * (1 + 1e-14));
  }
}

TEST(Translate, ShiftsByPeriodAndComposes) {
  auto t = build_torus(2, {4, 6}, 2);
  std::mt19937_64 rng(23);
  const Vector u = oracle::gaussian(24, rng);
  const std::vector<int> k{1, 2}, l{1, 1}, kl{2, 3}, full{2, 3}, zero{0, 0};
  const Vector tu = translate(*t, u, k);
  for (std::size_t v = 0; v < 24; ++v) {
    auto c = t->coords(v);
    c[0] += 2;
    c[1] += 4;
    EXPECT_EQ(tu[static_cast<Index>(t->index(c))], u[static_cast<Index>(v)]);
  }
  EXPECT_EQ(translate(*t, translate(*t, u, k), l), translate(*t, u, kl));
  EXPECT_EQ(translate(*t, u, full), u);
  EXPECT_EQ(translate(*t, u, zero), u);
  // Isometry for the Dirichlet form.
  EXPECT_NEAR(norm_w12(*t, tu), norm_w12(*t, u), 1e-12);
  EXPECT_THROW(translate(*t, u, std::vector<int>{1}), DomainError);
}

TEST(VertexFunction, Validation) {
  auto t = build_torus(1, {4}, 1);
  EXPECT_THROW(VertexFunction(t, Vector::Zero(3)), DomainError);
  Vector bad = Vector::Zero(4);
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(VertexFunction(t, bad), DomainError);
  auto other = build_torus(1, {5}, 1);
  EXPECT_THROW(inner_w12(VertexFunction::zeros(t), VertexFunction::zeros(other)),
               DomainError);
}
