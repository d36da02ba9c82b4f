#include <gtest/gtest.h>

#include <random>

#include "nehari/variational.hpp"
#include "oracles.hpp"

using namespace nehari;

namespace {

Problem staggered_problem(int L = 16, double v = 1.0, double p = 4.0) {
  auto t = build_torus(1, {L}, 2);
  Vector V(L);
  for (int x = 0; x < L; ++x) V[x] = (x % 2 ? -v : v) - 2.0;
  return make_problem(t, V, power_nonlinearity(p, VertexFunction::constant(t, 1.0)));
}

Problem weighted_2d_problem() {
  auto t = build_torus(2, {4, 6}, 2);
  const Vector V = periodic_extension(*t, {-1.0, -7.0, -7.0, -1.0});
  const Vector w = periodic_extension(*t, {1.0, 2.0, 0.5, 1.5});
  return make_problem(t, V, power_nonlinearity(3.0, VertexFunction(t, w)));
}

Problem definite_problem(int L = 8, double p = 4.0) {
  auto t = build_torus(1, {L}, 1);
  return make_problem(t, Vector::Constant(L, 1.0),
                      power_nonlinearity(p, VertexFunction::constant(t, 1.0)));
}

Vector random_sphere_b(const Problem& P, std::mt19937_64& rng) {
  return oracle::gaussian(P.split().dim_plus(), rng).normalized();
}

}  // namespace

TEST(Energy, TwoFormulasAgree) {
  std::mt19937_64 rng(51);
  for (const Problem& P : {staggered_problem(), weighted_2d_problem()}) {
    for (int k = 0; k < 20; ++k) {
      const Vector u = oracle::gaussian(P.size(), rng);
      EXPECT_NEAR(phi(P, u), phi_spectral(P, u), 1e-10 * (1 + std::abs(phi(P, u))));
    }
  }
}

TEST(Energy, KnownConstantSolution) {
  const Problem P = definite_problem();
  const Vector one = Vector::Ones(8);
  EXPECT_LE(pointwise_residual(P, one), 1e-12);
  EXPECT_NEAR(phi(P, one), 2.0, 1e-12);
  const NehariPoint pt = inner_maximize(P, one);
  EXPECT_LE((pt.u - one).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(pt.energy, 2.0, 1e-12);
}

TEST(Gradient, PhiMatchesCentralDifferences) {
  std::mt19937_64 rng(53);
  const Problem P = staggered_problem();
  for (int k = 0; k < 50; ++k) {
    const Vector u = oracle::gaussian(P.size(), rng);
    const Vector g = phi_gradient(P, u);
    const Vector fd = oracle::central_gradient(
        [&](const Vector& x) { return phi(P, x); }, u, 1e-5);
    EXPECT_LE((fd - g).norm(), 1e-5 * g.norm());
  }
}

TEST(Gradient, PsiMatchesCentralDifferences) {
  std::mt19937_64 rng(57);
  for (const Problem& P : {staggered_problem(), weighted_2d_problem()}) {
    for (int k = 0; k < 25; ++k) {
      const Vector b = random_sphere_b(P, rng);
      const PsiEvaluation ev = evaluate_psi(P, b);
      // Psi(b/|b|) is 0-homogeneous; its gradient at |b| = 1 is tangent.
      const Vector fd = oracle::central_gradient(
          [&](const Vector& x) { return evaluate_psi(P, x.normalized()).value; },
          b, 1e-5);
      EXPECT_LE((fd - ev.gradient).norm(), 1e-5 * ev.gradient.norm());
      EXPECT_NEAR(ev.gradient.dot(b), 0.0, 1e-12 * (1 + ev.grad_norm));
    }
  }
}

TEST(Gradient, VertexRepresentativeIsRiesz) {
  std::mt19937_64 rng(59);
  const Problem P = staggered_problem();
  for (int k = 0; k < 10; ++k) {
    const Vector w = from_sphere_coords(P, random_sphere_b(P, rng));
    const Vector G = psi_gradient(P, w);
    Vector d = P.split().plus_part(oracle::gaussian(P.size(), rng));
    d -= P.split().equivalent_inner(d, w) * w;
    const double h = 1e-5;
    auto on_sphere = [&](const Vector& x) {
      return x / P.split().equivalent_norm(x);
    };
    const double fd = (psi(P, on_sphere(w + h * d)) - psi(P, on_sphere(w - h * d))) /
                      (2 * h);
    EXPECT_NEAR(P.split().equivalent_inner(G, d), fd,
                1e-5 * (1 + std::abs(fd)));
  }
}

TEST(Inner, ClosedFormScalingInDefiniteCase) {
  std::mt19937_64 rng(61);
  for (double p : {3.0, 4.0, 6.0}) {
    const Problem P = definite_problem(10, p);
    InnerOptions numeric;
    numeric.use_closed_form = false;
    for (int k = 0; k < 30; ++k) {
      const Vector w = oracle::gaussian(P.size(), rng);
      const double t = std::pow(w.dot(P.op().apply(w)) / std::pow(norm_lp(w, p), p),
                                1.0 / (p - 2.0));
      for (const InnerOptions& o : {InnerOptions{}, numeric}) {
        const NehariPoint pt = inner_maximize(P, w, o);
        EXPECT_LE((pt.u - t * w).norm(), 1e-8 * t * w.norm());
      }
      const double tg = oracle::golden_max(
          [&](double s) { return phi(P, s * w); }, 0.0, 4.0 * t);
      EXPECT_NEAR(tg, t, 1e-6 * t);
    }
  }
}

TEST(Inner, MaximizerIsNehariPoint) {
  std::mt19937_64 rng(67);
  for (const Problem& P : {staggered_problem(), weighted_2d_problem()}) {
    for (int k = 0; k < 20; ++k) {
      const Vector w = oracle::gaussian(P.size(), rng);
      const NehariPoint pt = inner_maximize(P, w);
      const double scale = 1 + P.split().equivalent_norm(pt.u);
      EXPECT_LE(pt.residual.along_u, 1e-8 * scale);
      EXPECT_LE(pt.residual.along_minus, 1e-8 * scale);
      EXPECT_TRUE(in_nehari_manifold(P, pt.u));
      EXPECT_GT(pt.energy, 0.0);
      EXPECT_NEAR(pt.s, P.split().equivalent_norm(P.split().plus_part(pt.u)),
                  1e-12 * (1 + pt.s));
    }
  }
}

TEST(Inner, DependsOnlyOnDirectionOfPlusPart) {
  std::mt19937_64 rng(71);
  const Problem P = staggered_problem();
  for (int k = 0; k < 10; ++k) {
    const Vector w = oracle::gaussian(P.size(), rng);
    const Vector other = 3.7 * P.split().plus_part(w) +
                         P.split().minus_part(oracle::gaussian(P.size(), rng));
    const NehariPoint a = inner_maximize(P, w), b = inner_maximize(P, other);
    EXPECT_LE((a.u - b.u).norm(), 1e-8 * (1 + a.u.norm()));
  }
}

TEST(Inner, MultiStartAgreesWithSingleStart) {
  std::mt19937_64 rng(73);
  const Problem P = weighted_2d_problem();
  InnerOptions single;
  single.multi_start = false;
  for (int k = 0; k < 10; ++k) {
    const Vector w = oracle::gaussian(P.size(), rng);
    EXPECT_LE((inner_maximize(P, w).u - inner_maximize(P, w, single).u).norm(),
              1e-7 * (1 + inner_maximize(P, w).u.norm()));
  }
}

TEST(Inner, GlobalMaximumOnTheHalfSpace) {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> U(0, 1);
  const Problem P = staggered_problem();
  for (int k = 0; k < 5; ++k) {
    const NehariPoint pt = inner_maximize(P, oracle::gaussian(P.size(), rng));
    for (int j = 0; j < 200; ++j) {
      const double s = 3.0 * pt.s * U(rng);
      const Vector v = P.split().minus_part(oracle::gaussian(P.size(), rng)) *
                       (2.0 * U(rng));
      const Vector z = s * pt.direction + v;
      EXPECT_LE(phi(P, z), pt.energy + 1e-12 * pt.energy);
    }
  }
}

TEST(Inner, RejectsDirectionsInMinusSpace) {
  std::mt19937_64 rng(83);
  const Problem P = staggered_problem();
  const Vector wm = P.split().minus_part(oracle::gaussian(P.size(), rng));
  EXPECT_THROW(inner_maximize(P, wm), DomainError);
  EXPECT_THROW(nehari_residual(P, wm), DomainError);
  EXPECT_THROW(psi(P, oracle::gaussian(P.size(), rng)), DomainError);
  EXPECT_THROW(inner_maximize(P, Vector::Ones(3)), DomainError);
}

TEST(Psi, SphereCoordinatesRoundTrip) {
  std::mt19937_64 rng(89);
  const Problem P = weighted_2d_problem();
  EXPECT_GT(P.split().dim_minus(), 0);
  const Vector b = random_sphere_b(P, rng);
  const Vector w = from_sphere_coords(P, b);
  EXPECT_NEAR(P.split().equivalent_norm(w), 1.0, 1e-12);
  EXPECT_LE((sphere_coords(P, w) - b).norm(), 1e-12);
  EXPECT_NEAR(psi(P, w), evaluate_psi(P, b).value, 1e-12);
}

TEST(Psi, BoundedBelowByPositiveConstant) {
  std::mt19937_64 rng(97);
  const Problem P = staggered_problem();
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 200; ++k)
    lo = std::min(lo, evaluate_psi(P, random_sphere_b(P, rng)).value);
  EXPECT_GT(lo, 0.0);
}

TEST(GProfile, EnergyIdentityAndSign) {
  std::mt19937_64 rng(101);
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(-1.0 + 0.1 * i);
  for (const Problem& P : {staggered_problem(), weighted_2d_problem()}) {
    for (int k = 0; k < 5; ++k) {
      const NehariPoint pt = inner_maximize(P, oracle::gaussian(P.size(), rng));
      const Vector v = P.split().minus_part(oracle::gaussian(P.size(), rng));
      const GProfile g = g_profile(P, pt.u, v, grid);
      EXPECT_TRUE(g.pass());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s = grid[i];
        const double lhs = phi(P, (1 + s) * pt.u + v) - phi(P, pt.u);
        EXPECT_NEAR(lhs, -g.half_v_norm2 + g.sum_g[i],
                    1e-9 * (1 + std::abs(lhs)));
      }
      const GProfile g0 = g_profile(P, pt.u, Vector::Zero(P.size()), grid);
      EXPECT_TRUE(g0.pass());
    }
  }
}

TEST(GProfile, RequiresNehariPoint) {
  const Problem P = staggered_problem();
  EXPECT_THROW(g_profile(P, Vector::Ones(P.size()), Vector::Zero(P.size()), {0.5}),
               DomainError);
}
