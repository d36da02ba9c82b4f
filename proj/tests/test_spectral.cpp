#include <gtest/gtest.h>

#include <random>

#include "nehari/bloch.hpp"
#include "nehari/spectral.hpp"
#include "oracles.hpp"

using namespace nehari;

namespace {

void expect_multiset_near(const Vector& got, std::vector<double> want,
                          double tol) {
  ASSERT_EQ(static_cast<std::size_t>(got.size()), want.size());
  std::sort(want.begin(), want.end());
  for (std::size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(got[static_cast<Index>(i)], want[i], tol) << "index " << i;
}

SchrodingerOperator staggered(int L, double v, double shift) {
  auto t = build_torus(1, {L}, 2);
  Vector V(L);
  for (int x = 0; x < L; ++x) V[x] = (x % 2 ? -v : v) + shift;
  return {t, V};
}

/// Random T-periodic potential shifted so that 0 sits in the middle of the
/// widest gap of the resulting spectrum.
SchrodingerOperator random_gap_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  const int kind = pick(rng);
  TorusPtr t = kind == 0   ? build_torus(1, {12}, 2)
               : kind == 1 ? build_torus(1, {12}, 3)
                           : build_torus(2, {4, 6}, 2);
  std::vector<double> cell(t->cell_vertex_count());
  for (double& c : cell) c = U(rng);
  Vector V = periodic_extension(*t, cell);
  const Vector ev = eigendecompose(SchrodingerOperator(t, V)).values;
  Index best = 0;
  for (Index i = 0; i + 1 < ev.size(); ++i)
    if (ev[i + 1] - ev[i] > ev[best + 1] - ev[best]) best = i;
  V.array() -= 0.5 * (ev[best] + ev[best + 1]);
  return {t, V};
}

}  // namespace

TEST(Spectrum, FreeLaplacianMatchesFourier) {
  for (int L : {4, 8, 64}) {
    auto t = build_torus(1, {L}, 1);
    const SchrodingerOperator op(t, Vector::Zero(L));
    expect_multiset_near(eigendecompose(op).values, oracle::cycle_spectrum(L),
                         1e-10);
  }
}

TEST(Spectrum, TwoDimensionalFourierAndRange) {
  auto t = build_torus(2, {6, 8}, 1);
  const SchrodingerOperator op(t, Vector::Constant(48, 0.75));
  const Vector ev = eigendecompose(op).values;
  expect_multiset_near(ev, oracle::torus2_spectrum(6, 8, 0.75), 1e-10);
  const SchrodingerOperator free(t, Vector::Zero(48));
  const Vector ev0 = eigendecompose(free).values;
  EXPECT_GE(ev0.minCoeff(), -1e-10);
  EXPECT_LE(ev0.maxCoeff(), 8.0 + 1e-10);
}

TEST(Spectrum, StaggeredMatchesBlochClosedForm) {
  for (double v : {0.5, 1.0, 2.0}) {
    const auto op = staggered(16, v, -2.0);
    expect_multiset_near(eigendecompose(op).values,
                         oracle::staggered_spectrum(16, v, -2.0), 1e-10);
  }
}

TEST(Spectrum, StaggeredGapAndDimensions) {
  const auto op = staggered(16, 1.0, -2.0);
  const Eigensystem es = eigendecompose(op);
  const GapReport g = check_gap(es);
  EXPECT_TRUE(g.pass);
  EXPECT_EQ(g.dim_minus, 8u);
  EXPECT_EQ(g.dim_plus, 8u);
  EXPECT_NEAR(g.lambda_minus_max, -1.0, 1e-8);
  EXPECT_NEAR(g.lambda_plus_min, 1.0, 1e-8);
  EXPECT_NEAR(g.alpha, std::sqrt(5.0), 1e-8);
  for (Index i = 0; i < es.values.size(); ++i) {
    const double a = std::abs(es.values[i]);
    EXPECT_GE(a, 1.0 - 1e-8);
    EXPECT_LE(a, std::sqrt(5.0) + 1e-8);
  }
}

TEST(Bloch, CommensurateUnionEqualsDenseSpectrum) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> U(-2, 2);
  auto t = build_torus(2, {6, 4}, 2);
  std::vector<double> cell(4);
  for (double& c : cell) c = U(rng);
  const SchrodingerOperator op(t, periodic_extension(*t, cell));
  const Vector dense = eigendecompose(op).values;
  const Vector bloch = commensurate_bloch_eigenvalues(*t, cell);
  ASSERT_EQ(dense.size(), bloch.size());
  EXPECT_LE((dense - bloch).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Bloch, SampledBandsOfStaggeredPotential) {
  const BlochSpectrum bs = bloch_spectrum(1, 2, {1.0 - 2.0, -1.0 - 2.0}, 257);
  ASSERT_EQ(bs.band_min.size(), 2);
  EXPECT_NEAR(bs.band_min[0], -std::sqrt(5.0), 1e-10);
  EXPECT_NEAR(bs.band_max[0], -1.0, 1e-3);
  EXPECT_NEAR(bs.band_min[1], 1.0, 1e-3);
  EXPECT_NEAR(bs.band_max[1], std::sqrt(5.0), 1e-10);
}

TEST(Bloch, HermitianAtEveryQuasimomentum) {
  const std::vector<double> cell{0.3, -1.2, 0.7, 2.0};
  for (double th : {0.0, 0.4, 2.5}) {
    const ComplexMatrix H = bloch_matrix(2, 2, cell, {th, -th});
    EXPECT_LE((H - H.adjoint()).norm(), 1e-14);
  }
}

TEST(Gap, ZeroEigenvalueIsReportedNotThrown) {
  auto t = build_torus(1, {8}, 1);
  const SchrodingerOperator op(t, Vector::Constant(8, -2.0));
  const GapReport g = check_gap(eigendecompose(op));
  EXPECT_FALSE(g.pass);
  EXPECT_EQ(g.offending.size(), 2u);
  EXPECT_NE(g.describe().find("violated"), std::string::npos);
  EXPECT_THROW(spectral_split(op), HypothesisViolation);
}

TEST(Gap, DefiniteCaseHasTrivialMinusSpace) {
  auto t = build_torus(1, {8}, 1);
  const SchrodingerOperator op(t, Vector::Constant(8, 1.0));
  const SpectralSplit s = spectral_split(op);
  EXPECT_EQ(s.dim_minus(), 0);
  EXPECT_EQ(s.dim_plus(), 8);
  EXPECT_TRUE(std::isnan(s.gap().lambda_minus_max));
  EXPECT_GE(s.eigenvalues().minCoeff(), 1.0 - 1e-12);
}

TEST(Operator, RejectsNonPeriodicPotential) {
  auto t = build_torus(1, {8}, 2);
  Vector V = Vector::Ones(8);
  V[3] = 2.0;
  EXPECT_THROW(SchrodingerOperator(t, V), HypothesisViolation);
  EXPECT_THROW(periodic_extension(*t, {1.0, 2.0, 3.0}), ConfigError);
}

TEST(Operator, ApplyMatchesMatrixAndOracle) {
  std::mt19937_64 rng(31);
  auto t = build_torus(1, {10}, 2);
  const Vector V = periodic_extension(*t, {0.5, -1.5});
  const SchrodingerOperator op(t, V);
  const Matrix& A = op.matrix();
  EXPECT_LE((A - A.transpose()).norm(), 0.0);
  const Vector u = oracle::gaussian(10, rng);
  const Vector want = oracle::laplacian_1d(u) + V.cwiseProduct(u);
  EXPECT_LE((op.apply(u) - want).norm(), 1e-13);
  EXPECT_LE((A * u - want).norm(), 1e-13);
}

TEST(Projection, AlgebraOnRandomGapInstances) {
  std::mt19937_64 rng(37);
  for (int k = 0; k < 20; ++k) {
    const SchrodingerOperator op = random_gap_instance(rng);
    const SpectralSplit s = spectral_split(op);
    const Matrix Pp = s.projector_plus(), Pm = s.projector_minus();
    const auto n = s.size();
    EXPECT_LE((Pp + Pm - Matrix::Identity(n, n)).norm(), 1e-10);
    EXPECT_LE((Pp * Pp - Pp).norm(), 1e-10);
    EXPECT_LE((Pm * Pm - Pm).norm(), 1e-10);
    EXPECT_LE((Pp * Pm).norm(), 1e-10);
    // The operator commutes with both projectors.
    EXPECT_LE((op.matrix() * Pp - Pp * op.matrix()).norm(),
              1e-10 * (1 + op.matrix().norm()));
  }
}

TEST(Projection, EquivalentNormIdentities) {
  std::mt19937_64 rng(41);
  for (int k = 0; k < 20; ++k) {
    const SchrodingerOperator op = random_gap_instance(rng);
    const SpectralSplit s = spectral_split(op);
    const Vector u = oracle::gaussian(s.size(), rng);
    const auto [up, um] = s.project(u);
    EXPECT_LE((up + um - u).norm(), 1e-12 * (1 + u.norm()));
    // (Lu, u) = ||u+||^2 - ||u-||^2.
    const auto [p2, m2] = s.equivalent_norm_squared_parts(u);
    EXPECT_NEAR(u.dot(op.apply(u)), p2 - m2, 1e-10 * (1 + p2 + m2));
    EXPECT_NEAR(s.equivalent_inner(up, um), 0.0, 1e-10 * (1 + p2 + m2));
    // Norm equivalence with the W^{1,2} norm.
    const NormEquivalence ne = s.norm_equivalence();
    const double w2 = std::pow(norm_w12(op.torus(), u), 2);
    EXPECT_LE(ne.lower * w2, (p2 + m2) * (1 + 1e-12));
    EXPECT_LE(p2 + m2, ne.upper * w2 * (1 + 1e-12));
  }
}
