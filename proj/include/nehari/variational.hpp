#pragma once

// Energy functional, generalized Nehari manifold and the reduction to the
// unit sphere of E^+.
//
//   Phi(u)  = 1/2 sum_x (Gamma(u,u) + V u^2) - sum_x F(x,u)
//           = 1/2 (||u+||^2 - ||u-||^2) - sum_x F(x,u)
//   M       = { u not in E^- : Phi'(u)u = 0, Phi'(u)v = 0 for v in E^- }
//   m^(w)   = argmax of Phi over  E^- (+) R_{>=0} w
//   Psi(w)  = Phi(m^(w)) on S^+ = { w in E^+ : ||w|| = 1 }
//
// Points of S^+ are handled in "sphere coordinates": with E^+ eigenpairs
// (lambda_i, q_i), w = sum_i b_i q_i / sqrt(lambda_i), so that the
// equivalent norm of w is the Euclidean norm of b and S^+ is the unit
// sphere of R^{dim E^+}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/spectral.hpp"

namespace nehari {

/// Immutable problem data shared by all solver workers.
class Problem {
 public:
  Problem(SchrodingerOperator op, Nonlinearity nl, double gap_tol = 1e-8)
      : op_(std::move(op)),
        split_(spectral_split(op_, gap_tol)),
        nl_(std::move(nl)) {
    if (split_.dim_plus() == 0)
      throw HypothesisViolation(
          "E^+ = {0}: the operator is negative definite, S^+ is empty");
    sqrt_lambda_plus_ = split_.lambda_plus().cwiseSqrt();
  }

  const LatticeTorus& torus() const { return op_.torus(); }
  const TorusPtr& torus_ptr() const { return op_.torus_ptr(); }
  const SchrodingerOperator& op() const { return op_; }
  const SpectralSplit& split() const { return split_; }
  const Nonlinearity& nl() const { return nl_; }
  Index size() const { return split_.size(); }
  const Vector& sqrt_lambda_plus() const { return sqrt_lambda_plus_; }

 private:
  SchrodingerOperator op_;
  SpectralSplit split_;
  Nonlinearity nl_;
  Vector sqrt_lambda_plus_;
};

inline Problem make_problem(TorusPtr torus, Vector potential, Nonlinearity nl,
                            double gap_tol = 1e-8) {
  return {SchrodingerOperator(std::move(torus), std::move(potential)),
          std::move(nl), gap_tol};
}

/// Phi via the gradient form: 1/2 sum (Gamma(u,u) + V u^2) - sum F.
inline double phi(const Problem& P, const Vector& u) {
  detail::require_size(P.torus(), u, "phi");
  const double quad = gradient_form(P.torus(), u, u).sum() +
                      P.op().potential().cwiseProduct(u).dot(u);
  return 0.5 * quad - P.nl().primitive_sum(u);
}

/// Phi via the spectral splitting: 1/2 (||u+||^2 - ||u-||^2) - sum F.
inline double phi_spectral(const Problem& P, const Vector& u) {
  const auto [plus, minus] = P.split().equivalent_norm_squared_parts(u);
  return 0.5 * (plus - minus) - P.nl().primitive_sum(u);
}

/// l^2 representative of Phi'(u): (-Delta u + V u - f(., u)).
inline Vector phi_gradient(const Problem& P, const Vector& u) {
  detail::require_size(P.torus(), u, "phi_gradient");
  return P.op().apply(u) - P.nl().apply(u);
}

inline double pointwise_residual(const Problem& P, const Vector& u) {
  return phi_gradient(P, u).cwiseAbs().maxCoeff();
}

struct NehariResidual {
  /// |Phi'(u) u|
  double along_u = 0.0;
  /// max_j |Phi'(u) e_j^-| over the orthonormal E^- eigenbasis.
  double along_minus = 0.0;
};

inline NehariResidual nehari_residual(const Problem& P, const Vector& u,
                                      double tol = 1e-10) {
  const auto [plus2, minus2] = P.split().equivalent_norm_squared_parts(u);
  const double norm = std::sqrt(plus2 + minus2);
  if (std::sqrt(plus2) <= tol * (1.0 + norm))
    throw DomainError("nehari_residual: u lies in E^- (||u+|| = " +
                      std::to_string(std::sqrt(plus2)) + ")");
  const Vector r = phi_gradient(P, u);
  NehariResidual res;
  res.along_u = std::abs(r.dot(u));
  if (P.split().dim_minus() > 0)
    res.along_minus =
        (P.split().basis_minus().transpose() * r).cwiseAbs().maxCoeff();
  return res;
}

inline bool in_nehari_manifold(const Problem& P, const Vector& u,
                               double tol = 1e-8) {
  const NehariResidual res = nehari_residual(P, u, tol);
  const double scale = tol * (1.0 + P.split().equivalent_norm(u));
  return res.along_u <= scale && res.along_minus <= scale;
}

// ---------------------------------------------------------------------------
// Inner maximization over E^(w) = E^- (+) R_{>=0} w.

struct InnerOptions {
  /// First-order conditions are met when the E^(w)-restricted gradient is
  /// below tol * (1 + |Phi|).
  double tol = 1e-10;
  int max_iters = 500;
  /// Solve from several initial s and require agreement.
  bool multi_start = true;
  double agreement_tol = 1e-6;
  /// Use s^{k-2} = 1 / (k sum F(x, w)) when E^- = {0} and F is
  /// k-homogeneous.
  bool use_closed_form = true;
};

/// m^(w) = s * w_hat + v_minus with w_hat = w+ / ||w+||.
struct NehariPoint {
  Vector u;
  Vector direction;  // w_hat, unit in the equivalent norm
  double s = 0.0;    // = ||u+||
  Vector y;          // coefficients of v_minus in the E^- eigenbasis
  Vector v_minus;
  double energy = 0.0;
  NehariResidual residual;
  int iterations = 0;

  double norm_plus() const { return s; }
};

struct InnerGuess {
  double s = 0.0;
  Vector y;
};

namespace detail {

class InnerSolver {
 public:
  InnerSolver(const Problem& P, Vector w_hat, const InnerOptions& opts)
      : P_(P),
        w_hat_(std::move(w_hat)),
        B_(P.split().basis_minus()),
        lam_(P.split().lambda_minus().cwiseAbs()),
        opts_(opts) {}

  Index m() const { return B_.cols(); }

  Vector point(double s, const Vector& y) const {
    Vector u = s * w_hat_;
    if (m() > 0) u.noalias() += B_ * y;
    return u;
  }

  /// h(s,y) = Phi(s w_hat + B y) = s^2/2 - 1/2 sum |lambda_j| y_j^2 - sum F.
  double h(double s, const Vector& y) const {
    const double q = m() > 0 ? lam_.cwiseProduct(y).dot(y) : 0.0;
    return 0.5 * s * s - 0.5 * q - P_.nl().primitive_sum(point(s, y));
  }

  /// Maximizes h(s, .) over E^- (strictly concave when f' >= 0) by damped
  /// Newton. Returns the number of iterations.
  int solve_y(double s, Vector& y) const {
    if (m() == 0) return 0;
    const Nonlinearity& nl = P_.nl();
    for (int it = 0; it < opts_.max_iters; ++it) {
      const Vector u = point(s, y);
      const Vector fu = nl.apply(u);
      const Vector g = -lam_.cwiseProduct(y) - B_.transpose() * fu;
      const double hval = h(s, y);
      if (g.norm() <= 0.1 * opts_.tol * (1.0 + std::abs(hval))) return it;

      const Vector D = nl.apply_derivative(u);
      Matrix negH = B_.transpose() * D.asDiagonal() * B_;
      negH.diagonal() += lam_;
      Eigen::LLT<Matrix> llt(negH);
      Vector d;
      bool newton = llt.info() == Eigen::Success;
      if (newton) {
        d = llt.solve(g);
      } else {
        d = g.cwiseQuotient(lam_);
      }
      const double slope = g.dot(d);
      double t = 1.0;
      if (newton && 0.5 * slope <= 1e-13 * (1.0 + std::abs(hval))) {
        y += d;  // increase below round-off: take the full Newton step
        continue;
      }
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Vector y_try = y + t * d;
        if (h(s, y_try) >= hval + 1e-4 * t * slope) {
          y = y_try;
          accepted = true;
          break;
        }
      }
      if (!accepted) return it;
    }
    return opts_.max_iters;
  }

  struct Derivs {
    double value;
    double d1;  // phi'(s) = dh/ds at y*(s)
    double d2;  // phi''(s) by implicit differentiation
    double grad_y;
  };

  Derivs derivatives(double s, const Vector& y) const {
    const Nonlinearity& nl = P_.nl();
    const Vector u = point(s, y);
    const Vector fu = nl.apply(u);
    const Vector D = nl.apply_derivative(u);
    Derivs out{};
    out.value = h(s, y);
    out.d1 = s - w_hat_.dot(fu);
    const Vector Dw = D.cwiseProduct(w_hat_);
    out.d2 = 1.0 - w_hat_.dot(Dw);
    if (m() > 0) {
      const Vector g = -lam_.cwiseProduct(y) - B_.transpose() * fu;
      out.grad_y = g.norm();
      Matrix negH = B_.transpose() * D.asDiagonal() * B_;
      negH.diagonal() += lam_;
      const Vector c = B_.transpose() * Dw;
      Eigen::LDLT<Matrix> ldlt(negH);
      out.d2 += c.dot(ldlt.solve(c));
    } else {
      out.grad_y = 0.0;
    }
    return out;
  }

  /// Smallest R = 2^k with h(R, y*(R)) < 0.
  double bracket_radius() const {
    double s = 1.0;
    Vector y = Vector::Zero(m());
    for (int k = 0; k < 200; ++k) {
      solve_y(s, y);
      if (h(s, y) < 0.0) return s;
      s *= 2.0;
    }
    throw NonConvergence(
        "inner_maximize: Phi stays positive along the ray; no bracket radius "
        "found (hypothesis audit recommended)");
  }

  struct Solution {
    double s;
    Vector y;
    int iterations;
    Derivs derivs;
  };

  /// Safeguarded Newton on phi'(s) = 0 inside (0, R).
  Solution solve_s(double s0, Vector y, double R) const {
    double lo = 0.0, hi = R;
    double s = std::clamp(s0, 1e-3 * R, R * (1.0 - 1e-12));
    int iters = 0;
    Derivs d{};
    for (int it = 0; it < opts_.max_iters; ++it) {
      iters += 1 + solve_y(s, y);
      d = derivatives(s, y);
      const double tol = opts_.tol * (1.0 + std::abs(d.value));
      if (std::abs(d.d1) <= tol && d.d2 < 0.0 && d.grad_y <= tol)
        return {s, y, iters, d};
      if (d.d1 > 0.0)
        lo = s;
      else
        hi = s;
      double next = (d.d2 < 0.0) ? s - d.d1 / d.d2 : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
        if (d.d2 < 0.0 && std::abs(d.d1) <= 1e3 * tol)
          return {s, y, iters, d};
        break;
      }
      s = next;
    }
    std::ostringstream os;
    os << "inner_maximize: no convergence after " << iters
       << " iterations (s = " << s << ", dPhi/ds = " << d.d1
       << ", |grad_E-| = " << d.grad_y << ")";
    throw NonConvergence(os.str());
  }

 private:
  const Problem& P_;
  Vector w_hat_;
  Matrix B_;
  Vector lam_;
  InnerOptions opts_;
};

}  // namespace detail

/// w+ / ||w+|| in the equivalent norm; throws when w lies in E^-.
inline Vector unit_plus_direction(const Problem& P, const Vector& w) {
  detail::require_size(P.torus(), w, "inner_maximize");
  const Vector wp = P.split().plus_part(w);
  const double nrm = P.split().equivalent_norm(wp);
  const double full = P.split().equivalent_norm(w);
  if (!(nrm > 1e-12 * (1.0 + full)))
    throw DomainError("inner_maximize: w has no E^+ component");
  return wp / nrm;
}

inline NehariPoint finish_point(const Problem& P, Vector w_hat, double s,
                                Vector y, int iterations) {
  NehariPoint pt;
  pt.direction = std::move(w_hat);
  pt.s = s;
  pt.y = std::move(y);
  pt.v_minus = P.split().dim_minus() > 0
                   ? Vector(P.split().basis_minus() * pt.y)
                   : Vector::Zero(P.size());
  pt.u = s * pt.direction + pt.v_minus;
  pt.energy = phi(P, pt.u);
  pt.residual = nehari_residual(P, pt.u);
  pt.iterations = iterations;
  if (!(pt.energy > 0.0))
    throw NumericalError(
        "inner_maximize: maximum of Phi on E^(w) is not positive (Phi = " +
        std::to_string(pt.energy) + "); hypothesis audit recommended");
  return pt;
}

/// m^(w): the unique maximizer of Phi on E^- (+) R_{>=0} w.
inline NehariPoint inner_maximize(const Problem& P, const Vector& w,
                                  const InnerOptions& opts = {},
                                  const InnerGuess* guess = nullptr) {
  Vector w_hat = unit_plus_direction(P, w);
  detail::InnerSolver solver(P, w_hat, opts);
  const Index m = solver.m();

  if (m == 0 && opts.use_closed_form && P.nl().homogeneity) {
    const double k = *P.nl().homogeneity;
    const double S = k * P.nl().primitive_sum(w_hat);
    const double s = std::pow(S, -1.0 / (k - 2.0));
    if (std::isfinite(s) && s > 0.0)
      return finish_point(P, std::move(w_hat), s, Vector::Zero(0), 0);
  }

  const double R = solver.bracket_radius();
  std::vector<detail::InnerSolver::Solution> sols;
  if (guess && guess->s > 0.0 && guess->y.size() == m)
    sols.push_back(solver.solve_s(guess->s, guess->y, R));
  if (opts.multi_start || sols.empty()) {
    sols.push_back(solver.solve_s(0.5 * R, Vector::Zero(m), R));
    if (opts.multi_start)
      sols.push_back(solver.solve_s(1e-3 * R, Vector::Zero(m), R));
  }

  int iters = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    iters += sols[i].iterations;
    if (sols[i].derivs.value > sols[best].derivs.value) best = i;
  }
  const auto& lam = P.split().lambda_minus();
  for (const auto& sol : sols) {
    double d2 = (sol.s - sols[best].s) * (sol.s - sols[best].s);
    if (m > 0)
      d2 += lam.cwiseAbs().dot((sol.y - sols[best].y).cwiseAbs2());
    if (std::sqrt(d2) > opts.agreement_tol * (1.0 + sols[best].s)) {
      std::ostringstream os;
      os << "inner_maximize: uniqueness audit failed, starts disagree by "
         << std::sqrt(d2) << " (s = " << sol.s << " vs " << sols[best].s
         << ")";
      throw NumericalError(os.str());
    }
  }
  const double s = sols[best].s;
  if (s <= 1e-10 * R)
    throw NumericalError(
        "inner_maximize: s collapsed to 0; hypothesis audit recommended");
  return finish_point(P, std::move(w_hat), s, sols[best].y, iters);
}

inline NehariPoint inner_maximize(const Problem& P, const VertexFunction& w,
                                  const InnerOptions& opts = {}) {
  return inner_maximize(P, w.values(), opts);
}

// ---------------------------------------------------------------------------
// Sphere coordinates and the reduced functional.

/// b = sqrt(lambda+) * (Q+^T w).
inline Vector sphere_coords(const Problem& P, const Vector& w) {
  return P.sqrt_lambda_plus().cwiseProduct(P.split().basis_plus().transpose() *
                                           w);
}

inline Vector from_sphere_coords(const Problem& P, const Vector& b) {
  return P.split().basis_plus() * b.cwiseQuotient(P.sqrt_lambda_plus());
}

/// Reduced functional and its Riemannian gradient at a sphere point.
struct PsiEvaluation {
  NehariPoint point;
  Vector gradient;  // tangent, sphere coordinates
  double value = 0.0;
  double grad_norm = 0.0;
};

/// Psi(b) and grad Psi(b). The Euclidean gradient in sphere coordinates is
/// ||m^(w)+|| * (Q+^T r) / sqrt(lambda+) with r the l^2 gradient of Phi at
/// m^(w); projecting onto b^perp gives the Riemannian gradient.
inline PsiEvaluation evaluate_psi(const Problem& P, const Vector& b,
                                  const InnerOptions& opts = {},
                                  const InnerGuess* guess = nullptr) {
  PsiEvaluation ev;
  ev.point = inner_maximize(P, from_sphere_coords(P, b), opts, guess);
  ev.value = ev.point.energy;
  const Vector r = phi_gradient(P, ev.point.u);
  Vector G = ev.point.s * (P.split().basis_plus().transpose() * r)
                              .cwiseQuotient(P.sqrt_lambda_plus());
  const double bb = b.squaredNorm();
  G -= (G.dot(b) / bb) * b;
  ev.gradient = std::move(G);
  ev.grad_norm = ev.gradient.norm();
  return ev;
}

namespace detail {

inline void require_on_sphere(const Problem& P, const Vector& w,
                              const char* what, double tol = 1e-8) {
  require_size(P.torus(), w, what);
  const auto [plus2, minus2] = P.split().equivalent_norm_squared_parts(w);
  if (std::sqrt(minus2) > tol || std::abs(std::sqrt(plus2) - 1.0) > tol) {
    std::ostringstream os;
    os << what << ": w must lie on S^+ (||w+|| = " << std::sqrt(plus2)
       << ", ||w-|| = " << std::sqrt(minus2) << ")";
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// Psi(w) = Phi(m^(w)) for w on the unit sphere of E^+.
inline double psi(const Problem& P, const Vector& w,
                  const InnerOptions& opts = {}) {
  detail::require_on_sphere(P, w, "psi");
  return inner_maximize(P, w, opts).energy;
}

/// Riesz representative (equivalent inner product) of Psi'(w) restricted to
/// the tangent space T_w S^+, as a vertex function.
inline Vector psi_gradient(const Problem& P, const Vector& w,
                           const InnerOptions& opts = {}) {
  detail::require_on_sphere(P, w, "psi_gradient");
  const PsiEvaluation ev = evaluate_psi(P, sphere_coords(P, w), opts);
  return from_sphere_coords(P, ev.gradient);
}

// ---------------------------------------------------------------------------
// Diagnostic profile of Phi(u + s u + v) - Phi(u) at a Nehari point.

struct GProfile {
  std::vector<double> s;
  /// sum_x g(s)(x) for each grid value.
  std::vector<double> sum_g;
  /// Pointwise g(-1) = -f(u)u/2 + F(u) - F(v).
  Vector g_minus_one;
  /// 1/2 ||v||^2 in the equivalent norm.
  double half_v_norm2 = 0.0;
  bool sum_negative = true;
  bool g_minus_one_nonpositive = true;
  bool pass() const { return sum_negative && g_minus_one_nonpositive; }
};

/// g(s)(x) = f(x,u)(1/2 (s^2+2s) u + (1+s) v) + F(x,u) - F(x,z(s)),
/// z(s) = (1+s) u + v. Requires u in M and v in E^-.
inline GProfile g_profile(const Problem& P, const Vector& u, const Vector& v,
                          const std::vector<double>& s_grid,
                          double membership_tol = 1e-8) {
  if (!in_nehari_manifold(P, u, membership_tol))
    throw DomainError("g_profile: u is not on the Nehari manifold");
  const double vnorm = P.split().equivalent_norm(v);
  if (P.split().equivalent_norm(P.split().plus_part(v)) >
      1e-8 * (1.0 + vnorm))
    throw DomainError("g_profile: v must lie in E^-");

  const Nonlinearity& nl = P.nl();
  const Index n = u.size();
  const Vector fu = nl.apply(u);
  GProfile out;
  out.half_v_norm2 = 0.5 * vnorm * vnorm;
  const bool v_zero = v.cwiseAbs().maxCoeff() == 0.0;
  for (double s : s_grid) {
    double acc = 0.0;
    for (Index x = 0; x < n; ++x) {
      const auto xs = static_cast<std::size_t>(x);
      const double z = (1.0 + s) * u[x] + v[x];
      acc += fu[x] * (0.5 * (s * s + 2.0 * s) * u[x] + (1.0 + s) * v[x]) +
             nl.primitive(xs, u[x]) - nl.primitive(xs, z);
    }
    out.s.push_back(s);
    out.sum_g.push_back(acc);
    if (!(s == 0.0 && v_zero) && !(acc < 0.0)) out.sum_negative = false;
  }
  out.g_minus_one.resize(n);
  for (Index x = 0; x < n; ++x) {
    const auto xs = static_cast<std::size_t>(x);
    const double g = -0.5 * fu[x] * u[x] + nl.primitive(xs, u[x]) -
                     nl.primitive(xs, v[x]);
    out.g_minus_one[x] = g;
    const double scale = std::abs(fu[x] * u[x]) + std::abs(nl.primitive(xs, v[x]));
    if (g > 1e-14 * scale) out.g_minus_one_nonpositive = false;
  }
  return out;
}

}  // namespace nehari
