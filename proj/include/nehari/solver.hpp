#pragma once

// Outer minimization of the reduced functional Psi on S^+, its gradient
// flow, verification of computed solutions and the multistart search that
// collects geometrically distinct critical points.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/variational.hpp"

namespace nehari {

struct SolveOptions {
  double tol_grad = 1e-8;
  int max_iters = 2000;
  int n_starts = 16;
  std::uint64_t seed = 1;
  /// Initial step of the descent and of the flow integrator.
  double flow_step = 0.5;
  double orbit_tol = 1e-6;
  /// Fold u -> -u into the orbit when f is odd.
  bool sign_orbits = true;
  /// Below this gradient norm a Newton polish on Phi' = 0 is attempted.
  double polish_threshold = 1e-5;
  /// Pointwise residual accepted by verify_solution.
  double residual_tol = 1e-8;
  int threads = 1;
  InnerOptions inner;

  bool operator==(const SolveOptions&) const = default;
};

inline bool operator==(const InnerOptions& a, const InnerOptions& b) {
  return a.tol == b.tol && a.max_iters == b.max_iters &&
         a.multi_start == b.multi_start && a.agreement_tol == b.agreement_tol &&
         a.use_closed_form == b.use_closed_form;
}

struct SphereResult {
  NehariPoint point;
  Vector b;  // sphere coordinates of the limit
  double grad_norm = 0.0;
  int iterations = 0;
  bool polished = false;
  /// Psi at every accepted iterate, strictly decreasing.
  std::vector<double> psi_trace;
};

namespace detail {

inline InnerGuess guess_from(const NehariPoint& p) { return {p.s, p.y}; }

/// Newton on -Delta u + V u - f(u) = 0 from a near-critical Nehari point,
/// mapped back through m^(u+/||u+||). Returns nullopt if the refined point
/// is not an acceptable continuation of the descent.
inline std::optional<PsiEvaluation> polish(const Problem& P,
                                           const PsiEvaluation& ev,
                                           const Vector& b,
                                           const SolveOptions& opts) {
  Vector u = ev.point.u;
  const Matrix& L = P.op().matrix();
  for (int k = 0; k < 40; ++k) {
    const Vector r = phi_gradient(P, u);
    Matrix J = L;
    J.diagonal() -= P.nl().apply_derivative(u);
    const Vector delta = J.partialPivLu().solve(r);
    if (!delta.allFinite()) return std::nullopt;
    u -= delta;
    if (delta.norm() <= 1e-15 * (1.0 + u.norm())) break;
  }
  Vector bp = sphere_coords(P, u);
  const double nb = bp.norm();
  if (!(nb > 0.0)) return std::nullopt;
  bp /= nb;
  if ((bp - b).norm() > 0.1) return std::nullopt;
  try {
    const InnerGuess g = guess_from(ev.point);
    PsiEvaluation out = evaluate_psi(P, bp, opts.inner, &g);
    const double scale = 1.0 + u.cwiseAbs().maxCoeff();
    if ((out.point.u - u).cwiseAbs().maxCoeff() > 1e-6 * scale)
      return std::nullopt;
    if (out.grad_norm > opts.tol_grad) return std::nullopt;
    if (out.value > ev.value + 1e-9 * (1.0 + std::abs(ev.value)))
      return std::nullopt;
    return out;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline Vector normalized(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw DomainError("start direction has no E^+ component");
  return v / n;
}

}  // namespace detail

/// Riemannian gradient descent of Psi on S^+ in sphere coordinates with
/// Barzilai-Borwein trial steps, Armijo backtracking (strict decrease) and
/// the retraction b <- (b - tau g) / ||b - tau g||.
inline SphereResult minimize_sphere_coords(const Problem& P, const Vector& b0,
                                           const SolveOptions& opts = {}) {
  Vector b = detail::normalized(b0);
  PsiEvaluation ev = evaluate_psi(P, b, opts.inner);
  SphereResult res;
  res.psi_trace.push_back(ev.value);
  double tau = opts.flow_step;
  bool polish_allowed = true;
  double polish_at = opts.polish_threshold;

  auto finish = [&](const PsiEvaluation& e, const Vector& bb, bool polished) {
    res.point = e.point;
    res.b = bb;
    res.grad_norm = e.grad_norm;
    res.polished = polished;
    return res;
  };

  for (int it = 0; it < opts.max_iters; ++it) {
    res.iterations = it;
    if (ev.grad_norm <= opts.tol_grad) return finish(ev, b, false);
    if (polish_allowed && ev.grad_norm <= polish_at) {
      if (auto pol = detail::polish(P, ev, b, opts)) {
        const Vector bp = sphere_coords(P, pol->point.direction).normalized();
        return finish(*pol, bp, true);
      }
      polish_at *= 0.01;
    }
    const Vector g = ev.gradient;
    const double g2 = g.squaredNorm();
    const InnerGuess guess = detail::guess_from(ev.point);
    bool accepted = false;
    Vector b_new;
    PsiEvaluation ev_new;
    for (int ls = 0; ls < 60; ++ls) {
      b_new = (b - tau * g).normalized();
      ev_new = evaluate_psi(P, b_new, opts.inner, &guess);
      if (ev_new.value < ev.value &&
          ev_new.value <= ev.value - 1e-4 * tau * g2) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      if (polish_allowed) {
        if (auto pol = detail::polish(P, ev, b, opts)) {
          const Vector bp =
              sphere_coords(P, pol->point.direction).normalized();
          return finish(*pol, bp, true);
        }
      }
      std::ostringstream os;
      os << "minimize_sphere: line search stagnated at iteration " << it
         << " (Psi = " << ev.value << ", |grad| = " << ev.grad_norm << ")";
      throw NonConvergence(os.str());
    }
    // Barzilai-Borwein step for the next trial.
    const Vector sk = b_new - b;
    const Vector yk = ev_new.gradient - g;
    const double sy = sk.dot(yk);
    tau = sy > 0.0 ? std::clamp(sk.squaredNorm() / sy, 1e-8, 1e4) : 2.0 * tau;
    b = std::move(b_new);
    ev = std::move(ev_new);
    res.psi_trace.push_back(ev.value);
  }
  if (ev.grad_norm <= opts.tol_grad) return finish(ev, b, false);
  std::ostringstream os;
  os << "minimize_sphere: " << opts.max_iters
     << " iterations exceeded (Psi = " << ev.value
     << ", |grad| = " << ev.grad_norm << ")";
  throw NonConvergence(os.str());
}

/// Same as minimize_sphere_coords for a vertex-space start w0 in E^+ with
/// ||w0|| = 1.
inline SphereResult minimize_sphere(const Problem& P, const Vector& w0,
                                    const SolveOptions& opts = {}) {
  detail::require_on_sphere(P, w0, "minimize_sphere");
  return minimize_sphere_coords(P, sphere_coords(P, w0), opts);
}

struct FlowSample {
  double t = 0.0;
  double psi = 0.0;
  double grad_norm = 0.0;
  Vector b;
};

struct FlowResult {
  std::vector<FlowSample> trajectory;
  SphereResult limit;
  int rejected_steps = 0;
};

/// Integrates db/dt = -grad Psi(b) on S^+ with an adaptive Heun scheme and
/// retraction, recording every accepted step. Psi strictly decreases along
/// the recorded samples. Ends when |grad Psi| <= tol_grad.
inline FlowResult pseudo_gradient_flow(const Problem& P, const Vector& w0,
                                       const SolveOptions& opts = {},
                                       double local_tol = 1e-4) {
  detail::require_on_sphere(P, w0, "pseudo_gradient_flow");
  Vector b = detail::normalized(sphere_coords(P, w0));
  PsiEvaluation ev = evaluate_psi(P, b, opts.inner);
  FlowResult out;
  auto done = [&](const PsiEvaluation& e, const Vector& bb, bool polished,
                  int steps) {
    out.limit.point = e.point;
    out.limit.b = bb;
    out.limit.grad_norm = e.grad_norm;
    out.limit.iterations = steps;
    out.limit.polished = polished;
    for (const FlowSample& s : out.trajectory)
      out.limit.psi_trace.push_back(s.psi);
    return out;
  };
  if (ev.grad_norm <= opts.tol_grad) return done(ev, b, false, 0);

  double t = 0.0;
  double h = opts.flow_step;
  out.trajectory.push_back({t, ev.value, ev.grad_norm, b});
  double polish_at = opts.polish_threshold;
  for (int step = 0; step < opts.max_iters; ++step) {
    if (ev.grad_norm <= opts.tol_grad) return done(ev, b, false, step);
    if (ev.grad_norm <= polish_at) {
      if (auto pol = detail::polish(P, ev, b, opts)) {
        const Vector bp = sphere_coords(P, pol->point.direction).normalized();
        return done(*pol, bp, true, step);
      }
      polish_at *= 0.01;
    }
    const InnerGuess guess = detail::guess_from(ev.point);
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Vector b1 = (b - h * ev.gradient).normalized();
      const PsiEvaluation ev1 = evaluate_psi(P, b1, opts.inner, &guess);
      Vector g1 = ev1.gradient;
      g1 -= g1.dot(b) * b;  // transport to T_b S^+
      const Vector b2 = (b - 0.5 * h * (ev.gradient + g1)).normalized();
      const double err = (b2 - b1).norm();
      if (err <= local_tol) {
        PsiEvaluation ev2 = evaluate_psi(P, b2, opts.inner, &guess);
        if (ev2.value < ev.value) {
          t += h;
          b = b2;
          ev = std::move(ev2);
          out.trajectory.push_back({t, ev.value, ev.grad_norm, b});
          accepted = true;
          const double grow = err > 0.0 ? std::sqrt(local_tol / err) : 2.0;
          h *= std::clamp(0.9 * grow, 0.5, 2.0);
          break;
        }
      }
      ++out.rejected_steps;
      h *= 0.5;
      if (h < 1e-14) break;
    }
    if (!accepted) {
      if (auto pol = detail::polish(P, ev, b, opts)) {
        const Vector bp = sphere_coords(P, pol->point.direction).normalized();
        return done(*pol, bp, true, step);
      }
      std::ostringstream os;
      os << "pseudo_gradient_flow: step size underflow at t = " << t
         << " (Psi = " << ev.value << ", |grad| = " << ev.grad_norm << ")";
      throw NonConvergence(os.str());
    }
  }
  if (ev.grad_norm <= opts.tol_grad) return done(ev, b, false, opts.max_iters);
  throw NonConvergence("pseudo_gradient_flow: max_iters exceeded (|grad| = " +
                       std::to_string(ev.grad_norm) + ")");
}

// ---------------------------------------------------------------------------
// Orbits under period translations (and sign, for odd f).

struct OrbitComparison {
  bool distinct = true;
  double distance = std::numeric_limits<double>::infinity();
  std::vector<int> shift;
  bool sign_flipped = false;
};

/// min over k (and sign) of ||u1 - (+-) u2(. - kT)|| in the equivalent norm.
inline OrbitComparison orbit_distinct(const Problem& P, const Vector& u1,
                                      const Vector& u2, double orbit_tol,
                                      bool sign_orbits = true) {
  const LatticeTorus& t = P.torus();
  const bool use_sign = sign_orbits && P.nl().odd;
  OrbitComparison out;
  for (const std::vector<int>& k : all_period_shifts(t)) {
    const Vector moved = translate(t, u2, k);
    for (double sign : {1.0, -1.0}) {
      if (sign < 0 && !use_sign) continue;
      const double d = P.split().equivalent_norm(u1 - sign * moved);
      if (d < out.distance) {
        out.distance = d;
        out.shift = k;
        out.sign_flipped = sign < 0;
      }
    }
  }
  out.distinct =
      out.distance > orbit_tol * (1.0 + P.split().equivalent_norm(u1));
  return out;
}

// ---------------------------------------------------------------------------
// Verification of a candidate solution.

struct VerificationReport {
  double residual_pointwise = std::numeric_limits<double>::infinity();
  NehariResidual residual_nehari;
  double energy = 0.0;
  double norm_plus = 0.0;
  double norm_minus = 0.0;
  double c_hat = 0.0;
  bool in_manifold = false;
  bool residual_ok = false;
  bool energy_positive = false;
  /// ||u+|| >= ||u-|| and ||u+|| >= sqrt(2 c_hat).
  bool bound_minus_ok = false;
  bool bound_energy_ok = false;
  /// 0 < F(x,u) < f(x,u) u / 2 at every vertex with u(x) != 0.
  bool sign_audit_ok = false;
  bool pass = false;
};

inline VerificationReport verify_solution(const Problem& P, const Vector& u,
                                          double c_hat, double tol = 1e-8) {
  VerificationReport rep;
  rep.c_hat = c_hat;
  rep.residual_pointwise = pointwise_residual(P, u);
  rep.residual_ok = rep.residual_pointwise <= tol;
  rep.energy = phi(P, u);
  rep.energy_positive = rep.energy > 0.0;
  const auto [p2, m2] = P.split().equivalent_norm_squared_parts(u);
  rep.norm_plus = std::sqrt(p2);
  rep.norm_minus = std::sqrt(m2);
  const double norm = std::sqrt(p2 + m2);
  try {
    rep.residual_nehari = nehari_residual(P, u);
    const double scale = tol * (1.0 + norm);
    rep.in_manifold = rep.residual_nehari.along_u <= scale &&
                      rep.residual_nehari.along_minus <= scale;
  } catch (const DomainError&) {
    rep.in_manifold = false;
  }
  const double slack = 1e-10 * (1.0 + rep.norm_plus);
  rep.bound_minus_ok = rep.norm_plus + slack >= rep.norm_minus;
  rep.bound_energy_ok =
      rep.norm_plus + slack >= std::sqrt(std::max(0.0, 2.0 * c_hat));
  rep.sign_audit_ok = true;
  const Nonlinearity& nl = P.nl();
  for (Index x = 0; x < u.size(); ++x) {
    if (u[x] == 0.0) continue;
    const auto xs = static_cast<std::size_t>(x);
    const double F = nl.primitive(xs, u[x]);
    const double half = 0.5 * nl.value(xs, u[x]) * u[x];
    if (!(F > 0.0 && F <= half * (1.0 + 1e-12))) rep.sign_audit_ok = false;
  }
  rep.pass = rep.residual_ok && rep.in_manifold && rep.energy_positive &&
             rep.bound_minus_ok && rep.bound_energy_ok && rep.sign_audit_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Multistart search.

enum class StartKind { SiteBump, RandomDirection, TwoBump };

inline const char* to_string(StartKind k) {
  switch (k) {
    case StartKind::SiteBump: return "site_bump";
    case StartKind::RandomDirection: return "random";
    case StartKind::TwoBump: return "two_bump";
  }
  return "unknown";
}

struct StartPoint {
  StartKind kind;
  std::vector<std::size_t> sites;
  Vector b;  // unit sphere coordinates
};

/// Deterministic start menu. Starts cycle through a bump at one vertex
/// (projected to E^+), a Gaussian random direction in E^+ and a signed
/// two-bump profile. Site bumps visit the fundamental cell first.
inline std::vector<StartPoint> make_starts(const Problem& P, int n_starts,
                                           std::uint64_t seed) {
  const std::vector<std::size_t> cell = P.torus().cell_vertices();
  const auto n = static_cast<std::size_t>(P.size());
  const Index k = P.split().dim_plus();
  std::vector<StartPoint> out;
  for (int i = 0; i < n_starts; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<std::size_t> site(0, n - 1);
    StartPoint sp;
    sp.kind = static_cast<StartKind>(i % 3);
    Vector w = Vector::Zero(static_cast<Index>(n));
    switch (sp.kind) {
      case StartKind::SiteBump: {
        const std::size_t round = static_cast<std::size_t>(i / 3);
        const std::size_t x = round < cell.size() ? cell[round] : site(rng);
        sp.sites = {x};
        w[static_cast<Index>(x)] = 1.0;
        break;
      }
      case StartKind::RandomDirection:
        break;
      case StartKind::TwoBump: {
        const std::size_t x = site(rng);
        std::size_t y = site(rng);
        if (y == x) y = (x + 1) % n;
        sp.sites = {x, y};
        w[static_cast<Index>(x)] = 1.0;
        w[static_cast<Index>(y)] = (rng() & 1u) ? 1.0 : -1.0;
        break;
      }
    }
    Vector b = sp.kind == StartKind::RandomDirection ? Vector(k)
                                                     : sphere_coords(P, w);
    if (sp.kind == StartKind::RandomDirection || !(b.norm() > 1e-12)) {
      for (Index j = 0; j < k; ++j) b[j] = normal(rng);
    }
    sp.b = b.normalized();
    out.push_back(std::move(sp));
  }
  return out;
}

struct StartDiagnostic {
  int index = 0;
  StartKind kind = StartKind::SiteBump;
  std::vector<std::size_t> sites;
  bool converged = false;
  int iterations = 0;
  bool polished = false;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

struct CriticalPoint {
  NehariPoint point;
  Vector b;
  double grad_norm = 0.0;
  VerificationReport verification;
  std::size_t orbit_class = 0;
  std::vector<int> sources;  // start indices that reached this point
};

struct SolveDiagnostics {
  std::vector<StartDiagnostic> starts;
  int total_iterations = 0;
  int rejected_points = 0;
  /// Smallest distance on S^+ between distinct critical points, including
  /// translates; informational.
  double kappa = std::numeric_limits<double>::quiet_NaN();
};

struct SolveResult {
  std::vector<CriticalPoint> critical_points;
  std::size_t ground_state = 0;
  double c_estimate = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<std::size_t>> orbit_classes;
  SolveDiagnostics diagnostics;

  bool ok() const { return !critical_points.empty(); }
};

/// min over shifts (and sign) of ||w1 - T_k w2|| on S^+ among the pairs
/// that are not the same point.
inline double sphere_orbit_gap(const Problem& P, const Vector& w1,
                               const Vector& w2, bool use_sign) {
  double best = std::numeric_limits<double>::infinity();
  for (const std::vector<int>& k : all_period_shifts(P.torus())) {
    const Vector moved = translate(P.torus(), w2, k);
    for (double sign : {1.0, -1.0}) {
      if (sign < 0 && !use_sign) continue;
      const double d = P.split().equivalent_norm(w1 - sign * moved);
      if (d <= 1e-9) continue;
      best = std::min(best, d);
    }
  }
  return best;
}

inline SolveResult multistart_search(const Problem& P,
                                     const SolveOptions& opts = {}) {
  if (opts.n_starts < 1) throw DomainError("multistart_search: n_starts < 1");
  const std::vector<StartPoint> starts =
      make_starts(P, opts.n_starts, opts.seed);

  struct Outcome {
    std::optional<SphereResult> result;
    std::string message;
  };
  std::vector<Outcome> outcomes(starts.size());
  auto run = [&](std::size_t i) {
    try {
      outcomes[i].result = minimize_sphere_coords(P, starts[i].b, opts);
    } catch (const Error& e) {
      outcomes[i].message = e.what();
    }
  };
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < starts.size();) run(i);
      });
    for (std::thread& th : pool) th.join();
  }

  SolveResult res;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    StartDiagnostic d;
    d.index = static_cast<int>(i);
    d.kind = starts[i].kind;
    d.sites = starts[i].sites;
    d.message = outcomes[i].message;
    if (const auto& r = outcomes[i].result) {
      d.converged = true;
      d.iterations = r->iterations;
      d.polished = r->polished;
      d.energy = r->point.energy;
      d.grad_norm = r->grad_norm;
      res.diagnostics.total_iterations += r->iterations;

      bool merged = false;
      for (CriticalPoint& cp : res.critical_points) {
        const double scale = 1.0 + cp.point.u.cwiseAbs().maxCoeff();
        if ((cp.point.u - r->point.u).cwiseAbs().maxCoeff() <=
            opts.orbit_tol * scale) {
          cp.sources.push_back(static_cast<int>(i));
          merged = true;
          break;
        }
      }
      if (!merged) {
        CriticalPoint cp;
        cp.point = r->point;
        cp.b = r->b;
        cp.grad_norm = r->grad_norm;
        cp.sources = {static_cast<int>(i)};
        res.critical_points.push_back(std::move(cp));
      }
    }
    res.diagnostics.starts.push_back(std::move(d));
  }

  if (res.critical_points.empty()) return res;

  double c_hat = std::numeric_limits<double>::infinity();
  for (const CriticalPoint& cp : res.critical_points)
    c_hat = std::min(c_hat, cp.point.energy);
  std::vector<CriticalPoint> verified;
  for (CriticalPoint& cp : res.critical_points) {
    cp.verification =
        verify_solution(P, cp.point.u, c_hat, opts.residual_tol);
    if (cp.verification.pass)
      verified.push_back(std::move(cp));
    else
      ++res.diagnostics.rejected_points;
  }
  res.critical_points = std::move(verified);
  if (res.critical_points.empty()) return res;

  res.ground_state = 0;
  for (std::size_t i = 0; i < res.critical_points.size(); ++i)
    if (res.critical_points[i].point.energy <
        res.critical_points[res.ground_state].point.energy)
      res.ground_state = i;
  res.c_estimate = res.critical_points[res.ground_state].point.energy;

  for (std::size_t i = 0; i < res.critical_points.size(); ++i) {
    CriticalPoint& cp = res.critical_points[i];
    bool placed = false;
    for (std::size_t c = 0; c < res.orbit_classes.size(); ++c) {
      const CriticalPoint& rep = res.critical_points[res.orbit_classes[c][0]];
      if (!orbit_distinct(P, cp.point.u, rep.point.u, opts.orbit_tol,
                          opts.sign_orbits)
               .distinct) {
        res.orbit_classes[c].push_back(i);
        cp.orbit_class = c;
        placed = true;
        break;
      }
    }
    if (!placed) {
      cp.orbit_class = res.orbit_classes.size();
      res.orbit_classes.push_back({i});
    }
  }

  const bool use_sign = opts.sign_orbits && P.nl().odd;
  double kappa = std::numeric_limits<double>::infinity();
  const auto& cps = res.critical_points;
  for (std::size_t i = 0; i < cps.size(); ++i)
    for (std::size_t j = i; j < cps.size(); ++j)
      kappa = std::min(kappa, sphere_orbit_gap(P, cps[i].point.direction,
                                               cps[j].point.direction, use_sign));
  if (std::isfinite(kappa)) res.diagnostics.kappa = kappa;
  return res;
}

/// Smallest Phi(m^(w)) over n random directions w in S^+; a fresh sample
/// for checking c_estimate against the inf-sup characterization.
inline double minimax_sample(const Problem& P, int n, std::uint64_t seed,
                             const InnerOptions& opts = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double best = std::numeric_limits<double>::infinity();
  const Index k = P.split().dim_plus();
  for (int i = 0; i < n; ++i) {
    Vector b(k);
    for (Index j = 0; j < k; ++j) b[j] = normal(rng);
    best = std::min(best, evaluate_psi(P, b.normalized(), opts).value);
  }
  return best;
}

}  // namespace nehari
