#pragma once

// Sampled audits of the standing hypotheses on the nonlinearity:
//
//   growth        |f(x,u)| <= a (|u| + |u|^{p-1})
//   small_o       f(x,u) = o(u) as u -> 0, uniformly in x
//   superquadratic F(x,u)/u^2 -> infinity as |u| -> infinity
//   monotone      u -> f(x,u)/|u| strictly increasing on each half-line
//   sign          0 < F(x,u) < f(x,u) u / 2 for u != 0
//
// plus the primitive consistency check and the constant C_eps with
// |f(x,u)| <= eps |u| + C_eps |u|^{p-1}. Every audit is a certificate over a
// finite grid; nothing here is a proof.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/nonlinearity.hpp"

namespace nehari {

struct AuditGrid {
  double u_min = 1e-8;
  double u_max = 1e4;
  int points_per_sign = 512;

  /// Logarithmic magnitudes in [u_min, u_max], ascending.
  std::vector<double> magnitudes() const {
    std::vector<double> out(points_per_sign);
    const double lo = std::log(u_min), hi = std::log(u_max);
    for (int k = 0; k < points_per_sign; ++k) {
      const double t =
          points_per_sign == 1 ? 0.0 : static_cast<double>(k) / (points_per_sign - 1);
      out[k] = std::exp(lo + t * (hi - lo));
    }
    out.front() = u_min;
    out.back() = u_max;
    return out;
  }

  /// Signed sample points, ascending, excluding 0.
  std::vector<double> points() const {
    const std::vector<double> m = magnitudes();
    std::vector<double> out;
    out.reserve(2 * m.size());
    for (auto it = m.rbegin(); it != m.rend(); ++it) out.push_back(-*it);
    out.insert(out.end(), m.begin(), m.end());
    return out;
  }
};

struct AuditWitness {
  std::size_t site = 0;
  double u = 0.0;
  double value = 0.0;
  std::string note;
};

struct AuditReport {
  std::string hypothesis;
  bool pass = false;
  /// Audit-specific figure of merit (documented per audit).
  double margin = 0.0;
  std::optional<AuditWitness> witness;
  std::string detail;
  std::size_t samples = 0;
};

namespace detail {

inline double safe_ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace detail

/// margin = worst |f| / (a(|u| + |u|^{p-1})); pass iff <= 1 (+ round-off).
inline AuditReport verify_growth(const Nonlinearity& nl,
                                 const AuditGrid& grid = {}) {
  AuditReport r;
  r.hypothesis = "growth";
  r.margin = 0.0;
  const std::vector<double> pts = grid.points();
  for (std::size_t x : nl.audit_sites) {
    for (double u : pts) {
      const double fu = nl.value(x, u);
      const double bound = nl.a * (std::abs(u) + std::pow(std::abs(u), nl.p - 1.0));
      double ratio = detail::safe_ratio(std::abs(fu), bound);
      if (!std::isfinite(fu) || std::isnan(ratio))
        ratio = std::numeric_limits<double>::infinity();
      ++r.samples;
      if (!r.witness || ratio > r.margin) {
        r.margin = ratio;
        r.witness = AuditWitness{x, u, fu, "worst |f| / (a(|u|+|u|^{p-1}))"};
      }
    }
  }
  r.pass = r.margin <= 1.0 + 1e-12;
  std::ostringstream os;
  os << "a = " << nl.a << ", p = " << nl.p << ", worst ratio " << r.margin;
  r.detail = os.str();
  return r;
}

/// Samples sup_x |f(x,+-u)/u| at u = 2^{-j}, j = 0..j_max. Passes when the
/// ratio at the finest level is below tol, or the tail still decays with
/// log-log slope >= min_slope. margin = ratio at the finest level.
inline AuditReport verify_small_o(const Nonlinearity& nl, double tol = 1e-6,
                                  int j_max = 60, double min_slope = 0.05) {
  AuditReport r;
  r.hypothesis = "small_o";
  std::vector<double> ratios(j_max + 1, 0.0);
  std::vector<std::size_t> arg_site(j_max + 1, 0);
  for (int j = 0; j <= j_max; ++j) {
    const double u = std::ldexp(1.0, -j);
    for (std::size_t x : nl.audit_sites) {
      for (double s : {u, -u}) {
        const double q = std::abs(nl.value(x, s) / s);
        ++r.samples;
        if (!(q <= ratios[j])) {
          ratios[j] = q;
          arg_site[j] = x;
        }
      }
    }
  }
  const double finest = ratios[j_max];
  const int window = std::min(10, j_max);
  double slope = std::numeric_limits<double>::infinity();
  if (finest > 0.0 && ratios[j_max - window] > 0.0)
    slope = (std::log(ratios[j_max - window]) - std::log(finest)) /
            (window * std::log(2.0));
  r.margin = finest;
  r.pass = std::isfinite(finest) && (finest <= tol || slope >= min_slope);
  const double u_finest = std::ldexp(1.0, -j_max);
  r.witness = AuditWitness{arg_site[j_max], u_finest, finest,
                           "sup_x |f(x,u)/u| at the smallest sampled u"};
  std::ostringstream os;
  os << "ratio " << finest << " at u = " << u_finest << ", tail slope "
     << slope << " (tol " << tol << ", min slope " << min_slope << ")";
  r.detail = os.str();
  return r;
}

/// F(x,u)/u^2 on the doubling grid u = +-2^k, k = 0..ceil(log2 U_max). The
/// tail (upper half) must be strictly increasing, grow by min_growth over the
/// whole grid and end above min_value. margin = smallest final value.
inline AuditReport verify_superquadratic(const Nonlinearity& nl,
                                         double u_max = 1e4,
                                         double min_growth = 2.0,
                                         double min_value = 1.0) {
  AuditReport r;
  r.hypothesis = "superquadratic";
  const int k_max = static_cast<int>(std::ceil(std::log2(u_max)));
  r.margin = std::numeric_limits<double>::infinity();
  r.pass = true;
  for (std::size_t x : nl.audit_sites) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> q(k_max + 1);
      for (int k = 0; k <= k_max; ++k) {
        const double u = sign * std::ldexp(1.0, k);
        q[k] = nl.primitive(x, u) / (u * u);
        ++r.samples;
      }
      bool ok = std::all_of(q.begin(), q.end(), [](double v) { return std::isfinite(v); });
      int bad_k = -1;
      for (int k = k_max / 2; ok && k < k_max; ++k) {
        if (!(q[k + 1] > q[k])) {
          ok = false;
          bad_k = k + 1;
        }
      }
      const double growth = q[0] > 0.0 ? q[k_max] / q[0] : 0.0;
      if (ok && !(growth >= min_growth && q[k_max] >= min_value)) {
        ok = false;
        bad_k = k_max;
      }
      if (q[k_max] < r.margin || std::isnan(q[k_max])) r.margin = q[k_max];
      if (!ok && r.pass) {
        r.pass = false;
        const int k = bad_k < 0 ? k_max : bad_k;
        r.witness = AuditWitness{x, sign * std::ldexp(1.0, k), q[k],
                                 "F/u^2 plateau or insufficient growth"};
      }
    }
  }
  std::ostringstream os;
  os << "F/u^2 at |u| = 2^" << k_max << ": min " << r.margin
     << " (min growth " << min_growth << ", min value " << min_value << ")";
  r.detail = os.str();
  return r;
}

/// u -> f(x,u)/|u| on each half-line of the grid. A pair decreasing by more
/// than margin * scale fails; the map must also rise by more than
/// margin * scale across each half-line, which rejects plateaus. Pairs whose
/// increment is below round-off are tolerated. margin = smallest relative
/// increment over all pairs.
inline AuditReport verify_monotone(const Nonlinearity& nl,
                                   const AuditGrid& grid = {},
                                   double strictness = 1e-12) {
  AuditReport r;
  r.hypothesis = "monotone";
  r.pass = true;
  r.margin = std::numeric_limits<double>::infinity();
  std::size_t unresolved = 0;
  const std::vector<double> mags = grid.magnitudes();
  for (std::size_t x : nl.audit_sites) {
    for (double sign : {-1.0, 1.0}) {
      std::vector<double> us;
      if (sign < 0)
        for (auto it = mags.rbegin(); it != mags.rend(); ++it) us.push_back(-*it);
      else
        us = mags;
      std::vector<double> q(us.size());
      for (std::size_t k = 0; k < us.size(); ++k) {
        q[k] = nl.value(x, us[k]) / std::abs(us[k]);
        ++r.samples;
      }
      double qmax = 0.0;
      for (double v : q) qmax = std::max(qmax, std::abs(v));
      for (std::size_t k = 0; k + 1 < q.size(); ++k) {
        const double scale = std::max({std::abs(q[k]), std::abs(q[k + 1]),
                                       std::numeric_limits<double>::min()});
        const double rel = (q[k + 1] - q[k]) / scale;
        r.margin = std::min(r.margin, rel);
        if (std::abs(rel) <= strictness) ++unresolved;
        if (!(rel >= -strictness) && r.pass) {
          r.pass = false;
          r.witness = AuditWitness{x, us[k + 1], q[k + 1],
                                   "f/|u| decreases between consecutive samples"};
        }
      }
      if (r.pass && !(q.back() - q.front() > strictness * std::max(qmax, 1e-300))) {
        r.pass = false;
        r.witness = AuditWitness{x, us.back(), q.back(),
                                 "f/|u| is flat across the half-line"};
      }
    }
  }
  std::ostringstream os;
  os << "smallest relative increment " << r.margin << ", " << unresolved
     << " pair(s) below round-off (strictness " << strictness << ")";
  r.detail = os.str();
  return r;
}

/// 0 < F(x,u) < f(x,u) u / 2 for u != 0. margin = min (fu/2 - F)/|fu/2|;
/// the strict upper inequality is accepted down to -rel_tol (round-off).
inline AuditReport verify_sign_condition(const Nonlinearity& nl,
                                         const AuditGrid& grid = {},
                                         double rel_tol = 1e-12) {
  AuditReport r;
  r.hypothesis = "sign_condition";
  r.pass = true;
  r.margin = std::numeric_limits<double>::infinity();
  for (std::size_t x : nl.audit_sites) {
    for (double u : grid.points()) {
      const double F = nl.primitive(x, u);
      const double half = 0.5 * nl.value(x, u) * u;
      ++r.samples;
      const double rel = detail::safe_ratio(half - F, std::abs(half));
      r.margin = std::min(r.margin, rel);
      const bool ok = F > 0.0 && half > 0.0 && rel > -rel_tol;
      if (!ok && r.pass) {
        r.pass = false;
        r.witness = AuditWitness{x, u, F, F > 0.0 ? "F >= f u / 2" : "F <= 0"};
      }
    }
  }
  std::ostringstream os;
  os << "min relative gap (fu/2 - F)/|fu/2| = " << r.margin;
  r.detail = os.str();
  return r;
}

/// |F(x,u) - int_0^u f(x,s) ds| <= tol * max(1, |F|) at every stride-th grid
/// point. margin = worst relative error.
inline AuditReport verify_antiderivative(const Nonlinearity& nl,
                                         const AuditGrid& grid = {},
                                         double tol = 1e-8, int stride = 8) {
  AuditReport r;
  r.hypothesis = "antiderivative";
  r.margin = 0.0;
  const std::vector<double> pts = grid.points();
  for (std::size_t x : nl.audit_sites) {
    for (std::size_t k = 0; k < pts.size(); k += stride) {
      const double u = pts[k];
      const double F = nl.primitive(x, u);
      const double I = integrate_primitive(nl.f, x, u);
      const double err = std::abs(F - I) / std::max(1.0, std::abs(F));
      ++r.samples;
      if (!(err <= r.margin)) {
        r.margin = err;
        r.witness = AuditWitness{x, u, F - I, "worst F - quadrature"};
      }
    }
  }
  r.pass = r.margin <= tol;
  std::ostringstream os;
  os << "worst relative deviation " << r.margin << " (tol " << tol << ")";
  r.detail = os.str();
  return r;
}

/// f(x + T e_i, u) == f(x, u) for every vertex of the torus.
inline AuditReport verify_periodicity(const Nonlinearity& nl,
                                      const LatticeTorus& t,
                                      const AuditGrid& grid = {},
                                      int stride = 32) {
  AuditReport r;
  r.hypothesis = "periodicity";
  r.pass = true;
  const std::vector<double> pts = grid.points();
  std::vector<int> c;
  for (std::size_t v = 0; v < t.vertex_count(); ++v) {
    c = t.coords(v);
    for (int i = 0; i < t.dim(); ++i) {
      c[i] += t.period();
      const std::size_t w = t.index(c);
      c[i] -= t.period();
      for (std::size_t k = 0; k < pts.size(); k += stride) {
        ++r.samples;
        const double a = nl.value(v, pts[k]);
        const double b = nl.value(w, pts[k]);
        const double d = std::abs(a - b);
        r.margin = std::max(r.margin, d);
        if (d != 0.0 && r.pass) {
          r.pass = false;
          r.witness = AuditWitness{v, pts[k], a - b,
                                   "f(x + T e_" + std::to_string(i) + ", u) != f(x, u)"};
        }
      }
    }
  }
  r.detail = "max |f(x+Te_i,u) - f(x,u)| = " + std::to_string(r.margin);
  return r;
}

/// Smallest grid-certified C_eps = max (|f| - eps|u|)_+ / |u|^{p-1}. The
/// supremum may sit at infinity, so |f|/|u|^{p-1} at u_max is included.
inline double epsilon_bound(const Nonlinearity& nl, double eps,
                            const AuditGrid& grid = {}) {
  if (!(eps > 0.0)) throw DomainError("epsilon_bound: eps must be > 0");
  double C = 0.0;
  const std::vector<double> pts = grid.points();
  for (std::size_t x : nl.audit_sites) {
    for (double u : pts) {
      const double au = std::abs(u);
      const double excess = std::max(0.0, std::abs(nl.value(x, u)) - eps * au);
      const double c = excess / std::pow(au, nl.p - 1.0);
      if (!std::isfinite(c))
        throw NumericalError("epsilon_bound: unbounded growth at u = " +
                             std::to_string(u));
      C = std::max(C, c);
    }
    for (double u : {grid.u_max, -grid.u_max})
      C = std::max(C, std::abs(nl.value(x, u)) / std::pow(grid.u_max, nl.p - 1.0));
  }
  for (std::size_t x : nl.audit_sites) {
    for (double u : pts) {
      const double au = std::abs(u);
      const double rhs = eps * au + C * std::pow(au, nl.p - 1.0);
      if (std::abs(nl.value(x, u)) > rhs * (1.0 + 1e-12))
        throw NumericalError("epsilon_bound: recheck failed at u = " +
                             std::to_string(u));
    }
  }
  return C;
}

}  // namespace nehari
