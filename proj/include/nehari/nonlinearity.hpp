#pragma once

// Nonlinearity f(x,u), its primitive F(x,u) = int_0^u f(x,s) ds and its
// derivative in u. Evaluators take a vertex index and a real value and must
// be pure; they may be called concurrently.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/spectral.hpp"

namespace nehari {

using PointEval = std::function<double(std::size_t, double)>;

struct Nonlinearity {
  PointEval f;
  PointEval F;
  PointEval df;
  /// Growth data of |f(x,u)| <= a (|u| + |u|^{p-1}).
  double p = 0.0;
  double a = 0.0;
  bool odd = false;
  /// Set when F(x, t u) = t^k F(x, u) for t > 0.
  std::optional<double> homogeneity;
  /// Vertices at which grid audits are evaluated (one per cell position).
  std::vector<std::size_t> audit_sites{0};
  std::string description;

  double value(std::size_t x, double u) const { return f(x, u); }
  double primitive(std::size_t x, double u) const { return F(x, u); }
  double derivative(std::size_t x, double u) const {
    if (df) return df(x, u);
    const double h = 1e-6 * std::max(1.0, std::abs(u));
    return (f(x, u + h) - f(x, u - h)) / (2.0 * h);
  }

  /// Pointwise f(x, u(x)) over a vertex vector.
  Vector apply(const Vector& u) const {
    Vector out(u.size());
    for (Index i = 0; i < u.size(); ++i)
      out[i] = f(static_cast<std::size_t>(i), u[i]);
    return out;
  }
  Vector apply_derivative(const Vector& u) const {
    Vector out(u.size());
    for (Index i = 0; i < u.size(); ++i)
      out[i] = derivative(static_cast<std::size_t>(i), u[i]);
    return out;
  }
  /// sum_x F(x, u(x)).
  double primitive_sum(const Vector& u) const {
    double acc = 0.0;
    for (Index i = 0; i < u.size(); ++i)
      acc += F(static_cast<std::size_t>(i), u[i]);
    return acc;
  }
};

/// Adaptive Gauss-Kronrod value of int_0^u f(x,s) ds, computed as
/// u int_0^1 f(x, u t) dt (Boost's error control stalls on tiny intervals).
inline double integrate_primitive(const PointEval& f, std::size_t x, double u,
                                  double rel_tol = 1e-13) {
  if (u == 0.0) return 0.0;
  auto g = [&](double t) { return f(x, u * t); };
  double err = 0.0;
  return u * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                 g, 0.0, 1.0, 15, rel_tol, &err);
}

/// Nonlinearity from user evaluators. A missing F is synthesized by
/// quadrature and a missing derivative by central differences.
inline Nonlinearity make_nonlinearity(PointEval f, PointEval F, PointEval df,
                                      double p, double a, bool odd,
                                      std::string description) {
  if (!f) throw ConfigError("nonlinearity: f evaluator is required");
  Nonlinearity nl;
  if (!F) {
    F = [f](std::size_t x, double u) { return integrate_primitive(f, x, u); };
  }
  nl.f = std::move(f);
  nl.F = std::move(F);
  nl.df = std::move(df);
  nl.p = p;
  nl.a = a;
  nl.odd = odd;
  nl.description = std::move(description);
  return nl;
}

namespace detail {

inline Vector checked_weight(const VertexFunction& weight) {
  const Vector& w = weight.values();
  for (Index i = 0; i < w.size(); ++i)
    if (!(w[i] > 0.0))
      throw ConfigError("nonlinearity: weight must be positive (vertex " +
                        std::to_string(i) + " has " + std::to_string(w[i]) +
                        ")");
  SchrodingerOperator::check_periodic(weight.torus(), w, "nonlinearity weight");
  return w;
}

}  // namespace detail

/// f(x,u) = weight(x) |u|^{p-2} u, F = weight |u|^p / p.
inline Nonlinearity power_nonlinearity(double p, const VertexFunction& weight) {
  if (!(p > 2.0))
    throw ConfigError("power nonlinearity: exponent p must be > 2 (got " +
                      std::to_string(p) + ")");
  const Vector w = detail::checked_weight(weight);
  Nonlinearity nl;
  nl.f = [w, p](std::size_t x, double u) {
    return w[static_cast<Index>(x)] * std::pow(std::abs(u), p - 2.0) * u;
  };
  nl.F = [w, p](std::size_t x, double u) {
    return w[static_cast<Index>(x)] * std::pow(std::abs(u), p) / p;
  };
  nl.df = [w, p](std::size_t x, double u) {
    return w[static_cast<Index>(x)] * (p - 1.0) * std::pow(std::abs(u), p - 2.0);
  };
  nl.p = p;
  nl.a = w.maxCoeff();
  nl.odd = true;
  nl.homogeneity = p;
  nl.audit_sites = weight.torus().cell_vertices();
  std::ostringstream os;
  os << "power: f = w(x)|u|^" << p - 2.0 << " u";
  nl.description = os.str();
  return nl;
}

struct PowerTerm {
  double coefficient = 1.0;
  double exponent = 4.0;
  bool operator==(const PowerTerm&) const = default;
};

/// f(x,u) = weight(x) sum_k c_k |u|^{p_k-2} u. Exponents >= 2 are accepted
/// so that deliberately non-conforming models (e.g. u^3 + u) can be audited;
/// growth data is p = max p_k, a = max weight * sum c_k.
inline Nonlinearity sum_of_powers(const std::vector<PowerTerm>& terms,
                                  const VertexFunction& weight) {
  if (terms.empty()) throw ConfigError("nonlinearity table: no terms");
  double pmax = 0.0, csum = 0.0;
  for (const PowerTerm& t : terms) {
    if (!(t.exponent >= 2.0))
      throw ConfigError("nonlinearity table: exponent must be >= 2 (got " +
                        std::to_string(t.exponent) + ")");
    if (!(t.coefficient > 0.0))
      throw ConfigError("nonlinearity table: coefficient must be > 0");
    pmax = std::max(pmax, t.exponent);
    csum += t.coefficient;
  }
  if (!(pmax > 2.0))
    throw ConfigError(
        "nonlinearity table: at least one exponent must exceed 2");
  const Vector w = detail::checked_weight(weight);
  Nonlinearity nl;
  nl.f = [w, terms](std::size_t x, double u) {
    double acc = 0.0;
    const double au = std::abs(u);
    for (const PowerTerm& t : terms)
      acc += t.coefficient * std::pow(au, t.exponent - 2.0) * u;
    return w[static_cast<Index>(x)] * acc;
  };
  nl.F = [w, terms](std::size_t x, double u) {
    double acc = 0.0;
    const double au = std::abs(u);
    for (const PowerTerm& t : terms)
      acc += t.coefficient * std::pow(au, t.exponent) / t.exponent;
    return w[static_cast<Index>(x)] * acc;
  };
  nl.df = [w, terms](std::size_t x, double u) {
    double acc = 0.0;
    const double au = std::abs(u);
    for (const PowerTerm& t : terms)
      acc += t.coefficient * (t.exponent - 1.0) * std::pow(au, t.exponent - 2.0);
    return w[static_cast<Index>(x)] * acc;
  };
  nl.p = pmax;
  nl.a = w.maxCoeff() * csum;
  nl.odd = true;
  if (terms.size() == 1) nl.homogeneity = terms.front().exponent;
  nl.audit_sites = weight.torus().cell_vertices();
  std::ostringstream os;
  os << "table: f = w(x) * (";
  for (std::size_t k = 0; k < terms.size(); ++k)
    os << (k ? " + " : "") << terms[k].coefficient << "|u|^"
       << terms[k].exponent - 2.0 << " u";
  os << ")";
  nl.description = os.str();
  return nl;
}

}  // namespace nehari
