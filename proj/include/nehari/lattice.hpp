#pragma once

// Finite periodic truncations of the lattice graph Z^N with unit edge weights
// and unit vertex measure, together with the discrete calculus used
// everywhere else: Laplacian, gradient form, l^p and W^{1,2} norms and
// period translations.
//
// Vertex ordering is row-major over coordinates: the last axis varies
// fastest, so index = ((x_0 * L_1 + x_1) * L_2 + x_2) ... .

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nehari/errors.hpp"

namespace nehari {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class LatticeTorus {
 public:
  LatticeTorus(int dim, std::vector<int> sides, int period)
      : dim_(dim), sides_(std::move(sides)), period_(period) {
    if (dim_ < 1) throw ConfigError("lattice: dim must be >= 1");
    if (static_cast<int>(sides_.size()) != dim_)
      throw ConfigError("lattice: expected " + std::to_string(dim_) +
                        " side lengths, got " +
                        std::to_string(sides_.size()));
    if (period_ < 1) throw ConfigError("lattice: period must be >= 1");
    for (int i = 0; i < dim_; ++i) {
      const int side = sides_[i];
      if (side < 3)
        throw ConfigError("lattice: side " + std::to_string(i) + " = " +
                          std::to_string(side) +
                          " is < 3 (wraparound would duplicate edges)");
      if (side % period_ != 0)
        throw ConfigError("lattice: side " + std::to_string(i) + " = " +
                          std::to_string(side) +
                          " is not divisible by period " +
                          std::to_string(period_));
    }
    count_ = std::accumulate(sides_.begin(), sides_.end(), std::size_t{1},
                             [](std::size_t a, int b) { return a * b; });
    strides_.assign(dim_, 1);
    for (int i = dim_ - 2; i >= 0; --i)
      strides_[i] = strides_[i + 1] * static_cast<std::size_t>(sides_[i + 1]);

    neighbors_.resize(count_ * degree());
    std::vector<int> x(dim_);
    for (std::size_t v = 0; v < count_; ++v) {
      coords_into(v, x);
      for (int i = 0; i < dim_; ++i) {
        const int side = sides_[i];
        const int xi = x[i];
        x[i] = (xi + 1) % side;
        neighbors_[v * degree() + 2 * i] = index(x);
        x[i] = (xi + side - 1) % side;
        neighbors_[v * degree() + 2 * i + 1] = index(x);
        x[i] = xi;
      }
    }
  }

  int dim() const { return dim_; }
  const std::vector<int>& sides() const { return sides_; }
  int period() const { return period_; }
  std::size_t vertex_count() const { return count_; }
  /// Every vertex has 2N neighbours.
  std::size_t degree() const { return 2 * static_cast<std::size_t>(dim_); }

  std::span<const std::size_t> neighbors(std::size_t v) const {
    return {neighbors_.data() + v * degree(), degree()};
  }

  std::vector<int> coords(std::size_t v) const {
    std::vector<int> x(dim_);
    coords_into(v, x);
    return x;
  }

  /// Coordinates are reduced modulo the side lengths, so negative or
  /// out-of-range entries are accepted.
  std::size_t index(std::span<const int> x) const {
    std::size_t v = 0;
    for (int i = 0; i < dim_; ++i) {
      const int side = sides_[i];
      const int xi = ((x[i] % side) + side) % side;
      v += strides_[i] * static_cast<std::size_t>(xi);
    }
    return v;
  }

  /// Number of distinct period translations along each axis (L_i / T).
  std::vector<int> cells_per_axis() const {
    std::vector<int> c(dim_);
    for (int i = 0; i < dim_; ++i) c[i] = sides_[i] / period_;
    return c;
  }

  /// Vertices of the fundamental cell [0,T)^N, in row-major cell order.
  std::vector<std::size_t> cell_vertices() const {
    std::vector<std::size_t> out;
    std::vector<int> x(dim_, 0);
    const std::size_t cell_size = cell_vertex_count();
    out.reserve(cell_size);
    for (std::size_t c = 0; c < cell_size; ++c) {
      std::size_t rest = c;
      for (int i = dim_ - 1; i >= 0; --i) {
        x[i] = static_cast<int>(rest % period_);
        rest /= period_;
      }
      out.push_back(index(x));
    }
    return out;
  }

  std::size_t cell_vertex_count() const {
    std::size_t n = 1;
    for (int i = 0; i < dim_; ++i) n *= static_cast<std::size_t>(period_);
    return n;
  }

  /// Row-major position of vertex v inside the fundamental cell.
  std::size_t cell_position(std::size_t v) const {
    std::vector<int> x = coords(v);
    std::size_t c = 0;
    for (int i = 0; i < dim_; ++i) c = c * period_ + x[i] % period_;
    return c;
  }

  bool operator==(const LatticeTorus& o) const {
    return dim_ == o.dim_ && sides_ == o.sides_ && period_ == o.period_;
  }

 private:
  void coords_into(std::size_t v, std::vector<int>& x) const {
    for (int i = dim_ - 1; i >= 0; --i) {
      x[i] = static_cast<int>(v % sides_[i]);
      v /= sides_[i];
    }
  }

  int dim_;
  std::vector<int> sides_;
  int period_;
  std::size_t count_ = 0;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> neighbors_;
};

using TorusPtr = std::shared_ptr<const LatticeTorus>;

inline TorusPtr build_torus(int dim, std::vector<int> sides, int period) {
  return std::make_shared<const LatticeTorus>(dim, std::move(sides), period);
}

/// A real function on the vertices of a torus.
class VertexFunction {
 public:
  VertexFunction(TorusPtr torus, Vector values)
      : torus_(std::move(torus)), values_(std::move(values)) {
    if (!torus_) throw DomainError("VertexFunction: null torus");
    if (static_cast<std::size_t>(values_.size()) != torus_->vertex_count())
      throw DomainError("VertexFunction: length " +
                        std::to_string(values_.size()) +
                        " does not match vertex count " +
                        std::to_string(torus_->vertex_count()));
    if (!values_.allFinite())
      throw DomainError("VertexFunction: non-finite entry");
  }

  static VertexFunction zeros(TorusPtr torus) {
    const auto n = static_cast<Index>(torus->vertex_count());
    return {std::move(torus), Vector::Zero(n)};
  }
  static VertexFunction constant(TorusPtr torus, double c) {
    const auto n = static_cast<Index>(torus->vertex_count());
    return {std::move(torus), Vector::Constant(n, c)};
  }
  static VertexFunction delta(TorusPtr torus, std::size_t v) {
    VertexFunction out = zeros(std::move(torus));
    out.values_[static_cast<Index>(v)] = 1.0;
    return out;
  }

  const LatticeTorus& torus() const { return *torus_; }
  const TorusPtr& torus_ptr() const { return torus_; }
  const Vector& values() const { return values_; }
  double operator[](std::size_t v) const {
    return values_[static_cast<Index>(v)];
  }

 private:
  TorusPtr torus_;
  Vector values_;
};

namespace detail {

inline void require_size(const LatticeTorus& t, const Vector& u,
                         const char* what) {
  if (static_cast<std::size_t>(u.size()) != t.vertex_count())
    throw DomainError(std::string(what) + ": vector length " +
                      std::to_string(u.size()) + " != vertex count " +
                      std::to_string(t.vertex_count()));
}

inline void require_same_torus(const VertexFunction& a,
                               const VertexFunction& b, const char* what) {
  if (!(a.torus() == b.torus()))
    throw DomainError(std::string(what) + ": functions live on different tori");
}

}  // namespace detail

// Raw-vector kernels. The torus is passed explicitly; all higher modules use
// these on Eigen vectors in row-major vertex order.

/// (Delta u)(x) = sum_{y~x} (u(y) - u(x)).
inline Vector laplacian(const LatticeTorus& t, const Vector& u) {
  detail::require_size(t, u, "laplacian");
  const std::size_t n = t.vertex_count();
  const double deg = static_cast<double>(t.degree());
  Vector out(static_cast<Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t y : t.neighbors(x)) acc += u[static_cast<Index>(y)];
    out[static_cast<Index>(x)] = acc - deg * u[static_cast<Index>(x)];
  }
  return out;
}

/// Gamma(u,v)(x) = 1/2 sum_{y~x} (u(y)-u(x)) (v(y)-v(x)).
inline Vector gradient_form(const LatticeTorus& t, const Vector& u,
                            const Vector& v) {
  detail::require_size(t, u, "gradient_form");
  detail::require_size(t, v, "gradient_form");
  const std::size_t n = t.vertex_count();
  Vector out(static_cast<Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    const auto xi = static_cast<Index>(x);
    double acc = 0.0;
    for (std::size_t y : t.neighbors(x)) {
      const auto yi = static_cast<Index>(y);
      acc += (u[yi] - u[xi]) * (v[yi] - v[xi]);
    }
    out[xi] = 0.5 * acc;
  }
  return out;
}

/// l^p norm with counting measure; p = +inf gives the max norm.
inline double norm_lp(const Vector& u, double p) {
  if (std::isnan(p) || p < 1.0)
    throw DomainError("norm_lp: p must be >= 1 (got " + std::to_string(p) +
                      ")");
  if (std::isinf(p)) return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
  if (p == 2.0) return u.norm();
  // Scale by the max entry so large p does not overflow.
  const double m = u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double acc = 0.0;
  for (Index i = 0; i < u.size(); ++i) acc += std::pow(std::abs(u[i]) / m, p);
  return m * std::pow(acc, 1.0 / p);
}

/// <u,v>_{W^{1,2}} = sum_x Gamma(u,v)(x) + u(x) v(x).
inline double inner_w12(const LatticeTorus& t, const Vector& u,
                        const Vector& v) {
  return gradient_form(t, u, v).sum() + u.dot(v);
}

inline double norm_w12(const LatticeTorus& t, const Vector& u) {
  return std::sqrt(std::max(0.0, inner_w12(t, u, u)));
}

/// Returns u(. - k T) with periodic wraparound. Shifts are reduced modulo
/// L_i / T, so any integer vector is accepted.
inline Vector translate(const LatticeTorus& t, const Vector& u,
                        std::span<const int> k) {
  detail::require_size(t, u, "translate");
  if (static_cast<int>(k.size()) != t.dim())
    throw DomainError("translate: shift has " + std::to_string(k.size()) +
                      " components, torus dim is " + std::to_string(t.dim()));
  const std::size_t n = t.vertex_count();
  Vector out(static_cast<Index>(n));
  std::vector<int> x;
  for (std::size_t v = 0; v < n; ++v) {
    x = t.coords(v);
    for (int i = 0; i < t.dim(); ++i) x[i] += k[i] * t.period();
    // out(x + kT) = u(x)
    out[static_cast<Index>(t.index(x))] = u[static_cast<Index>(v)];
  }
  return out;
}

// VertexFunction overloads: same kernels with torus-compatibility checks.

inline VertexFunction laplacian_apply(const VertexFunction& u) {
  return {u.torus_ptr(), laplacian(u.torus(), u.values())};
}

inline VertexFunction gradient_form(const VertexFunction& u,
                                    const VertexFunction& v) {
  detail::require_same_torus(u, v, "gradient_form");
  return {u.torus_ptr(), gradient_form(u.torus(), u.values(), v.values())};
}

inline double norm_lp(const VertexFunction& u, double p) {
  return norm_lp(u.values(), p);
}

inline double inner_w12(const VertexFunction& u, const VertexFunction& v) {
  detail::require_same_torus(u, v, "inner_w12");
  return inner_w12(u.torus(), u.values(), v.values());
}

inline double norm_w12(const VertexFunction& u) {
  return norm_w12(u.torus(), u.values());
}

inline VertexFunction translate(const VertexFunction& u,
                                std::span<const int> k) {
  return {u.torus_ptr(), translate(u.torus(), u.values(), k)};
}

/// Enumerates every distinct period shift k in prod_i [0, L_i/T).
inline std::vector<std::vector<int>> all_period_shifts(const LatticeTorus& t) {
  const std::vector<int> cells = t.cells_per_axis();
  std::size_t total = 1;
  for (int c : cells) total *= static_cast<std::size_t>(c);
  std::vector<std::vector<int>> out;
  out.reserve(total);
  std::vector<int> k(t.dim(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rest = s;
    for (int i = t.dim() - 1; i >= 0; --i) {
      k[i] = static_cast<int>(rest % cells[i]);
      rest /= cells[i];
    }
    out.push_back(k);
  }
  return out;
}

}  // namespace nehari
