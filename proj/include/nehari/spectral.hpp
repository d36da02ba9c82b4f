#pragma once

// The Schrodinger operator L = -Delta + V on a torus, its dense
// eigendecomposition, the spectral-gap check around zero and the splitting
// E = E^- (+) E^+ with the equivalent norm
//
//   ||u||^2 = (L u+, u+) - (L u-, u-).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"

namespace nehari {

class SchrodingerOperator {
 public:
  SchrodingerOperator(TorusPtr torus, Vector potential)
      : torus_(std::move(torus)), potential_(std::move(potential)) {
    const LatticeTorus& t = *torus_;
    detail::require_size(t, potential_, "assemble_operator");
    if (!potential_.allFinite())
      throw HypothesisViolation("potential: non-finite value");
    check_periodic(t, potential_);

    const auto n = static_cast<Index>(t.vertex_count());
    matrix_ = Matrix::Zero(n, n);
    for (Index x = 0; x < n; ++x) {
      matrix_(x, x) = static_cast<double>(t.degree()) + potential_[x];
      for (std::size_t y : t.neighbors(static_cast<std::size_t>(x)))
        matrix_(x, static_cast<Index>(y)) -= 1.0;
    }
  }

  const LatticeTorus& torus() const { return *torus_; }
  const TorusPtr& torus_ptr() const { return torus_; }
  const Vector& potential() const { return potential_; }
  const Matrix& matrix() const { return matrix_; }

  /// Matrix-free action -Delta u + V u.
  Vector apply(const Vector& u) const {
    return -laplacian(*torus_, u) + potential_.cwiseProduct(u);
  }

  /// Throws HypothesisViolation naming the first vertex with
  /// V(x + T e_i) != V(x).
  static void check_periodic(const LatticeTorus& t, const Vector& values,
                             const char* what = "potential") {
    std::vector<int> x;
    for (std::size_t v = 0; v < t.vertex_count(); ++v) {
      x = t.coords(v);
      for (int i = 0; i < t.dim(); ++i) {
        x[i] += t.period();
        const std::size_t w = t.index(x);
        x[i] -= t.period();
        const double a = values[static_cast<Index>(v)];
        const double b = values[static_cast<Index>(w)];
        if (std::abs(a - b) > 1e-14 * (1.0 + std::abs(a))) {
          std::ostringstream os;
          os << what << " is not " << t.period() << "-periodic: value "
             << a << " at vertex " << v << " vs " << b << " at vertex " << w
             << " (shift along axis " << i << ")";
          throw HypothesisViolation(os.str());
        }
      }
    }
  }

 private:
  TorusPtr torus_;
  Vector potential_;
  Matrix matrix_;
};

inline SchrodingerOperator assemble_operator(TorusPtr torus,
                                             const VertexFunction& V) {
  if (!(V.torus() == *torus))
    throw DomainError("assemble_operator: potential lives on another torus");
  return {std::move(torus), V.values()};
}

/// Extends per-cell values (row-major over [0,T)^N) periodically.
inline Vector periodic_extension(const LatticeTorus& t,
                                 const std::vector<double>& cell) {
  if (cell.size() != t.cell_vertex_count())
    throw ConfigError("cell table has " + std::to_string(cell.size()) +
                      " entries, expected period^dim = " +
                      std::to_string(t.cell_vertex_count()));
  Vector out(static_cast<Index>(t.vertex_count()));
  for (std::size_t v = 0; v < t.vertex_count(); ++v)
    out[static_cast<Index>(v)] = cell[t.cell_position(v)];
  return out;
}

struct Eigensystem {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns
};

inline Eigensystem eigendecompose(const SchrodingerOperator& op) {
  const Matrix& A = op.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigendecompose: eigensolver failed (n = " << A.rows()
       << ", ||A||_F = " << A.norm()
       << ", asymmetry = " << (A - A.transpose()).norm() << ")";
    throw NumericalError(os.str());
  }
  Eigensystem es{solver.eigenvalues(), solver.eigenvectors()};
  const auto n = A.rows();
  const double orth = (es.vectors.transpose() * es.vectors -
                       Matrix::Identity(n, n)).norm();
  const double recon =
      (es.vectors * es.values.asDiagonal() * es.vectors.transpose() - A)
          .norm();
  if (orth > 1e-10 || recon > 1e-8 * std::max(1.0, A.norm())) {
    std::ostringstream os;
    os << "eigendecompose: accuracy check failed (orthonormality "
       << orth << ", reconstruction " << recon << ", ||A||_F = " << A.norm()
       << ")";
    throw NumericalError(os.str());
  }
  return es;
}

/// Outcome of the spectral-gap check. Missing sides of the spectrum
/// (E^- = {0} or E^+ = {0}) are reported as NaN edges and zero constants.
struct GapReport {
  bool pass = false;
  double gap_tol = 0.0;
  double lambda_minus_max = std::numeric_limits<double>::quiet_NaN();
  double lambda_plus_min = std::numeric_limits<double>::quiet_NaN();
  /// |lambda_min| and |lambda_max^-| on E^-.
  double alpha = 0.0;
  double beta = 0.0;
  /// lambda_max and lambda_min^+ on E^+.
  double alpha_plus = 0.0;
  double beta_plus = 0.0;
  std::size_t dim_minus = 0;
  std::size_t dim_plus = 0;
  std::vector<double> offending;

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    if (pass) {
      os << "0 lies in the gap (" << lambda_minus_max << ", "
         << lambda_plus_min << ")";
    } else {
      os << "spectral gap condition violated: " << offending.size()
         << " eigenvalue(s) in (-" << gap_tol << ", " << gap_tol << "):";
      for (double l : offending) os << ' ' << l;
    }
    return os.str();
  }
};

inline GapReport check_gap(const Eigensystem& es, double gap_tol = 1e-8) {
  if (!(gap_tol > 0.0)) throw DomainError("check_gap: gap_tol must be > 0");
  GapReport r;
  r.gap_tol = gap_tol;
  const Vector& ev = es.values;
  for (Index i = 0; i < ev.size(); ++i) {
    const double l = ev[i];
    if (l <= -gap_tol) {
      ++r.dim_minus;
      r.lambda_minus_max = l;  // ascending order: last one wins
    } else if (l >= gap_tol) {
      if (r.dim_plus == 0) r.lambda_plus_min = l;
      ++r.dim_plus;
    } else {
      r.offending.push_back(l);
    }
  }
  r.pass = r.offending.empty();
  if (r.dim_minus > 0) {
    r.alpha = std::abs(ev[0]);
    r.beta = std::abs(r.lambda_minus_max);
  }
  if (r.dim_plus > 0) {
    r.alpha_plus = ev[ev.size() - 1];
    r.beta_plus = r.lambda_plus_min;
  }
  return r;
}

/// Constants with lower * ||u||_{W^{1,2}}^2 <= ||u||^2 <= upper *
/// ||u||_{W^{1,2}}^2, derived from the eigenvalue extremes and
/// ||u||_2^2 <= ||u||_{W^{1,2}}^2 <= (4N+1) ||u||_2^2.
struct NormEquivalence {
  double lower = 0.0;
  double upper = 0.0;
};

class SpectralSplit {
 public:
  SpectralSplit(Eigensystem es, GapReport report, int dim)
      : es_(std::move(es)), report_(std::move(report)), dim_(dim) {
    m_ = static_cast<Index>(report_.dim_minus);
    abs_values_ = es_.values.cwiseAbs();
  }

  const Vector& eigenvalues() const { return es_.values; }
  const Matrix& eigenvectors() const { return es_.vectors; }
  const GapReport& gap() const { return report_; }
  Index size() const { return es_.values.size(); }
  /// Number of negative eigenvalues (= dim E^-).
  Index split_index() const { return m_; }
  Index dim_minus() const { return m_; }
  Index dim_plus() const { return size() - m_; }

  /// Orthonormal (in l^2) eigenbases of E^- and E^+.
  auto basis_minus() const { return es_.vectors.leftCols(m_); }
  auto basis_plus() const { return es_.vectors.rightCols(size() - m_); }
  auto lambda_minus() const { return es_.values.head(m_); }
  auto lambda_plus() const { return es_.values.tail(size() - m_); }

  Matrix projector_plus() const {
    const auto B = basis_plus();
    return B * B.transpose();
  }
  Matrix projector_minus() const {
    const auto B = basis_minus();
    return B * B.transpose();
  }

  /// Spectral coefficients Q^T u.
  Vector coefficients(const Vector& u) const {
    return es_.vectors.transpose() * u;
  }

  std::pair<Vector, Vector> project(const Vector& u) const {
    const Vector c = coefficients(u);
    Vector plus = basis_plus() * c.tail(size() - m_);
    Vector minus = basis_minus() * c.head(m_);
    return {std::move(plus), std::move(minus)};
  }

  Vector plus_part(const Vector& u) const {
    const auto B = basis_plus();
    return B * (B.transpose() * u);
  }
  Vector minus_part(const Vector& u) const {
    const auto B = basis_minus();
    return B * (B.transpose() * u);
  }

  /// ||u^+||^2 and ||u^-||^2 in the equivalent norm.
  std::pair<double, double> equivalent_norm_squared_parts(
      const Vector& u) const {
    const Vector c = coefficients(u);
    double plus = 0.0, minus = 0.0;
    for (Index i = 0; i < c.size(); ++i) {
      const double term = abs_values_[i] * c[i] * c[i];
      (i < m_ ? minus : plus) += term;
    }
    return {plus, minus};
  }

  double equivalent_norm(const Vector& u) const {
    const auto [p, m] = equivalent_norm_squared_parts(u);
    return std::sqrt(p + m);
  }

  /// <u,v> = (L u+, v+) - (L u-, v-).
  double equivalent_inner(const Vector& u, const Vector& v) const {
    const Vector cu = coefficients(u);
    const Vector cv = coefficients(v);
    return (abs_values_.cwiseProduct(cu)).dot(cv);
  }

  NormEquivalence norm_equivalence() const {
    const double lo = abs_values_.minCoeff();
    const double hi = abs_values_.maxCoeff();
    return {lo / (4.0 * dim_ + 1.0), hi};
  }

 private:
  Eigensystem es_;
  GapReport report_;
  int dim_;
  Index m_ = 0;
  Vector abs_values_;
};

inline SpectralSplit spectral_split(Eigensystem es, int dim,
                                    double gap_tol = 1e-8) {
  GapReport report = check_gap(es, gap_tol);
  if (!report.pass) throw HypothesisViolation(report.describe());
  return {std::move(es), std::move(report), dim};
}

inline SpectralSplit spectral_split(const SchrodingerOperator& op,
                                    double gap_tol = 1e-8) {
  return spectral_split(eigendecompose(op), op.torus().dim(), gap_tol);
}

inline std::pair<VertexFunction, VertexFunction> project(
    const SpectralSplit& split, const VertexFunction& u) {
  auto [p, m] = split.project(u.values());
  return {VertexFunction(u.torus_ptr(), std::move(p)),
          VertexFunction(u.torus_ptr(), std::move(m))};
}

inline double equivalent_norm(const SpectralSplit& split,
                              const VertexFunction& u) {
  return split.equivalent_norm(u.values());
}

}  // namespace nehari
