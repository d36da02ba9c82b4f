#pragma once

// Floquet-Bloch reduction of -Delta + V for a T-periodic potential: for each
// quasimomentum theta in [0, 2pi)^N the operator restricted to
// theta-quasiperiodic functions is a T^N x T^N Hermitian matrix. On a torus
// with L_i / T cells the spectrum is the union over the commensurate
// quasimomenta theta_i = 2 pi j / (L_i / T).

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <numbers>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"

namespace nehari {

using ComplexMatrix = Eigen::MatrixXcd;

inline ComplexMatrix bloch_matrix(int dim, int period,
                                  const std::vector<double>& cell,
                                  const std::vector<double>& theta) {
  std::size_t cell_size = 1;
  for (int i = 0; i < dim; ++i) cell_size *= static_cast<std::size_t>(period);
  if (cell.size() != cell_size)
    throw DomainError("bloch_matrix: cell has " + std::to_string(cell.size()) +
                      " entries, expected " + std::to_string(cell_size));
  if (static_cast<int>(theta.size()) != dim)
    throw DomainError("bloch_matrix: theta must have dim components");

  const auto n = static_cast<Index>(cell_size);
  ComplexMatrix H = ComplexMatrix::Zero(n, n);
  std::vector<int> x(dim);
  for (std::size_t c = 0; c < cell_size; ++c) {
    std::size_t rest = c;
    for (int i = dim - 1; i >= 0; --i) {
      x[i] = static_cast<int>(rest % period);
      rest /= period;
    }
    const auto ci = static_cast<Index>(c);
    H(ci, ci) += 2.0 * dim + cell[c];
    for (int i = 0; i < dim; ++i) {
      for (int step : {+1, -1}) {
        std::vector<int> y = x;
        y[i] += step;
        int wrap = 0;
        if (y[i] >= period) {
          y[i] -= period;
          wrap = 1;
        } else if (y[i] < 0) {
          y[i] += period;
          wrap = -1;
        }
        std::size_t d = 0;
        for (int j = 0; j < dim; ++j) d = d * period + y[j];
        // u(x + T e_i) = e^{i theta_i} u(x) for quasiperiodic u.
        const std::complex<double> phase =
            std::polar(1.0, static_cast<double>(wrap) * theta[i]);
        H(ci, static_cast<Index>(d)) -= phase;
      }
    }
  }
  return H;
}

inline Vector bloch_eigenvalues(int dim, int period,
                                const std::vector<double>& cell,
                                const std::vector<double>& theta) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(
      bloch_matrix(dim, period, cell, theta), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericalError("bloch_eigenvalues: eigensolver failed");
  return solver.eigenvalues();
}

struct BlochSpectrum {
  std::vector<std::vector<double>> quasimomenta;
  std::vector<Vector> eigenvalues;  // ascending, one entry per quasimomentum
  Vector band_min;
  Vector band_max;
};

/// Samples theta on a uniform k_samples^N grid over [0, 2pi)^N.
inline BlochSpectrum bloch_spectrum(int dim, int period,
                                    const std::vector<double>& cell,
                                    int k_samples) {
  if (dim < 1 || period < 1 || k_samples < 1)
    throw DomainError("bloch_spectrum: dim, period and k_samples must be >= 1");
  BlochSpectrum out;
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(k_samples);
  std::vector<double> theta(dim);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rest = s;
    for (int i = dim - 1; i >= 0; --i) {
      theta[i] = 2.0 * std::numbers::pi * static_cast<double>(rest % k_samples) /
                 k_samples;
      rest /= k_samples;
    }
    Vector ev = bloch_eigenvalues(dim, period, cell, theta);
    if (out.eigenvalues.empty()) {
      out.band_min = ev;
      out.band_max = ev;
    } else {
      out.band_min = out.band_min.cwiseMin(ev);
      out.band_max = out.band_max.cwiseMax(ev);
    }
    out.quasimomenta.push_back(theta);
    out.eigenvalues.push_back(std::move(ev));
  }
  return out;
}

/// Union of Bloch eigenvalues over the quasimomenta commensurate with the
/// torus, sorted ascending; has exactly vertex_count entries.
inline Vector commensurate_bloch_eigenvalues(const LatticeTorus& t,
                                             const std::vector<double>& cell) {
  const std::vector<int> cells = t.cells_per_axis();
  std::vector<double> all;
  all.reserve(t.vertex_count());
  for (const std::vector<int>& k : all_period_shifts(t)) {
    std::vector<double> theta(t.dim());
    for (int i = 0; i < t.dim(); ++i)
      theta[i] = 2.0 * std::numbers::pi * k[i] / cells[i];
    const Vector ev = bloch_eigenvalues(t.dim(), t.period(), cell, theta);
    all.insert(all.end(), ev.data(), ev.data() + ev.size());
  }
  std::sort(all.begin(), all.end());
  return Eigen::Map<const Vector>(all.data(), static_cast<Index>(all.size()));
}

}  // namespace nehari
