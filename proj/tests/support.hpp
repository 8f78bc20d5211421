#pragma once

// Seeded generators and small independent oracles shared by the tests.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "qhe/gaussian.hpp"

namespace qhe::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// exp(Omega H) for a random symmetric H with entries of size `strength`.
template <int Modes>
Matrix<2 * Modes, double> random_symplectic(Rng& rng, double strength) {
  constexpr int d = 2 * Modes;
  Matrix<d, double> h;
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) h(r, c) = h(c, r) = uniform(rng, -strength, strength);
  const Matrix<d, double> gen = symplectic_form<Modes, double>() * h;
  return gen.exp();
}

/// S diag(nu, nu) S^T with random nu >= 1/2; `nu_max` = 0.5 gives pure states.
template <int Modes>
Covariance<Modes, double> random_state(Rng& rng, double strength = 0.6, double nu_max = 3.0) {
  constexpr int d = 2 * Modes;
  Matrix<d, double> w = Matrix<d, double>::Zero();
  for (int k = 0; k < Modes; ++k) {
    const double nu = nu_max > 0.5 ? uniform(rng, 0.5, nu_max) : 0.5;
    w(k, k) = w(Modes + k, Modes + k) = nu;
  }
  const auto s = random_symplectic<Modes>(rng, strength);
  return Covariance<Modes, double>::trusted(s * w * s.transpose());
}

/// Symplectic spectrum from the general (non-Hermitian) eigenproblem of
/// i Omega sigma: moduli of its eigenvalues, each appearing twice.
template <int Dim>
Eigen::Matrix<double, Dim / 2, 1> symplectic_spectrum_oracle(const Matrix<Dim, double>& sigma) {
  using C = std::complex<double>;
  const Eigen::Matrix<C, Dim, Dim> m = C(0, 1) * (symplectic_form<Dim / 2, double>() * sigma).template cast<C>();
  Eigen::ComplexEigenSolver<Eigen::Matrix<C, Dim, Dim>> es(m);
  std::vector<double> mods;
  for (int k = 0; k < Dim; ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(mods.begin(), mods.end());
  Eigen::Matrix<double, Dim / 2, 1> out;
  for (int k = 0; k < Dim / 2; ++k) out(k) = 0.5 * (mods[2 * k] + mods[2 * k + 1]);
  return out;
}

/// Two-mode squeezed vacuum at unit frequency, ordering (x1, x2, p1, p2).
inline TwoMode<double> tmsv(double r) {
  const double c = std::cosh(2 * r) / 2, s = std::sinh(2 * r) / 2;
  Matrix<4, double> m = Matrix<4, double>::Zero();
  m(0, 0) = m(1, 1) = m(2, 2) = m(3, 3) = c;
  m(0, 1) = m(1, 0) = s;
  m(2, 3) = m(3, 2) = -s;
  return TwoMode<double>(m);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qhe::testing
