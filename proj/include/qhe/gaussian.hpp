#pragma once

// Zero-mean Gaussian states of a few harmonic oscillators, stored as
// covariance matrices in the quadrature order (x_1..x_n, p_1..p_n).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include "qhe/errors.hpp"

namespace qhe {

template <int Dim, typename Real = double>
using Matrix = Eigen::Matrix<Real, Dim, Dim>;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPhysicalityTolerance = 1e-9;

/// The symplectic form for `Modes` oscillators: +1 in the upper-right block,
/// -1 in the lower-left block.
template <int Modes, typename Real = double>
Matrix<2 * Modes, Real> symplectic_form() {
  Matrix<2 * Modes, Real> omega = Matrix<2 * Modes, Real>::Zero();
  for (int i = 0; i < Modes; ++i) {
    omega(i, Modes + i) = Real(1);
    omega(Modes + i, i) = Real(-1);
  }
  return omega;
}

template <int Dim, typename Real>
Real asymmetry(const Matrix<Dim, Real>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Symplectic eigenvalues of a positive-definite symmetric matrix, ascending.
///
/// Computed as the positive eigenvalues of the Hermitian matrix
/// i L^T Omega L with sigma = L L^T. Throws DomainError if the input is not
/// symmetric or not positive definite (no physical state is).
template <int Dim, typename Real>
Eigen::Matrix<Real, Dim / 2, 1> symplectic_eigenvalues(const Matrix<Dim, Real>& sigma) {
  static_assert(Dim % 2 == 0);
  constexpr int modes = Dim / 2;
  using std::abs;
  const Real scale = std::max(Real(1), sigma.cwiseAbs().maxCoeff());
  if (asymmetry(sigma) > Real(kSymmetryTolerance) * scale) {
    throw DomainError("symplectic_eigenvalues: matrix is not symmetric");
  }
  Eigen::LLT<Matrix<Dim, Real>> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw DomainError("symplectic_eigenvalues: matrix is not positive definite");
  }
  const Matrix<Dim, Real> l = llt.matrixL();
  const Matrix<Dim, Real> m = l.transpose() * symplectic_form<modes, Real>() * l;
  using Complex = std::complex<Real>;
  const Eigen::Matrix<Complex, Dim, Dim> herm = Complex(0, 1) * m.template cast<Complex>();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Complex, Dim, Dim>> solver(herm, Eigen::EigenvaluesOnly);
  // Eigenvalues come in +/- pairs sorted ascending; the upper half is positive.
  return solver.eigenvalues().template tail<modes>();
}

/// Covariance matrix of a zero-mean Gaussian state of `Modes` oscillators.
///
/// Entries are sigma_ab = <R_a R_b + R_b R_a>/2 with R = (x_1..x_n, p_1..p_n).
/// The checked constructor enforces symmetry and the uncertainty principle;
/// `trusted` skips the spectral check for results of symplectic maps.
template <int Modes, typename Real = double>
class Covariance {
 public:
  static constexpr int kModes = Modes;
  static constexpr int kDim = 2 * Modes;
  using MatrixType = Matrix<kDim, Real>;

  explicit Covariance(const MatrixType& m) : m_(m) {
    const Real scale = std::max(Real(1), m.cwiseAbs().maxCoeff());
    if (asymmetry(m) > Real(kSymmetryTolerance) * scale) {
      throw DomainError("covariance matrix is not symmetric");
    }
    m_ = (m + m.transpose()) / Real(2);
    if (min_symplectic_eigenvalue() < Real(0.5) - Real(kPhysicalityTolerance)) {
      throw DomainError("covariance matrix violates the uncertainty principle");
    }
  }

  static Covariance trusted(const MatrixType& m) { return Covariance(m, Trusted{}); }

  const MatrixType& matrix() const { return m_; }
  Real operator()(int r, int c) const { return m_(r, c); }

  Real x2(int mode) const { return m_(mode, mode); }
  Real p2(int mode) const { return m_(Modes + mode, Modes + mode); }
  Real xp(int mode) const { return m_(mode, Modes + mode); }

  Eigen::Matrix<Real, Modes, 1> symplectic_spectrum() const {
    return symplectic_eigenvalues<kDim, Real>(m_);
  }
  Real min_symplectic_eigenvalue() const { return symplectic_spectrum().minCoeff(); }

  /// sigma -> S sigma S^T.
  Covariance transformed(const MatrixType& s) const { return trusted(s * m_ * s.transpose()); }

  template <typename Other>
  Covariance<Modes, Other> cast() const {
    return Covariance<Modes, Other>::trusted(m_.template cast<Other>());
  }

 private:
  struct Trusted {};
  Covariance(const MatrixType& m, Trusted) : m_((m + m.transpose()) / Real(2)) {}

  MatrixType m_;
};

template <typename Real = double>
using SingleMode = Covariance<1, Real>;
template <typename Real = double>
using TwoMode = Covariance<2, Real>;
template <typename Real = double>
using ThreeMode = Covariance<3, Real>;

// ---------------------------------------------------------------------------
// Single-mode states

/// Mean occupation of a thermal mode with inverse temperature beta.
template <typename Real>
Real occupation_from_beta(Real beta, Real omega) {
  using std::expm1;
  using std::isinf;
  if (!(omega > 0) || beta < 0) throw DomainError("occupation_from_beta: need beta >= 0, omega > 0");
  if (isinf(beta)) return Real(0);
  return Real(1) / expm1(beta * omega);
}

/// coth(beta*omega/2) = 2n + 1.
template <typename Real>
Real coth_factor(Real mean_occupation) {
  return Real(2) * mean_occupation + Real(1);
}

/// Squeezing whose vacuum-state energy equals that of a thermal mode with
/// coth-factor c: r = arccosh(c)/2.
template <typename Real>
Real squeezing_matching_thermal(Real coth) {
  using std::acosh;
  if (coth < 1) throw DomainError("squeezing_matching_thermal: coth factor below 1");
  return acosh(coth) / Real(2);
}

template <typename Real>
SingleMode<Real> thermal_covariance(Real mean_occupation, Real omega) {
  if (!(mean_occupation >= 0)) throw DomainError("thermal_covariance: negative mean occupation");
  if (!(omega > 0)) throw DomainError("thermal_covariance: frequency must be positive");
  const Real c = coth_factor(mean_occupation);
  Matrix<2, Real> m;
  m << c / (Real(2) * omega), Real(0), Real(0), c * omega / Real(2);
  return SingleMode<Real>::trusted(m);
}

template <typename Real>
SingleMode<Real> squeezed_vacuum_covariance(Real r, Real omega) {
  using std::exp;
  if (!(omega > 0)) throw DomainError("squeezed_vacuum_covariance: frequency must be positive");
  Matrix<2, Real> m;
  m << exp(Real(-2) * r) / (Real(2) * omega), Real(0), Real(0), omega * exp(Real(2) * r) / Real(2);
  return SingleMode<Real>::trusted(m);
}

// ---------------------------------------------------------------------------
// Initial preparation of the three oscillators

template <typename Real = double>
struct Thermal {
  Real mean_occupation{0};
};

template <typename Real = double>
struct SqueezedVacuum {
  Real squeezing{0};
};

template <typename Real = double>
using ModePreparation = std::variant<Thermal<Real>, SqueezedVacuum<Real>>;

/// Initial product state. Oscillator 1 sits at omega1, oscillators 2 and 3 at
/// omega3 (the working medium starts the cycle before compression).
template <typename Real = double>
struct Preparation {
  std::array<ModePreparation<Real>, 3> modes{Thermal<Real>{}, Thermal<Real>{}, Thermal<Real>{}};
  Real omega1{1};
  Real omega3{Real(0.1)};

  std::array<Real, 3> frequencies() const { return {omega1, omega3, omega3}; }

  void validate() const {
    if (!(omega1 > 0) || !(omega3 > 0)) throw DomainError("preparation: frequencies must be positive");
    for (const auto& m : modes) {
      if (const auto* t = std::get_if<Thermal<Real>>(&m); t && !(t->mean_occupation >= 0)) {
        throw DomainError("preparation: negative mean occupation");
      }
    }
  }

  /// beta_1 on oscillator 1, everything else in its ground state.
  static Preparation hot_thermal(Real beta1, Real omega3, Real omega1 = 1) {
    Preparation p;
    p.omega1 = omega1;
    p.omega3 = omega3;
    p.modes = {Thermal<Real>{occupation_from_beta(beta1, omega1)}, Thermal<Real>{}, Thermal<Real>{}};
    return p;
  }

  /// Oscillator 1 squeezed so that its energy equals the beta_1 thermal case.
  static Preparation hot_squeezed(Real beta1, Real omega3, Real omega1 = 1) {
    Preparation p = hot_thermal(beta1, omega3, omega1);
    const Real c = coth_factor(std::get<Thermal<Real>>(p.modes[0]).mean_occupation);
    p.modes[0] = SqueezedVacuum<Real>{squeezing_matching_thermal(c)};
    return p;
  }
};

template <typename Real>
SingleMode<Real> mode_covariance(const ModePreparation<Real>& m, Real omega) {
  return std::visit(
      [omega](const auto& v) -> SingleMode<Real> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Thermal<Real>>) {
          return thermal_covariance(v.mean_occupation, omega);
        } else {
          return squeezed_vacuum_covariance(v.squeezing, omega);
        }
      },
      m);
}

template <typename Real>
ThreeMode<Real> product_state(const Preparation<Real>& prep) {
  prep.validate();
  const auto omegas = prep.frequencies();
  Matrix<6, Real> m = Matrix<6, Real>::Zero();
  for (int i = 0; i < 3; ++i) {
    const auto block = mode_covariance(prep.modes[i], omegas[i]);
    m(i, i) = block.x2(0);
    m(i, 3 + i) = m(3 + i, i) = block.xp(0);
    m(3 + i, 3 + i) = block.p2(0);
  }
  return ThreeMode<Real>::trusted(m);
}

// ---------------------------------------------------------------------------
// Two-mode restriction

/// Rows/columns (x_i, x_j, p_i, p_j) of a three-mode covariance; indices are
/// zero-based oscillator numbers.
template <typename Real>
TwoMode<Real> restrict(const ThreeMode<Real>& sigma, int i, int j) {
  if (i == j || i < 0 || j < 0 || i > 2 || j > 2) {
    throw DomainError("restrict: need two distinct oscillator indices in [0, 2]");
  }
  const std::array<int, 4> idx{i, j, 3 + i, 3 + j};
  Matrix<4, Real> m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = sigma(idx[r], idx[c]);
  return TwoMode<Real>::trusted(m);
}

}  // namespace qhe
