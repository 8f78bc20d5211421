#pragma once

// Two-mode correlation measures on covariance matrices ordered (x_i, x_j, p_i, p_j).
//
// Logarithms are natural throughout. Covariances use the convention in which
// the vacuum has symplectic eigenvalue 1/2; the entropy function h(x) below
// is the one for vacuum = 1, so its arguments are doubled symplectic
// eigenvalues (h(1) = 0 for a pure mode).

#include <algorithm>
#include <array>
#include <cmath>

#include "qhe/errors.hpp"
#include "qhe/gaussian.hpp"

namespace qhe {

/// Which mode of the pair is measured (the "B" side of the discord).
enum class Measured { First, Second };

template <typename Real = double>
struct TwoModeInvariants {
  Matrix<2, Real> a, b, c;  // local blocks of the unmeasured/measured mode, correlations
  Real i1{0}, i2{0}, i3{0}, i4{0};
  Real lambda{0};
  Real d_minus{0}, d_plus{0};
  Real scale{1};  // largest |entry|, at least 1
};

/// Reorders (x_i, x_j, p_i, p_j) into (x_A, p_A, x_B, p_B) with B the measured mode.
template <typename Real>
Matrix<4, Real> to_mode_blocks(const TwoMode<Real>& s, Measured measured = Measured::Second) {
  const std::array<int, 4> order =
      measured == Measured::Second ? std::array<int, 4>{0, 2, 1, 3} : std::array<int, 4>{1, 3, 0, 2};
  Matrix<4, Real> m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = s(order[r], order[c]);
  return m;
}

/// Inverse of to_mode_blocks.
template <typename Real>
TwoMode<Real> from_mode_blocks(const Matrix<4, Real>& blocks, Measured measured = Measured::Second) {
  const std::array<int, 4> order =
      measured == Measured::Second ? std::array<int, 4>{0, 2, 1, 3} : std::array<int, 4>{1, 3, 0, 2};
  Matrix<4, Real> m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(order[r], order[c]) = blocks(r, c);
  return TwoMode<Real>::trusted(m);
}


template <typename Real>
TwoModeInvariants<Real> two_mode_invariants(const TwoMode<Real>& s, Measured measured = Measured::Second) {
  const Matrix<4, Real> m = to_mode_blocks(s, measured);
  TwoModeInvariants<Real> inv;
  inv.a = m.template block<2, 2>(0, 0);
  inv.b = m.template block<2, 2>(2, 2);
  inv.c = m.template block<2, 2>(0, 2);
  inv.i1 = inv.a.determinant();
  inv.i2 = inv.b.determinant();
  inv.i3 = inv.c.determinant();
  inv.scale = std::max(Real(1), m.cwiseAbs().maxCoeff());
  // A 4x4 determinant of a state with large entries carries an absolute error
  // ~ eps |sigma|^4, and d_pm from it loses more near d_+ = d_-. The
  // Hermitian route is accurate to ~ eps |sigma|, so I4 and lambda are
  // rebuilt from its spectrum.
  const auto nu = symplectic_eigenvalues<4, Real>(s.matrix());
  inv.d_minus = nu(0);
  inv.d_plus = nu(1);
  inv.i4 = inv.d_minus * inv.d_minus * inv.d_plus * inv.d_plus;
  inv.lambda = inv.d_minus * inv.d_minus + inv.d_plus * inv.d_plus;
  return inv;
}

namespace detail {

template <typename Real>
void require_physical(const TwoModeInvariants<Real>& inv, const char* who) {
  if (inv.d_minus < Real(0.5) - Real(kPhysicalityTolerance)) {
    throw DomainError(std::string(who) + ": unphysical two-mode covariance");
  }
}

}  // namespace detail

/// Smallest symplectic eigenvalue of the partial transpose P sigma P with
/// P = diag(1, 1, 1, -1).
template <typename Real>
Real partial_transpose_min_eigenvalue(const TwoMode<Real>& s) {
  Matrix<4, Real> pt = s.matrix();
  pt.row(3) *= Real(-1);
  pt.col(3) *= Real(-1);
  return symplectic_eigenvalues<4, Real>(pt)(0);
}

/// max(0, -ln(2 nu)) with nu the smallest partially transposed symplectic eigenvalue.
template <typename Real>
Real log_negativity(const TwoMode<Real>& s) {
  using std::log;
  using std::max;
  const auto inv = two_mode_invariants(s);
  detail::require_physical(inv, "log_negativity");
  return max(Real(0), -log(Real(2) * partial_transpose_min_eigenvalue(s)));
}

/// Von Neumann entropy of a thermal mode with (vacuum = 1) symplectic eigenvalue x.
template <typename Real>
Real entropy_h(Real x) {
  using std::log;
  if (x < Real(1) - Real(kPhysicalityTolerance)) throw DomainError("entropy_h: argument below 1");
  if (x <= Real(1)) return Real(0);
  const Real up = (x + Real(1)) / Real(2), down = (x - Real(1)) / Real(2);
  return up * log(up) - down * log(down);
}

/// The "otherwise" branch of E_min as usually printed divides by I2; that is
/// twice the optimal homodyne conditional determinant (the first branch and a
/// brute-force search over Gaussian measurements both confirm the factor).
/// `Homodyne` divides by 2 I2; `AsPrinted` keeps the printed form.
enum class EminForm { Homodyne, AsPrinted };

template <typename Real = double>
struct EminBranches {
  Real first{0};             // the branch used when the condition holds
  Real second{0};            // the "otherwise" branch, homodyne normalization
  Real second_as_printed{0};
  bool first_selected{true};

  Real selected(EminForm form = EminForm::Homodyne) const {
    if (first_selected) return first;
    return form == EminForm::Homodyne ? second : second_as_printed;
  }
};

/// Both closed forms of E_min and the condition that picks between them.
template <typename Real>
EminBranches<Real> emin_branches(const TwoModeInvariants<Real>& inv) {
  using std::abs;
  using std::max;
  using std::sqrt;
  const Real i1 = inv.i1, i2 = inv.i2, i3 = inv.i3, i4 = inv.i4;
  const Real quarter = Real(0.25);
  EminBranches<Real> e;
  const Real lhs = (i1 * i2 - i4) * (i1 * i2 - i4);
  const Real rhs = (i1 + Real(4) * i4) * (i2 + quarter) * i3 * i3;
  e.first_selected = lhs <= rhs;

  const Real root1 = sqrt(max(Real(0), i3 * i3 - (i1 - Real(4) * i4) * (i2 - quarter)));
  const Real f = (abs(i3) + root1) / (Real(2) * (i2 - quarter));
  e.first = f * f;

  const Real t = i1 * i2 + i4 - i3 * i3;
  const Real root2 = sqrt(max(Real(0), t * t - Real(4) * i1 * i2 * i4));
  e.second_as_printed = (i1 * i2 - i3 * i3 + i4 - root2) / i2;
  e.second = e.second_as_printed / Real(2);
  return e;
}

/// Slack, per squared unit of matrix scale, below the floor 1/4 that local
/// and conditional determinants may show from rounding. Near-pure states sit
/// where the E_min discriminants vanish, which amplifies rounding to a few
/// sqrt(eps) times the squared scale.
inline constexpr double kDeterminantSlack = 1e-7;

namespace detail {

/// det >= 1/4 for any physical single-mode covariance; rounding deficits are
/// clamped, larger ones rejected.
template <typename Real>
Real floor_quarter(Real det, Real scale, const char* what) {
  const Real quarter{0.25};
  if (det < quarter - Real(kDeterminantSlack) * scale * scale) {
    throw DomainError(std::string("discord: ") + what + " below the uncertainty bound");
  }
  return std::max(det, quarter);
}

}  // namespace detail

template <typename Real>
Real discord_from_emin(const TwoModeInvariants<Real>& inv, Real emin) {
  using std::max;
  using std::sqrt;
  const Real two{2};
  const Real i2 = detail::floor_quarter(inv.i2, inv.scale, "I2");
  const Real e = detail::floor_quarter(emin, inv.scale, "E_min");
  return entropy_h(two * sqrt(i2)) - entropy_h(two * max(inv.d_minus, Real(0.5))) - entropy_h(two * inv.d_plus) +
         entropy_h(two * sqrt(e));
}

/// Gaussian quantum discord with a Gaussian measurement on `measured`.
namespace detail {

template <typename Real>
Real discord_of(const TwoModeInvariants<Real>& inv, EminForm form) {
  using std::max;
  // Discord is bounded by the entropy of the measured mode, which is below
  // ~1e-8 here; the E_min formulas are 0/0 in this limit.
  if (inv.i2 - Real(0.25) <= Real(1e-10)) return Real(0);
  return max(Real(0), discord_from_emin(inv, emin_branches(inv).selected(form)));
}

}  // namespace detail

template <typename Real>
Real gaussian_discord(const TwoMode<Real>& s, Measured measured = Measured::Second,
                      EminForm form = EminForm::Homodyne) {
  const auto inv = two_mode_invariants(s, measured);
  detail::require_physical(inv, "gaussian_discord");
  return detail::discord_of(inv, form);
}

template <typename Real = double>
struct PairCorrelations {
  Real discord{0};
  Real negativity{0};
};

/// Discord (measuring the second mode) and log-negativity from one set of
/// invariants.
template <typename Real>
PairCorrelations<Real> pair_correlations(const TwoMode<Real>& s, EminForm form = EminForm::Homodyne) {
  using std::log;
  using std::max;
  const auto inv = two_mode_invariants(s, Measured::Second);
  detail::require_physical(inv, "pair_correlations");
  return {detail::discord_of(inv, form), max(Real(0), -log(Real(2) * partial_transpose_min_eigenvalue(s)))};
}

}  // namespace qhe
