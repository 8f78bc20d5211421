#pragma once

// Closed-form single-cycle predictions in the weak-coupling regime (second
// order in alpha12 * tau_H). They serve as oracles for the simulator.

#include <cmath>
#include <limits>

#include "qhe/errors.hpp"

namespace qhe::analytics {

/// Parameters of a weak-coupling single cycle. Thermal oscillators are given
/// by c_i = coth(beta_i omega_i / 2) (>= 1), squeezed ones by r_i.
/// Oscillators 2 and 3 share the same initial state.
template <typename Real = double>
struct WeakCouplingInput {
  Real omega1{1};
  Real omega3{Real(0.1)};
  Real alpha12{0};
  Real tau_hot{0};
  Real c1{1}, c3{1};
  Real r1{0}, r3{0};

  Real a() const { return Real(2) * alpha12 * tau_hot * alpha12 * tau_hot; }
};

/// Work after one cycle with sudden ramps, thermal preparation.
template <typename Real>
Real work_one_cycle_thermal(const WeakCouplingInput<Real>& in) {
  const Real w1 = in.omega1, w3 = in.omega3, a2 = in.alpha12 * in.alpha12;
  const Real pre = in.tau_hot * in.tau_hot * (w1 * w1 - w3 * w3) / (Real(4) * w1 * w3);
  return pre * (w1 * (a2 + w1 * w1 - w3 * w3) * in.c3 - a2 * w3 * in.c1);
}

/// Work after one cycle with sudden ramps, squeezed-vacuum preparation.
template <typename Real>
Real work_one_cycle_squeezed(const WeakCouplingInput<Real>& in) {
  using std::exp;
  const Real w1 = in.omega1, w3 = in.omega3, a2 = in.alpha12 * in.alpha12;
  const Real pre = in.tau_hot * in.tau_hot * (w1 * w1 - w3 * w3) / (Real(4) * w1 * w3);
  return pre * (w1 * (a2 + w1 * w1 - exp(Real(4) * in.r3) * w3 * w3) * exp(Real(-2) * in.r3) -
                a2 * w3 * exp(Real(2) * in.r1));
}

/// Minimum hot-oscillator excitation X (c1 or e^{2 r1}) for net extraction
/// when oscillators 2 and 3 start in their ground state. +inf when alpha12 = 0.
template <typename Real>
Real extraction_threshold(Real omega1, Real omega3, Real alpha12) {
  if (alpha12 == Real(0)) return std::numeric_limits<Real>::infinity();
  return omega1 / omega3 * (Real(1) + (omega1 * omega1 - omega3 * omega3) / (alpha12 * alpha12));
}

template <typename Real>
bool extraction_predicted(Real x, Real omega1, Real omega3, Real alpha12) {
  return x > extraction_threshold(omega1, omega3, alpha12);
}

/// Smallest partially transposed symplectic eigenvalue of oscillators 1-2
/// after the heating stroke, sudden ramps, thermal preparation. The formula
/// is singular at c1 = c3; that input is rejected.
template <typename Real>
Real nu12_sudden_thermal(const WeakCouplingInput<Real>& in) {
  const Real w1 = in.omega1, w3 = in.omega3, c1 = in.c1, c3 = in.c3, a = in.a();
  if (c1 == c3) throw DomainError("nu12_sudden_thermal: undefined for c1 == c3");
  const Real num = (Real(1) + a) * w1 * w3 * c1 * c1 - a * (w1 * w1 + w3 * w3) * c1 * c3 -
                   (Real(1) - a) * w1 * w3 * c3 * c3;
  return c3 * num / (Real(2) * w1 * w3 * (c1 * c1 - c3 * c3));
}

/// Entanglement condition for c3 -> 1 as stated alongside the thermal
/// eigenvalue: coth(beta1 omega1) < (omega1^2 + omega3^2) / (2 omega1 omega3).
/// `beta1_omega1` is the product beta1 * omega1.
template <typename Real>
bool thermal_entanglement_predicate(Real beta1_omega1, Real omega1, Real omega3) {
  using std::tanh;
  return Real(1) / tanh(beta1_omega1) < (omega1 * omega1 + omega3 * omega3) / (Real(2) * omega1 * omega3);
}

template <typename Real>
Real nu12_sudden_squeezed(const WeakCouplingInput<Real>& in) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  const Real w1 = in.omega1, w3 = in.omega3, a = in.a(), rs = in.r1 + in.r3;
  const Real phi = abs(w1 - exp(Real(2) * rs) * w3);
  return Real(0.5) - sqrt(a) * exp(-rs) * phi / (Real(2) * sqrt(Real(2) * w1 * w3)) +
         a * exp(Real(-2) * rs) * phi * phi / (Real(8) * w1 * w3);
}

/// Work after one cycle with quasi-static ramps, thermal preparation.
template <typename Real>
Real work_qs_thermal(const WeakCouplingInput<Real>& in) {
  const Real at = in.alpha12 * in.tau_hot;
  return Real(-0.5) * at * at * (in.omega1 - in.omega3) * (in.c1 - in.c3);
}

/// Work after one cycle with quasi-static ramps, squeezed preparation.
template <typename Real>
Real work_qs_squeezed(const WeakCouplingInput<Real>& in) {
  using std::exp;
  const Real at = in.alpha12 * in.tau_hot;
  return -at * at * (in.omega1 - in.omega3) / Real(4) * (exp(Real(2) * in.r1) - exp(Real(2) * in.r3)) *
         (Real(1) - exp(Real(-2) * (in.r1 + in.r3)));
}

/// Quasi-static thermal eigenvalue,
/// coth(b3 w3/2) {1/2 - (alpha tau)^2 sinh((b1 w1 - b3 w3)/2) / sinh((b1 w1 + b3 w3)/2)},
/// written in terms of e^{-beta_i omega_i} = (c_i - 1)/(c_i + 1) so that c3 = 1
/// (zero temperature) is exact.
template <typename Real>
Real nu12_qs_thermal(const WeakCouplingInput<Real>& in) {
  const Real e1 = (in.c1 - Real(1)) / (in.c1 + Real(1));
  const Real e3 = (in.c3 - Real(1)) / (in.c3 + Real(1));
  const Real ratio = (e3 - e1) / (Real(1) - e1 * e3);
  const Real at = in.alpha12 * in.tau_hot;
  return in.c3 * (Real(0.5) - at * at * ratio);
}

/// Quasi-static squeezed eigenvalue with r2 = r3 = 0: 1/2 - alpha tau sinh r1.
template <typename Real>
Real nu12_qs_squeezed_special(Real alpha12, Real tau_hot, Real r1) {
  using std::sinh;
  return Real(0.5) - alpha12 * tau_hot * sinh(r1);
}

}  // namespace qhe::analytics
