#pragma once

// Symplectic propagators S (sigma -> S sigma S^T) for the strokes of the
// three-oscillator Otto cycle, in the order (x1, x2, x3, p1, p2, p3).

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/airy.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <sstream>
#include <string_view>

#include "qhe/errors.hpp"
#include "qhe/gaussian.hpp"

namespace qhe {

enum class StrokeKind { Compression, Heating, Expansion, Cooling, Free };

inline std::string_view to_string(StrokeKind k) {
  switch (k) {
    case StrokeKind::Compression: return "compression";
    case StrokeKind::Heating: return "heating";
    case StrokeKind::Expansion: return "expansion";
    case StrokeKind::Cooling: return "cooling";
    case StrokeKind::Free: return "free";
  }
  return "?";
}

template <typename Real = double>
struct SymplecticPropagator {
  Matrix<6, Real> s = Matrix<6, Real>::Identity();
  Real duration{0};
  StrokeKind label{StrokeKind::Free};

  /// max |S Omega S^T - Omega|.
  Real symplectic_defect() const {
    const auto omega = symplectic_form<3, Real>();
    return (s * omega * s.transpose() - omega).cwiseAbs().maxCoeff();
  }

  /// `this` applied after `earlier`.
  SymplecticPropagator after(const SymplecticPropagator& earlier) const {
    return {s * earlier.s, duration + earlier.duration, label};
  }
};

namespace detail {

template <typename Real>
void set_free_rotation(Matrix<6, Real>& s, int mode, Real omega, Real t) {
  using std::cos;
  using std::sin;
  const Real c = cos(omega * t), sn = sin(omega * t);
  s(mode, mode) = c;
  s(mode, 3 + mode) = sn / omega;
  s(3 + mode, mode) = -omega * sn;
  s(3 + mode, 3 + mode) = c;
}

}  // namespace detail

/// Free evolution of all three oscillators at fixed frequencies.
template <typename Real>
SymplecticPropagator<Real> free_propagator(const std::array<Real, 3>& omegas, Real t) {
  if (t < 0) throw DomainError("free_propagator: negative time");
  SymplecticPropagator<Real> p;
  p.s.setZero();
  for (int k = 0; k < 3; ++k) detail::set_free_rotation(p.s, k, omegas[k], t);
  p.duration = t;
  p.label = StrokeKind::Free;
  return p;
}

// ---------------------------------------------------------------------------
// Resonant beam-splitter coupling

enum class CouplingPair {
  Hot,   ///< oscillators 1-2 at omega1, spectator 3
  Cold,  ///< oscillators 2-3 at omega3, spectator 1
};

/// exp(A t) for H_ii + H_jj + alpha (a_i^dag a_j + a_i a_j^dag) with both
/// coupled oscillators at `omega_res`; the spectator rotates freely.
template <typename Real>
SymplecticPropagator<Real> coupling_propagator(Real alpha, Real omega_res, Real omega_spec, Real t, CouplingPair which) {
  using std::cos;
  using std::sin;
  if (alpha < 0) throw DomainError("coupling_propagator: negative coupling");
  if (t < 0) throw DomainError("coupling_propagator: negative time");
  if (!(omega_res > 0) || !(omega_spec > 0)) throw DomainError("coupling_propagator: frequencies must be positive");

  const int i = which == CouplingPair::Hot ? 0 : 1;
  const int j = i + 1;
  const int spectator = which == CouplingPair::Hot ? 2 : 0;
  const int pi = 3 + i, pj = 3 + j;
  const Real w = omega_res;
  const Real ca = cos(alpha * t), sa = sin(alpha * t);
  const Real cw = cos(w * t), sw = sin(w * t);

  SymplecticPropagator<Real> p;
  auto& s = p.s;
  s.setZero();
  s(i, i) = ca * cw;        s(i, j) = -sa * sw;       s(i, pi) = ca * sw / w;   s(i, pj) = sa * cw / w;
  s(j, i) = -sa * sw;       s(j, j) = ca * cw;        s(j, pi) = sa * cw / w;   s(j, pj) = ca * sw / w;
  s(pi, i) = -w * ca * sw;  s(pi, j) = -w * sa * cw;  s(pi, pi) = ca * cw;      s(pi, pj) = -sa * sw;
  s(pj, i) = -w * sa * cw;  s(pj, j) = -w * ca * sw;  s(pj, pi) = -sa * sw;     s(pj, pj) = ca * cw;
  detail::set_free_rotation(s, spectator, omega_spec, t);
  p.duration = t;
  p.label = which == CouplingPair::Hot ? StrokeKind::Heating : StrokeKind::Cooling;
  return p;
}

/// Generator A = Omega H of the coupled stroke, for cross-checks.
template <typename Real>
Matrix<6, Real> coupling_generator(Real alpha, Real omega_res, Real omega_spec, CouplingPair which) {
  const int i = which == CouplingPair::Hot ? 0 : 1;
  const int j = i + 1;
  const int spectator = which == CouplingPair::Hot ? 2 : 0;
  Matrix<6, Real> h = Matrix<6, Real>::Zero();
  for (int k : {i, j}) {
    h(k, k) = omega_res * omega_res;
    h(3 + k, 3 + k) = Real(1);
  }
  h(spectator, spectator) = omega_spec * omega_spec;
  h(3 + spectator, 3 + spectator) = Real(1);
  // alpha (a_i^dag a_j + h.c.) = alpha (omega x_i x_j + p_i p_j / omega)
  h(i, j) = h(j, i) = alpha * omega_res;
  h(3 + i, 3 + j) = h(3 + j, 3 + i) = alpha / omega_res;
  return symplectic_form<3, Real>() * h;
}

// ---------------------------------------------------------------------------
// Frequency ramps of oscillator 2: omega_2^2(t) linear in t

enum class RampMode { Sudden, LinearAiry, QuasiStaticAsymptotic };

/// Rotation angle used by the quasi-static asymptotic propagator.
///
/// `Wkb` is the accumulated phase, the integral of omega_2(t) over the ramp:
/// (2/3) tau (w_f^2 + w_i w_f + w_i^2) / (w_i + w_f). `AsPrinted` repeats
/// w_f^2 in place of w_i^2; kept for comparison only.
enum class PhaseForm { Wkb, AsPrinted };

inline constexpr double kDegenerateRampTolerance = 1e-9;

template <typename Real = double>
struct RampSchedule {
  Real omega_in{1};
  Real omega_fin{1};
  Real duration{0};
  RampMode mode{RampMode::LinearAiry};
  Real omega1{1};  // spectator frequencies
  Real omega3{1};
  PhaseForm phase{PhaseForm::Wkb};

  void validate() const {
    if (!(omega_in > 0) || !(omega_fin > 0) || !(omega1 > 0) || !(omega3 > 0)) {
      throw DomainError("ramp schedule: frequencies must be positive");
    }
    if (duration < 0) throw DomainError("ramp schedule: negative duration");
    if (mode == RampMode::Sudden && duration != Real(0)) {
      throw DomainError("ramp schedule: a sudden ramp has zero duration");
    }
  }

  Real omega2_squared(Real t) const {
    return omega_in * omega_in + (omega_fin * omega_fin - omega_in * omega_in) * t / duration;
  }
  Real omega2(Real t) const {
    using std::sqrt;
    return duration == Real(0) ? omega_fin : sqrt(omega2_squared(t));
  }
  bool degenerate() const {
    using std::abs;
    return abs(omega_in - omega_fin) < Real(kDegenerateRampTolerance);
  }
};

/// Fundamental solutions of xdd = -omega_2(t)^2 x for the linear ramp:
/// x(0) = 0, xd(0) = 1 and y(0) = 1, yd(0) = 0.
template <typename Real = double>
struct RampSolution {
  Real x{0}, y{1}, xdot{1}, ydot{0};
};

/// Closed-form ramp solution in terms of Airy functions Ai, Bi, Ai', Bi'.
/// Throws DegenerateRamp when omega_in and omega_fin coincide.
template <typename Real>
RampSolution<Real> ramp_xy(Real omega_in, Real omega_fin, Real tau, Real t) {
  using boost::math::airy_ai;
  using boost::math::airy_ai_prime;
  using boost::math::airy_bi;
  using boost::math::airy_bi_prime;
  using std::abs;
  using std::cbrt;
  if (abs(omega_in - omega_fin) < Real(kDegenerateRampTolerance)) {
    throw DegenerateRamp("ramp_xy: initial and final frequency coincide");
  }
  if (!(tau > 0)) throw DomainError("ramp_xy: ramp duration must be positive");
  if (t < 0 || t > tau * (Real(1) + Real(1e-12))) throw DomainError("ramp_xy: time outside the ramp");
  const Real pi = boost::math::constants::pi<Real>();

  // k = tau / (w_in^2 - w_fin^2); z(t) = -w_2(t)^2 k^{2/3} and dz/dt = k^{-1/3}.
  const Real k = tau / (omega_in * omega_in - omega_fin * omega_fin);
  const Real k13 = cbrt(k);
  const Real k23 = k13 * k13;
  const Real w = -omega_in * omega_in * k23;
  const Real w2t = omega_in * omega_in + (omega_fin * omega_fin - omega_in * omega_in) * (t / tau);
  const Real z = -w2t * k23;
  const Real dz = Real(1) / k13;

  const Real ai_w = airy_ai(w), bi_w = airy_bi(w), aip_w = airy_ai_prime(w), bip_w = airy_bi_prime(w);
  const Real ai_z = airy_ai(z), bi_z = airy_bi(z), aip_z = airy_ai_prime(z), bip_z = airy_bi_prime(z);

  RampSolution<Real> r;
  r.x = -pi * k13 * (ai_z * bi_w - ai_w * bi_z);
  r.xdot = -pi * k13 * (aip_z * bi_w - ai_w * bip_z) * dz;
  r.y = -pi * (bi_z * aip_w - ai_z * bip_w);
  r.ydot = -pi * (bip_z * aip_w - aip_z * bip_w) * dz;
  return r;
}

template <typename Real>
Real quasi_static_phase(Real omega_in, Real omega_fin, Real tau, PhaseForm form) {
  const Real lead = form == PhaseForm::Wkb ? omega_in * omega_in : omega_fin * omega_fin;
  return Real(2) / Real(3) * tau * (omega_fin * omega_fin + omega_in * omega_fin + lead) / (omega_fin + omega_in);
}

namespace detail {

template <typename Real>
SymplecticPropagator<Real> ramp_from_block(const RampSchedule<Real>& sch, Real t, Real a, Real b, Real c, Real d) {
  SymplecticPropagator<Real> p;
  p.s.setZero();
  set_free_rotation(p.s, 0, sch.omega1, t);
  set_free_rotation(p.s, 2, sch.omega3, t);
  p.s(1, 1) = a;
  p.s(1, 4) = b;
  p.s(4, 1) = c;
  p.s(4, 4) = d;
  p.duration = t;
  p.label = sch.omega_fin > sch.omega_in ? StrokeKind::Compression : StrokeKind::Expansion;
  return p;
}

}  // namespace detail

/// Propagator from the start of the ramp to time t in [0, duration].
template <typename Real>
SymplecticPropagator<Real> ramp_propagator_at(const RampSchedule<Real>& sch, Real t) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  sch.validate();
  if (t < 0 || t > sch.duration) throw DomainError("ramp_propagator_at: time outside the ramp");

  if (sch.mode == RampMode::Sudden || t == Real(0)) {
    auto p = detail::ramp_from_block(sch, Real(0), Real(1), Real(0), Real(0), Real(1));
    return p;
  }
  if (sch.degenerate()) {
    const Real w = sch.omega_in;
    return detail::ramp_from_block(sch, t, cos(w * t), sin(w * t) / w, -w * sin(w * t), cos(w * t));
  }
  if (sch.mode == RampMode::LinearAiry) {
    const auto r = ramp_xy(sch.omega_in, sch.omega_fin, sch.duration, t);
    return detail::ramp_from_block(sch, t, r.y, r.x, r.ydot, r.xdot);
  }
  // Quasi-static: squeeze by sqrt(w_in / w(t)) combined with a rotation.
  const Real wi = sch.omega_in;
  const Real wf = sch.omega2(t);
  const Real phi = quasi_static_phase(wi, wf, t, sch.phase);
  const Real cp = cos(phi), sp = sin(phi);
  return detail::ramp_from_block(sch, t, sqrt(wi / wf) * cp, sp / sqrt(wi * wf), -sqrt(wi * wf) * sp,
                                 sqrt(wf / wi) * cp);
}

template <typename Real>
SymplecticPropagator<Real> ramp_propagator(const RampSchedule<Real>& sch) {
  return ramp_propagator_at(sch, sch.duration);
}

// ---------------------------------------------------------------------------
// Numerical fundamental-matrix integration (independent of the Airy route)

/// Integrates dS/dt = A(t) S over the ramp with an adaptive Dormand-Prince
/// stepper at relative and absolute tolerance `tol`.
template <typename Real>
SymplecticPropagator<Real> ode_propagator(const RampSchedule<Real>& sch, Real tol) {
  namespace odeint = boost::numeric::odeint;
  sch.validate();
  if (!(tol >= Real(1e-12) && tol <= Real(1e-6))) throw DomainError("ode_propagator: tolerance outside [1e-12, 1e-6]");
  using State = std::array<Real, 36>;

  SymplecticPropagator<Real> p;
  p.duration = sch.duration;
  p.label = sch.omega_fin > sch.omega_in ? StrokeKind::Compression : StrokeKind::Expansion;
  if (sch.duration == Real(0)) return p;

  const std::array<Real, 3> w2_fixed{sch.omega1 * sch.omega1, Real(0), sch.omega3 * sch.omega3};
  auto rhs = [&](const State& s, State& ds, Real t) {
    // Row-major 6x6; top rows: dx/dt = p, bottom rows: dp/dt = -w^2 x.
    const Real w2[3] = {w2_fixed[0], sch.omega2_squared(t), w2_fixed[2]};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 6; ++c) {
        ds[r * 6 + c] = s[(3 + r) * 6 + c];
        ds[(3 + r) * 6 + c] = -w2[r] * s[r * 6 + c];
      }
    }
  };

  State state{};
  for (int d = 0; d < 6; ++d) state[d * 6 + d] = Real(1);
  try {
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State, Real, State, Real>());
    odeint::integrate_adaptive(stepper, rhs, state, Real(0), sch.duration, sch.duration * Real(1e-3));
  } catch (const std::exception& e) {
    throw IntegrationFailure(std::string("ode_propagator: ") + e.what());
  }
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) p.s(r, c) = state[r * 6 + c];

  // Local errors accumulate over the oscillations of the fastest mode.
  const Real scale = std::max(Real(1), p.s.cwiseAbs().maxCoeff());
  const Real w_max = std::max({sch.omega1, sch.omega3, sch.omega_in, sch.omega_fin});
  const Real allowed = Real(10) * tol * scale * scale * (Real(1) + w_max * sch.duration);
  if (p.symplectic_defect() > allowed) {
    std::ostringstream msg;
    msg << "ode_propagator: symplectic defect " << p.symplectic_defect() << " exceeds " << allowed;
    throw IntegrationFailure(msg.str());
  }
  return p;
}

}  // namespace qhe
