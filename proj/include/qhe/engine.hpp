#pragma once

// Four-stroke Otto cycle of the working oscillator (2) between a finite hot
// oscillator (1) and a finite cold oscillator (3).

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "qhe/correlations.hpp"
#include "qhe/energetics.hpp"
#include "qhe/errors.hpp"
#include "qhe/gaussian.hpp"
#include "qhe/propagators.hpp"

namespace qhe {

template <typename Real = double>
struct WorkNonNegative {
  Real epsilon{0};
};

struct FixedCycles {
  long cycles{1};
};

template <typename Real = double>
using StopRule = std::variant<WorkNonNegative<Real>, FixedCycles>;

/// Pairs in reporting order: 12, 23, 13. Discord D_ij measures oscillator j.
inline constexpr std::array<std::array<int, 2>, 3> kPairs{{{0, 1}, {1, 2}, {0, 2}}};

template <typename Real = double>
struct EngineParams {
  Real alpha12{0};
  Real alpha23{0};
  Real tau_comp{0};  // expansion takes the same time; ignored for sudden ramps
  Real tau_hot{0};
  Real tau_cold{0};
  RampMode ramp{RampMode::QuasiStaticAsymptotic};
  PhaseForm phase{PhaseForm::Wkb};
  Preparation<Real> prep{};
  StopRule<Real> stop{WorkNonNegative<Real>{}};
  int samples_per_stroke{20};  // interior sample points per stroke
  bool track_correlations{true};
  bool record_timeseries{true};
  long max_cycles{10000};

  Real omega1() const { return prep.omega1; }
  Real omega3() const { return prep.omega3; }
  Real ramp_duration() const { return ramp == RampMode::Sudden ? Real(0) : tau_comp; }

  void validate() const {
    prep.validate();
    if (!(omega3() < omega1())) throw DomainError("engine: need omega3 < omega1");
    if (alpha12 < 0 || alpha23 < 0) throw DomainError("engine: couplings must be non-negative");
    if (tau_comp < 0 || tau_hot < 0 || tau_cold < 0) throw DomainError("engine: durations must be non-negative");
    if (samples_per_stroke < 0) throw DomainError("engine: negative sample count");
    if (max_cycles < 1) throw DomainError("engine: cycle cap must be positive");
    if (const auto* f = std::get_if<FixedCycles>(&stop); f && f->cycles < 0) {
      throw DomainError("engine: negative cycle count");
    }
  }

  /// Parameters of the optimized many-cycle run: omega3 = 0.1, beta1 = 1e-2,
  /// oscillators 2 and 3 in their ground state.
  static EngineParams optimized_run() {
    EngineParams p;
    p.alpha12 = Real(0.038);
    p.alpha23 = Real(1e-4);
    p.tau_comp = Real(85.02);
    p.tau_hot = Real(0.59);
    p.tau_cold = Real(0.9996);
    p.prep = Preparation<Real>::hot_thermal(Real(1e-2), Real(0.1));
    return p;
  }
};

template <typename Real = double>
struct CorrelationSnapshot {
  std::array<Real, 3> discord{};     // D12, D23, D13
  std::array<Real, 3> negativity{};  // N12, N23, N13

  void take_max(const CorrelationSnapshot& o) {
    for (int k = 0; k < 3; ++k) {
      discord[k] = std::max(discord[k], o.discord[k]);
      negativity[k] = std::max(negativity[k], o.negativity[k]);
    }
  }
};

template <typename Real>
CorrelationSnapshot<Real> correlations_of(const ThreeMode<Real>& sigma) {
  CorrelationSnapshot<Real> c;
  for (int k = 0; k < 3; ++k) {
    const auto pc = pair_correlations(restrict(sigma, kPairs[k][0], kPairs[k][1]));
    c.discord[k] = pc.discord;
    c.negativity[k] = pc.negativity;
  }
  return c;
}

template <typename Real = double>
struct TimeSample {
  Real t{0};
  std::array<Real, 3> energy{};
  CorrelationSnapshot<Real> corr{};
};

template <typename Real = double>
struct StrokeResult {
  StrokeKind kind{StrokeKind::Free};
  Real e2_before{0}, e2_after{0};        // oscillator 2, instantaneous frequency
  Real total_before{0}, total_after{0};  // sum of local energies
  CorrelationSnapshot<Real> max_corr{};
};

template <typename Real = double>
struct CycleRecord {
  long index{0};
  Real w1{0}, w2{0}, q1{0}, q2{0}, delta_u{0};
  Real w_cycle{0}, w_cum{0};
  EfficiencyResult<Real> eta{};
  std::array<Real, 3> energy{};  // at the end of the cycle
  CorrelationSnapshot<Real> max_corr{};

  Real first_law_residual() const { return w1 + w2 - q1 - q2 - delta_u; }
};

/// Stateful cycle driver. Strokes must be applied in the order
/// compression, heating, expansion, cooling.
template <typename Real = double>
class OttoEngine {
 public:
  explicit OttoEngine(const EngineParams<Real>& params)
      : params_(params), sigma_(product_state(params.prep)) {
    params_.validate();
    build_strokes();
    if (params_.record_timeseries) series_.push_back(sample(sigma_, Real(0)));
  }

  const EngineParams<Real>& params() const { return params_; }
  const ThreeMode<Real>& state() const { return sigma_; }
  Real time() const { return time_; }
  StrokeKind next_stroke() const { return kOrder[phase_]; }
  Real omega2() const { return phase_ == 1 || phase_ == 2 ? params_.omega1() : params_.omega3(); }
  std::array<Real, 3> frequencies() const { return {params_.omega1(), omega2(), params_.omega3()}; }
  std::array<Real, 3> energies() const { return mode_energies(sigma_, frequencies()); }
  const std::vector<TimeSample<Real>>& series() const { return series_; }
  std::vector<TimeSample<Real>>& series() { return series_; }

  /// Full-stroke propagator for `kind`.
  const SymplecticPropagator<Real>& stroke_propagator(StrokeKind kind) const {
    return strokes_[index_of(kind)].back();
  }

  StrokeResult<Real> run_stroke(StrokeKind kind) {
    if (kind != next_stroke()) {
      throw PhaseError(std::string("stroke ") + std::string(to_string(kind)) + " applied while expecting " +
                       std::string(to_string(next_stroke())));
    }
    const auto& props = strokes_[phase_];
    StrokeResult<Real> r;
    r.kind = kind;
    const auto e_before = energies();
    r.e2_before = e_before[1];
    r.total_before = e_before[0] + e_before[1] + e_before[2];
    if (params_.track_correlations) r.max_corr = correlations_of(sigma_);

    const bool sampling = params_.track_correlations || params_.record_timeseries;
    const Real t0 = time_;
    if (sampling) {
      for (std::size_t k = 0; k + 1 < props.size(); ++k) {
        const auto s = sigma_.transformed(props[k].s);
        const Real t = t0 + props[k].duration;
        const auto ts = sample(s, t, omega2_during(kind, props[k].duration));
        r.max_corr.take_max(ts.corr);
        if (params_.record_timeseries) series_.push_back(ts);
      }
    }
    sigma_ = sigma_.transformed(props.back().s);
    time_ = t0 + props.back().duration;
    phase_ = (phase_ + 1) % 4;

    const auto e_after = energies();
    r.e2_after = e_after[1];
    r.total_after = e_after[0] + e_after[1] + e_after[2];
    if (sampling) {
      const auto ts = sample(sigma_, time_);
      r.max_corr.take_max(ts.corr);
      if (params_.record_timeseries) series_.push_back(ts);
    }
    return r;
  }

  CycleRecord<Real> run_cycle() {
    if (phase_ != 0) throw PhaseError("run_cycle: engine is not at the start of a cycle");
    CycleRecord<Real> rec;
    rec.index = ++cycles_;
    const auto comp = run_stroke(StrokeKind::Compression);
    const auto heat = run_stroke(StrokeKind::Heating);
    const auto expn = run_stroke(StrokeKind::Expansion);
    const auto cool = run_stroke(StrokeKind::Cooling);
    rec.w1 = comp.e2_after - comp.e2_before;
    rec.q1 = heat.e2_before - heat.e2_after;
    rec.w2 = expn.e2_after - expn.e2_before;
    rec.q2 = cool.e2_before - cool.e2_after;
    rec.delta_u = cool.e2_after - comp.e2_before;
    rec.w_cycle = rec.w1 + rec.w2;
    rec.eta = efficiency(rec.w_cycle, rec.delta_u, rec.q1, rec.q2);
    rec.energy = energies();
    for (const auto* s : {&comp, &heat, &expn, &cool}) rec.max_corr.take_max(s->max_corr);
    return rec;
  }

 private:
  static constexpr std::array<StrokeKind, 4> kOrder{StrokeKind::Compression, StrokeKind::Heating,
                                                     StrokeKind::Expansion, StrokeKind::Cooling};

  static std::size_t index_of(StrokeKind k) {
    return static_cast<std::size_t>(std::find(kOrder.begin(), kOrder.end(), k) - kOrder.begin());
  }

  RampSchedule<Real> schedule(bool compression) const {
    RampSchedule<Real> s;
    s.omega_in = compression ? params_.omega3() : params_.omega1();
    s.omega_fin = compression ? params_.omega1() : params_.omega3();
    s.duration = params_.ramp_duration();
    s.mode = params_.ramp;
    s.omega1 = params_.omega1();
    s.omega3 = params_.omega3();
    s.phase = params_.phase;
    return s;
  }

  /// Propagators from the stroke start to each sample time; the last entry
  /// spans the whole stroke.
  void build_strokes() {
    const bool sampling = params_.track_correlations || params_.record_timeseries;
    const int n = sampling ? params_.samples_per_stroke : 0;
    const Real w1 = params_.omega1(), w3 = params_.omega3();
    for (std::size_t k = 0; k < 4; ++k) {
      const StrokeKind kind = kOrder[k];
      Real duration{0};
      switch (kind) {
        case StrokeKind::Compression:
        case StrokeKind::Expansion: duration = params_.ramp_duration(); break;
        case StrokeKind::Heating: duration = params_.tau_hot; break;
        default: duration = params_.tau_cold; break;
      }
      const int steps = duration > Real(0) ? n + 1 : 1;
      auto& out = strokes_[k];
      out.clear();
      for (int i = 1; i <= steps; ++i) {
        const Real t = i == steps ? duration : duration * Real(i) / Real(steps);
        switch (kind) {
          case StrokeKind::Compression: out.push_back(ramp_propagator_at(schedule(true), t)); break;
          case StrokeKind::Expansion: out.push_back(ramp_propagator_at(schedule(false), t)); break;
          case StrokeKind::Heating:
            out.push_back(coupling_propagator(params_.alpha12, w1, w3, t, CouplingPair::Hot));
            break;
          default: out.push_back(coupling_propagator(params_.alpha23, w3, w1, t, CouplingPair::Cold)); break;
        }
      }
    }
  }

  Real omega2_during(StrokeKind kind, Real t) const {
    switch (kind) {
      case StrokeKind::Compression: return schedule(true).omega2(t);
      case StrokeKind::Expansion: return schedule(false).omega2(t);
      case StrokeKind::Heating: return params_.omega1();
      default: return params_.omega3();
    }
  }

  TimeSample<Real> sample(const ThreeMode<Real>& s, Real t, std::optional<Real> w2 = std::nullopt) const {
    TimeSample<Real> ts;
    ts.t = t;
    ts.energy = mode_energies(s, {params_.omega1(), w2.value_or(omega2()), params_.omega3()});
    if (params_.track_correlations) ts.corr = correlations_of(s);
    return ts;
  }

  EngineParams<Real> params_;
  ThreeMode<Real> sigma_;
  Real time_{0};
  std::size_t phase_{0};
  long cycles_{0};
  std::array<std::vector<SymplecticPropagator<Real>>, 4> strokes_;
  std::vector<TimeSample<Real>> series_;
};

template <typename Real = double>
struct EngineRun {
  std::vector<CycleRecord<Real>> cycles;
  std::vector<TimeSample<Real>> series;
  ThreeMode<Real> final_state = ThreeMode<Real>::trusted(Matrix<6, Real>::Identity() / Real(2));
  bool hit_cycle_cap{false};

  Real total_work() const { return cycles.empty() ? Real(0) : cycles.back().w_cum; }
};

/// Runs cycles until the stop rule fires. Under WorkNonNegative the first
/// cycle with W_cycle >= -epsilon is discarded and ends the run.
template <typename Real>
EngineRun<Real> run_engine(const EngineParams<Real>& params) {
  OttoEngine<Real> engine(params);
  EngineRun<Real> run;
  Real w_cum{0};
  if (const auto* fixed = std::get_if<FixedCycles>(&params.stop)) {
    for (long n = 0; n < fixed->cycles; ++n) {
      auto rec = engine.run_cycle();
      w_cum += rec.w_cycle;
      rec.w_cum = w_cum;
      run.cycles.push_back(rec);
    }
  } else {
    const Real eps = std::get<WorkNonNegative<Real>>(params.stop).epsilon;
    for (;;) {
      if (static_cast<long>(run.cycles.size()) >= params.max_cycles) {
        run.hit_cycle_cap = true;
        break;
      }
      const std::size_t mark = engine.series().size();
      auto rec = engine.run_cycle();
      if (rec.w_cycle >= -eps) {
        engine.series().resize(mark);
        break;
      }
      w_cum += rec.w_cycle;
      rec.w_cum = w_cum;
      run.cycles.push_back(rec);
    }
  }
  run.series = std::move(engine.series());
  run.final_state = engine.state();
  return run;
}

}  // namespace qhe
