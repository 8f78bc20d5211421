#pragma once

// Box-constrained derivative-free optimization of the engine and seeded random
// parameter scans.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qhe/energetics.hpp"
#include "qhe/engine.hpp"
#include "qhe/errors.hpp"

namespace qhe::explore {

// ---------------------------------------------------------------------------
// Parameter box

template <typename Real = double>
struct Interval {
  Real lo{0};
  Real hi{0};

  bool fixed() const { return lo == hi; }
  bool contains(Real x) const { return lo <= x && x <= hi; }
};

enum class Param { Alpha12, Alpha23, TauHot, TauCold, TauComp, Omega3 };

inline std::string_view to_string(Param p) {
  switch (p) {
    case Param::Alpha12: return "alpha12";
    case Param::Alpha23: return "alpha23";
    case Param::TauHot: return "tau_hot";
    case Param::TauCold: return "tau_cold";
    case Param::TauComp: return "tau_comp";
    case Param::Omega3: return "omega3";
  }
  return "?";
}

/// Closed intervals per parameter in units of omega1. omega3 is only varied
/// when its interval is set. A degenerate interval (lo == hi) pins the value.
template <typename Real = double>
struct ParameterBox {
  Interval<Real> alpha12{Real(1e-4), Real(0.05)};
  Interval<Real> alpha23{Real(1e-4), Real(0.05)};
  Interval<Real> tau_hot{Real(1e-3), Real(1)};
  Interval<Real> tau_cold{Real(1e-3), Real(1)};
  Interval<Real> tau_comp{Real(1), Real(100)};
  std::optional<Interval<Real>> omega3{};

  /// The scan box: the defaults plus omega3 in [0.01, 0.99].
  static ParameterBox scan_default() {
    ParameterBox b;
    b.omega3 = Interval<Real>{Real(0.01), Real(0.99)};
    return b;
  }

  /// A box pinned to the point of `p` (omega3 included).
  static ParameterBox collapsed(const EngineParams<Real>& p) {
    ParameterBox b;
    b.alpha12 = {p.alpha12, p.alpha12};
    b.alpha23 = {p.alpha23, p.alpha23};
    b.tau_hot = {p.tau_hot, p.tau_hot};
    b.tau_cold = {p.tau_cold, p.tau_cold};
    b.tau_comp = {p.tau_comp, p.tau_comp};
    b.omega3 = Interval<Real>{p.omega3(), p.omega3()};
    return b;
  }

  std::vector<Param> params() const {
    std::vector<Param> out{Param::Alpha12, Param::Alpha23, Param::TauHot, Param::TauCold, Param::TauComp};
    if (omega3) out.push_back(Param::Omega3);
    return out;
  }

  const Interval<Real>& interval(Param p) const {
    switch (p) {
      case Param::Alpha12: return alpha12;
      case Param::Alpha23: return alpha23;
      case Param::TauHot: return tau_hot;
      case Param::TauCold: return tau_cold;
      case Param::TauComp: return tau_comp;
      case Param::Omega3: break;
    }
    if (!omega3) throw DomainError("parameter box: omega3 is not part of this box");
    return *omega3;
  }

  void validate() const {
    for (Param p : params()) {
      const auto& iv = interval(p);
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
        throw DomainError("parameter box: bad interval for " + std::string(to_string(p)));
      }
      if (iv.lo < 0) throw DomainError("parameter box: negative bound for " + std::string(to_string(p)));
    }
    if (omega3 && !(omega3->lo > 0)) throw DomainError("parameter box: omega3 must stay positive");
  }

  /// Physical value of each parameter for a point of the unit cube.
  std::vector<Real> to_physical(const std::vector<Real>& unit) const {
    const auto ps = params();
    std::vector<Real> out(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto& iv = interval(ps[k]);
      const Real u = std::clamp(unit[k], Real(0), Real(1));
      out[k] = iv.fixed() ? iv.lo : iv.lo + u * (iv.hi - iv.lo);
    }
    return out;
  }

  /// Writes physical values into a copy of `base`.
  EngineParams<Real> apply(const EngineParams<Real>& base, const std::vector<Real>& physical) const {
    EngineParams<Real> p = base;
    const auto ps = params();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const Real v = physical[k];
      switch (ps[k]) {
        case Param::Alpha12: p.alpha12 = v; break;
        case Param::Alpha23: p.alpha23 = v; break;
        case Param::TauHot: p.tau_hot = v; break;
        case Param::TauCold: p.tau_cold = v; break;
        case Param::TauComp: p.tau_comp = v; break;
        case Param::Omega3: p.prep.omega3 = v; break;
      }
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Deterministic random streams

/// 64-bit engine for substream `index` of `seed`. Streams for different
/// indices are independent of each other and of the order they are created in.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform on [0, 1) from the top 53 bits, so draws do not depend on the
/// standard library's distribution implementation.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Runs task(i) for i in [0, n) on `workers` threads. Tasks write their own
/// slot; the first exception is rethrown after all threads join.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Objective

enum class Objective { TotalWork, WorkErgotropyRatio };

/// W_T of a run under the WorkNonNegative rule, optionally divided by the
/// ergotropy of the initial state. Engines that fail numerically score 0.
template <typename Real = double>
class EngineObjective {
 public:
  EngineObjective(const ParameterBox<Real>& box, const EngineParams<Real>& base, Objective objective)
      : box_(box), base_(base), objective_(objective) {
    base_.stop = WorkNonNegative<Real>{};
    base_.track_correlations = false;
    base_.record_timeseries = false;
  }

  struct Evaluation {
    Real value{0};
    Real total_work{0};
    Real ergotropy{0};
    long cycles{0};
  };

  Evaluation operator()(const std::vector<Real>& unit) const {
    const auto params = box_.apply(base_, box_.to_physical(unit));
    Evaluation e;
    try {
      const auto run = run_engine(params);
      e.total_work = run.total_work();
      e.cycles = static_cast<long>(run.cycles.size());
    } catch (const std::exception&) {
      e.total_work = 0;
    }
    e.value = e.total_work;
    if (objective_ == Objective::WorkErgotropyRatio) {
      e.ergotropy = ergotropy_for(params.prep);
      e.value = e.ergotropy > 0 ? e.total_work / e.ergotropy : Real(0);
    }
    return e;
  }

  const ParameterBox<Real>& box() const { return box_; }
  const EngineParams<Real>& base() const { return base_; }

 private:
  Real ergotropy_for(const Preparation<Real>& prep) const {
    std::lock_guard lock(cache_mutex_);
    const auto key = static_cast<double>(prep.omega3);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const Real value = ergotropy(prep).value;
    cache_.emplace(key, value);
    return value;
  }

  ParameterBox<Real> box_;
  EngineParams<Real> base_;
  Objective objective_;
  mutable std::mutex cache_mutex_;
  mutable std::map<double, Real> cache_;
};

// ---------------------------------------------------------------------------
// Optimizer

enum class Method { NelderMead, DifferentialEvolution };

template <typename Real = double>
struct OptimizeOptions {
  Objective objective{Objective::TotalWork};
  Method method{Method::NelderMead};
  int restarts{16};
  long budget{20000};  // objective evaluations in total
  std::uint64_t seed{1};
  int workers{1};
  Real xtol{Real(1e-7)};  // simplex / population extent in unit-cube coordinates
  Real ftol{Real(1e-9)};
};

template <typename Real = double>
struct TracePoint {
  long evaluation{0};
  int restart{0};
  Real value{0};
  Real best{0};  // best value of this restart so far
};

template <typename Real = double>
struct OptimizeResult {
  EngineParams<Real> best;
  std::vector<Real> point;  // physical values in ParameterBox::params() order
  Real value{0};
  Real total_work{0};
  Real ergotropy{0};
  long cycles{0};
  long evaluations{0};
  bool converged{false};
  int best_restart{0};
  std::vector<TracePoint<Real>> trace;
};

namespace detail {

template <typename Real>
using UnitFunction = std::function<Real(const std::vector<Real>&)>;

template <typename Real>
struct LocalResult {
  std::vector<Real> unit;
  Real value{std::numeric_limits<Real>::infinity()};
  long evaluations{0};
  bool converged{false};
  std::vector<TracePoint<Real>> trace;
};

/// Counts evaluations against a budget and records the trace.
template <typename Real>
class Budgeted {
 public:
  Budgeted(const UnitFunction<Real>& f, long budget, int restart) : f_(f), budget_(budget), restart_(restart) {}

  bool exhausted() const { return out_.evaluations >= budget_; }

  Real operator()(std::vector<Real>& unit) {
    for (auto& u : unit) u = std::clamp(u, Real(0), Real(1));
    const Real v = f_(unit);
    ++out_.evaluations;
    if (v < out_.value) {
      out_.value = v;
      out_.unit = unit;
    }
    out_.trace.push_back({out_.evaluations, restart_, v, out_.value});
    return v;
  }

  LocalResult<Real>& result() { return out_; }

 private:
  const UnitFunction<Real>& f_;
  long budget_;
  int restart_;
  LocalResult<Real> out_;
};

/// Nelder-Mead on the unit cube; every proposal is projected onto the cube.
template <typename Real>
LocalResult<Real> nelder_mead(const UnitFunction<Real>& f, std::vector<Real> start, Real step, long budget,
                              Real xtol, Real ftol, int restart) {
  const std::size_t n = start.size();
  Budgeted<Real> g(f, budget, restart);
  if (n == 0 || budget <= 0) {
    if (budget > 0) {
      g(start);
      g.result().converged = true;
    }
    return g.result();
  }
  std::vector<std::vector<Real>> simplex{start};
  for (std::size_t k = 0; k < n; ++k) {
    auto v = start;
    v[k] += v[k] + step <= Real(1) ? step : -step;
    simplex.push_back(v);
  }
  std::vector<Real> fv;
  for (auto& v : simplex) {
    if (g.exhausted()) return g.result();
    fv.push_back(g(v));
  }
  const Real alpha = 1, gamma = 2, rho = Real(0.5), shrink = Real(0.5);
  std::vector<std::size_t> order(n + 1);
  while (!g.exhausted()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    Real extent{0};
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) extent = std::max(extent, std::abs(simplex[i][k] - simplex[best][k]));
    if (extent <= xtol && std::abs(fv[worst] - fv[best]) <= ftol * (Real(1) + std::abs(fv[best]))) {
      g.result().converged = true;
      break;
    }

    std::vector<Real> centroid(n, Real(0));
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / Real(n);
    }
    auto along = [&](Real t) {
      std::vector<Real> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      return v;
    };

    auto xr = along(-alpha);
    const Real fr = g(xr);
    if (fr < fv[best]) {
      if (g.exhausted()) break;
      auto xe = along(-alpha * gamma);
      const Real fe = g(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    if (g.exhausted()) break;
    auto xc = fr < fv[worst] ? along(-alpha * rho) : along(rho);
    const Real fc = g(xc);
    if (fc < std::min(fr, fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n && !g.exhausted(); ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + shrink * (simplex[i][k] - simplex[best][k]);
      fv[i] = g(simplex[i]);
    }
  }
  return g.result();
}

/// DE/rand/1/bin on the unit cube. Each generation's trial vectors are drawn
/// first and then evaluated, so results do not depend on the worker count.
template <typename Real>
LocalResult<Real> differential_evolution(const UnitFunction<Real>& f, std::size_t n, long budget,
                                         std::uint64_t seed, int workers, Real xtol, Real ftol) {
  const std::size_t pop = std::max<std::size_t>(8, 10 * n);
  const Real weight = Real(0.7), crossover = Real(0.9);
  auto rng = substream(seed, 0x0de0de);
  LocalResult<Real> out;
  if (n == 0) return nelder_mead(f, {}, Real(0), budget, xtol, ftol, 0);

  auto evaluate = [&](std::vector<std::vector<Real>>& xs) {
    std::vector<Real> vals(xs.size());
    parallel_for(xs.size(), workers, [&](std::size_t i) { vals[i] = f(xs[i]); });
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ++out.evaluations;
      if (vals[i] < out.value) {
        out.value = vals[i];
        out.unit = xs[i];
      }
      out.trace.push_back({out.evaluations, 0, vals[i], out.value});
    }
    return vals;
  };

  std::vector<std::vector<Real>> x(pop, std::vector<Real>(n));
  for (auto& v : x)
    for (auto& u : v) u = Real(unit_uniform(rng));
  if (static_cast<long>(pop) > budget) x.resize(static_cast<std::size_t>(std::max(0L, budget)));
  auto fx = evaluate(x);
  if (x.size() < pop) return out;

  auto pick = [&](std::size_t excl1, std::size_t excl2, std::size_t excl3) {
    for (;;) {
      const auto r = static_cast<std::size_t>(rng() % pop);
      if (r != excl1 && r != excl2 && r != excl3) return r;
    }
  };
  while (out.evaluations + static_cast<long>(pop) <= budget) {
    std::vector<std::vector<Real>> trial(pop, std::vector<Real>(n));
    for (std::size_t i = 0; i < pop; ++i) {
      const auto a = pick(i, i, i), b = pick(i, a, a), c = pick(i, a, b);
      const auto forced = static_cast<std::size_t>(rng() % n);
      for (std::size_t k = 0; k < n; ++k) {
        const bool take = k == forced || unit_uniform(rng) < crossover;
        trial[i][k] = take ? std::clamp(x[a][k] + weight * (x[b][k] - x[c][k]), Real(0), Real(1)) : x[i][k];
      }
    }
    const auto ft = evaluate(trial);
    for (std::size_t i = 0; i < pop; ++i) {
      if (ft[i] <= fx[i]) {
        x[i] = trial[i];
        fx[i] = ft[i];
      }
    }
    Real extent{0};
    for (std::size_t k = 0; k < n; ++k) {
      Real lo = 1, hi = 0;
      for (const auto& v : x) {
        lo = std::min(lo, v[k]);
        hi = std::max(hi, v[k]);
      }
      extent = std::max(extent, hi - lo);
    }
    const auto [fmin, fmax] = std::minmax_element(fx.begin(), fx.end());
    if (extent <= xtol && *fmax - *fmin <= ftol * (Real(1) + std::abs(*fmin))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Minimizes the objective over the box (most negative W_T). Nelder-Mead
/// restarts run as independent tasks, each from its own seeded start and with
/// an equal share of the budget; restart 0 starts from the box centre. The
/// result is converged only if every restart met the tolerances.
template <typename Real>
OptimizeResult<Real> optimize(const ParameterBox<Real>& box, const EngineParams<Real>& base,
                              const OptimizeOptions<Real>& opt = {}) {
  box.validate();
  if (opt.budget < 1) throw DomainError("optimize: budget must be positive");
  if (opt.restarts < 1) throw DomainError("optimize: need at least one restart");
  const EngineObjective<Real> f(box, base, opt.objective);
  const auto ps = box.params();
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < ps.size(); ++k)
    if (!box.interval(ps[k]).fixed()) free.push_back(k);

  // The local searches see only the free coordinates.
  auto embed = [&](const std::vector<Real>& sub) {
    std::vector<Real> full(ps.size(), Real(0));
    for (std::size_t j = 0; j < free.size(); ++j) full[free[j]] = sub[j];
    return full;
  };
  const detail::UnitFunction<Real> reduced = [&](const std::vector<Real>& sub) { return f(embed(sub)).value; };

  std::vector<detail::LocalResult<Real>> locals;
  if (opt.method == Method::DifferentialEvolution) {
    locals.push_back(detail::differential_evolution(reduced, free.size(), opt.budget, opt.seed, opt.workers,
                                                    opt.xtol, opt.ftol));
  } else {
    const int k = opt.restarts;
    locals.resize(static_cast<std::size_t>(k));
    parallel_for(static_cast<std::size_t>(k), opt.workers, [&](std::size_t r) {
      const long share = opt.budget / k + (static_cast<long>(r) < opt.budget % k ? 1 : 0);
      std::vector<Real> start(free.size(), Real(0.5));
      if (r > 0) {
        auto rng = substream(opt.seed, r);
        for (auto& u : start) u = Real(unit_uniform(rng));
      }
      locals[r] = detail::nelder_mead(reduced, start, Real(0.1), share, opt.xtol, opt.ftol, static_cast<int>(r));
    });
  }

  OptimizeResult<Real> res;
  res.converged = true;
  std::size_t best = 0;
  for (std::size_t r = 0; r < locals.size(); ++r) {
    res.evaluations += locals[r].evaluations;
    res.converged = res.converged && locals[r].converged;
    if (locals[r].value < locals[best].value) best = r;
  }
  long offset = 0;
  for (auto& l : locals) {
    for (auto tp : l.trace) {
      tp.evaluation += offset;
      res.trace.push_back(tp);
    }
    offset += l.evaluations;
  }
  res.best_restart = static_cast<int>(best);
  const auto unit = embed(locals[best].unit.empty() ? std::vector<Real>(free.size(), Real(0.5)) : locals[best].unit);
  res.point = box.to_physical(unit);
  res.best = box.apply(f.base(), res.point);
  const auto e = f(unit);
  res.value = e.value;
  res.total_work = e.total_work;
  res.ergotropy = e.ergotropy;
  res.cycles = e.cycles;
  return res;
}

// ---------------------------------------------------------------------------
// Random scans

enum class Family { Thermal, Squeezed };

inline std::string_view to_string(Family f) { return f == Family::Thermal ? "thermal" : "squeezed"; }

template <typename Real = double>
struct ScanOptions {
  Family family{Family::Thermal};
  long samples{0};
  std::uint64_t seed{1};
  int workers{1};
  Real beta1{Real(1e-2)};
  long max_cycles{10000};
  RampMode ramp{RampMode::QuasiStaticAsymptotic};
  PhaseForm phase{PhaseForm::Wkb};
  // Samples with alpha23 * tau_cold below this are flagged as excluded; they
  // are still run and recorded.
  Real min_alpha23_tau_cold{0};
};

template <typename Real = double>
struct ScanSample {
  long index{0};  // also the substream id
  EngineParams<Real> params;
  long cycles{0};
  Real total_work{0};
  CorrelationSnapshot<Real> max_corr{};  // maxima over the ends of extracting cycles
  bool hit_cycle_cap{false};
  bool included{true};
  std::string error;  // empty unless the run failed numerically
};

/// Parameters of sample `index`: one uniform draw per box dimension, in
/// ParameterBox::params() order, from the sample's own substream.
template <typename Real>
EngineParams<Real> draw_sample(const ParameterBox<Real>& box, const ScanOptions<Real>& opt, long index) {
  auto rng = substream(opt.seed, static_cast<std::uint64_t>(index));
  std::vector<Real> unit;
  for (std::size_t k = 0; k < box.params().size(); ++k) unit.push_back(Real(unit_uniform(rng)));
  EngineParams<Real> base;
  base.ramp = opt.ramp;
  base.phase = opt.phase;
  base.max_cycles = opt.max_cycles;
  base.track_correlations = false;
  base.record_timeseries = false;
  base.samples_per_stroke = 0;
  auto p = box.apply(base, box.to_physical(unit));
  const Real omega3 = p.prep.omega3;
  p.prep = opt.family == Family::Thermal ? Preparation<Real>::hot_thermal(opt.beta1, omega3)
                                         : Preparation<Real>::hot_squeezed(opt.beta1, omega3);
  return p;
}

/// Runs one sample to its stop rule, recording correlation maxima at the end
/// of every extracting cycle.
template <typename Real>
ScanSample<Real> run_sample(const EngineParams<Real>& params, long index, Real min_alpha23_tau_cold = 0) {
  ScanSample<Real> s;
  s.index = index;
  s.params = params;
  s.included = params.alpha23 * params.tau_cold >= min_alpha23_tau_cold;
  try {
    OttoEngine<Real> engine(params);
    Real w_cum{0};
    for (;;) {
      if (s.cycles >= params.max_cycles) {
        s.hit_cycle_cap = true;
        break;
      }
      const auto rec = engine.run_cycle();
      if (rec.w_cycle >= Real(0)) break;
      w_cum += rec.w_cycle;
      ++s.cycles;
      s.max_corr.take_max(correlations_of(engine.state()));
    }
    s.total_work = w_cum;
  } catch (const std::exception& e) {
    s.cycles = 0;
    s.total_work = 0;
    s.max_corr = {};
    s.error = e.what();
  }
  return s;
}

/// n independent samples; sample i depends only on (seed, i), so the output
/// is identical for any worker count.
template <typename Real>
std::vector<ScanSample<Real>> random_scan(const ParameterBox<Real>& box, const ScanOptions<Real>& opt) {
  box.validate();
  if (opt.samples < 0) throw DomainError("random_scan: negative sample count");
  if (opt.max_cycles < 1) throw DomainError("random_scan: cycle cap must be positive");
  if (box.omega3 && !(box.omega3->hi < Real(1))) throw DomainError("random_scan: omega3 must stay below omega1");
  std::vector<ScanSample<Real>> out(static_cast<std::size_t>(opt.samples));
  parallel_for(out.size(), opt.workers, [&](std::size_t i) {
    const long index = static_cast<long>(i);
    out[i] = run_sample(draw_sample(box, opt, index), index, opt.min_alpha23_tau_cold);
  });
  return out;
}

}  // namespace qhe::explore
