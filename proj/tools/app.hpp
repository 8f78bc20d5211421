#pragma once

// Command-line driver: JSON run configs, the simulate / optimize / scan /
// validate subcommands and their CSV and JSON outputs. Kept in a header so the
// tests can drive the commands in-process.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qhe/analytics.hpp"
#include "qhe/energetics.hpp"
#include "qhe/engine.hpp"
#include "qhe/explore.hpp"
#include "qhe/propagators.hpp"

namespace qhe::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kSchemaVersion = 1;

inline constexpr const char* kCyclesHeader =
    "cycle,W1,W2,Q1,Q2,dU,W_cycle,W_cum,eta,E1,E2,E3,D12max,D23max,D13max,N12max,N23max,N13max";
inline constexpr const char* kTimeseriesHeader = "t,E1,E2,E3,D12,D23,D13,N12,N23,N13";
inline constexpr const char* kScanHeader =
    "index,family,omega3,alpha12,alpha23,tau_hot,tau_cold,tau_comp,cycles,W_T,D12max,D23max,D13max,N12max,"
    "N23max,N13max,hit_cycle_cap,included,error";
inline constexpr const char* kTraceHeader = "evaluation,restart,value,best";
inline constexpr const char* kSweepHeader =
    "omega3,ratio,total_work,ergotropy,cycles,evaluations,converged,alpha12,alpha23,tau_hot,tau_cold,tau_comp";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration

struct OptimizeSettings {
  explore::ParameterBox<double> box{};
  explore::OptimizeOptions<double> options{};
  std::vector<double> omega3_sweep;
};

struct ScanSettings {
  explore::ParameterBox<double> box = explore::ParameterBox<double>::scan_default();
  explore::ScanOptions<double> options{};
};

struct RunConfig {
  EngineParams<double> engine = EngineParams<double>::optimized_run();
  ErgotropyOptions<double> ergotropy{};
  OptimizeSettings optimize{};
  ScanSettings scan{};
  std::string output{"out"};
  std::uint64_t seed{1};
  int workers{1};
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or of the wrong type");
  }
}

template <typename T>
void maybe(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

inline RampMode parse_ramp(const std::string& s) {
  if (s == "sudden") return RampMode::Sudden;
  if (s == "airy") return RampMode::LinearAiry;
  if (s == "quasistatic") return RampMode::QuasiStaticAsymptotic;
  throw ConfigError("ramp must be one of sudden, airy, quasistatic (got '" + s + "')");
}

inline std::string ramp_name(RampMode m) {
  switch (m) {
    case RampMode::Sudden: return "sudden";
    case RampMode::LinearAiry: return "airy";
    case RampMode::QuasiStaticAsymptotic: return "quasistatic";
  }
  return "?";
}

inline PhaseForm parse_phase(const std::string& s) {
  if (s == "wkb") return PhaseForm::Wkb;
  if (s == "as_printed") return PhaseForm::AsPrinted;
  throw ConfigError("phase must be wkb or as_printed (got '" + s + "')");
}

inline explore::Family parse_family(const std::string& s) {
  if (s == "thermal") return explore::Family::Thermal;
  if (s == "squeezed") return explore::Family::Squeezed;
  throw ConfigError("family must be thermal or squeezed (got '" + s + "')");
}

inline ModePreparation<double> parse_mode(const json& m, double omega, const std::string& where) {
  reject_unknown(m, {"kind", "beta", "mean_occupation", "r"}, where);
  const auto kind = get<std::string>(m, "kind", where);
  if (kind == "thermal") {
    if (m.contains("beta") == m.contains("mean_occupation")) {
      throw ConfigError(where + ": give exactly one of beta, mean_occupation");
    }
    if (m.contains("r")) throw ConfigError(where + ": r is only valid for squeezed modes");
    if (m.contains("beta")) {
      const auto beta = get<double>(m, "beta", where);
      if (beta < 0) throw ConfigError(where + ".beta: must be non-negative");
      return Thermal<double>{occupation_from_beta(beta, omega)};
    }
    return Thermal<double>{get<double>(m, "mean_occupation", where)};
  }
  if (kind == "squeezed") {
    if (m.contains("beta") || m.contains("mean_occupation")) throw ConfigError(where + ": squeezed modes take r");
    return SqueezedVacuum<double>{get<double>(m, "r", where)};
  }
  throw ConfigError(where + ".kind: must be thermal or squeezed");
}

inline Preparation<double> parse_preparation(const json& p, double omega1, double omega3) {
  const std::string where = "preparation";
  reject_unknown(p, {"family", "beta1", "modes"}, where);
  if (p.contains("modes")) {
    if (p.contains("family") || p.contains("beta1")) throw ConfigError(where + ": modes excludes family/beta1");
    const auto& modes = p.at("modes");
    if (!modes.is_array() || modes.size() != 3) throw ConfigError(where + ".modes: need three entries");
    Preparation<double> prep;
    prep.omega1 = omega1;
    prep.omega3 = omega3;
    const auto omegas = prep.frequencies();
    for (std::size_t k = 0; k < 3; ++k) {
      prep.modes[k] = parse_mode(modes[k], omegas[k], where + ".modes[" + std::to_string(k) + "]");
    }
    return prep;
  }
  const auto family = parse_family(p.contains("family") ? get<std::string>(p, "family", where) : "thermal");
  const double beta1 = p.contains("beta1") ? get<double>(p, "beta1", where) : 1e-2;
  if (!(beta1 > 0)) throw ConfigError(where + ".beta1: must be positive");
  return family == explore::Family::Thermal ? Preparation<double>::hot_thermal(beta1, omega3, omega1)
                                            : Preparation<double>::hot_squeezed(beta1, omega3, omega1);
}

inline explore::Interval<double> parse_interval(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + ": expected [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void parse_box(const json& b, explore::ParameterBox<double>& box, const std::string& where) {
  reject_unknown(b, {"alpha12", "alpha23", "tau_hot", "tau_cold", "tau_comp", "omega3"}, where);
  if (b.contains("alpha12")) box.alpha12 = parse_interval(b["alpha12"], where + ".alpha12");
  if (b.contains("alpha23")) box.alpha23 = parse_interval(b["alpha23"], where + ".alpha23");
  if (b.contains("tau_hot")) box.tau_hot = parse_interval(b["tau_hot"], where + ".tau_hot");
  if (b.contains("tau_cold")) box.tau_cold = parse_interval(b["tau_cold"], where + ".tau_cold");
  if (b.contains("tau_comp")) box.tau_comp = parse_interval(b["tau_comp"], where + ".tau_comp");
  if (b.contains("omega3")) {
    if (b["omega3"].is_null()) {
      box.omega3.reset();
    } else {
      box.omega3 = parse_interval(b["omega3"], where + ".omega3");
    }
  }
  try {
    box.validate();
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

/// Reads a config document. Every key is optional except schema_version;
/// unknown keys are rejected.
inline RunConfig parse_config(const json& doc) {
  using namespace detail;
  reject_unknown(doc, {"schema_version", "seed", "workers", "output", "engine", "preparation", "ergotropy",
                       "optimize", "scan"},
                 "config");
  if (!doc.contains("schema_version")) throw ConfigError("config: schema_version is required");
  if (get<int>(doc, "schema_version", "config") != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  RunConfig cfg;
  maybe(doc, "seed", "config", cfg.seed);
  maybe(doc, "workers", "config", cfg.workers);
  maybe(doc, "output", "config", cfg.output);
  if (cfg.workers < 1) throw ConfigError("config.workers: must be at least 1");

  auto& e = cfg.engine;
  double omega1 = 1, omega3 = e.omega3();
  if (doc.contains("engine")) {
    const auto& j = doc["engine"];
    const std::string where = "engine";
    reject_unknown(j, {"omega1", "omega3", "alpha12", "alpha23", "tau_comp", "tau_hot", "tau_cold", "ramp", "phase",
                       "stop", "cycles", "epsilon", "samples_per_stroke", "track_correlations", "max_cycles"},
                   where);
    maybe(j, "omega1", where, omega1);
    maybe(j, "omega3", where, omega3);
    maybe(j, "alpha12", where, e.alpha12);
    maybe(j, "alpha23", where, e.alpha23);
    maybe(j, "tau_comp", where, e.tau_comp);
    maybe(j, "tau_hot", where, e.tau_hot);
    maybe(j, "tau_cold", where, e.tau_cold);
    if (j.contains("ramp")) e.ramp = parse_ramp(get<std::string>(j, "ramp", where));
    if (j.contains("phase")) e.phase = parse_phase(get<std::string>(j, "phase", where));
    maybe(j, "samples_per_stroke", where, e.samples_per_stroke);
    maybe(j, "track_correlations", where, e.track_correlations);
    maybe(j, "max_cycles", where, e.max_cycles);
    const std::string stop = j.contains("stop") ? get<std::string>(j, "stop", where) : "work_nonnegative";
    if (stop == "work_nonnegative") {
      if (j.contains("cycles")) throw ConfigError("engine.cycles: only valid with stop = fixed");
      double eps = 0;
      maybe(j, "epsilon", where, eps);
      e.stop = WorkNonNegative<double>{eps};
    } else if (stop == "fixed") {
      if (j.contains("epsilon")) throw ConfigError("engine.epsilon: only valid with stop = work_nonnegative");
      e.stop = FixedCycles{get<long>(j, "cycles", where)};
    } else {
      throw ConfigError("engine.stop: must be work_nonnegative or fixed");
    }
  }
  e.prep = doc.contains("preparation") ? parse_preparation(doc["preparation"], omega1, omega3)
                                       : Preparation<double>::hot_thermal(1e-2, omega3, omega1);
  try {
    e.validate();
  } catch (const DomainError& ex) {
    throw ConfigError(ex.what());
  }

  if (doc.contains("ergotropy")) {
    const auto& j = doc["ergotropy"];
    reject_unknown(j, {"tail", "convergence", "level_budget"}, "ergotropy");
    maybe(j, "tail", "ergotropy", cfg.ergotropy.tail);
    maybe(j, "convergence", "ergotropy", cfg.ergotropy.convergence);
    maybe(j, "level_budget", "ergotropy", cfg.ergotropy.level_budget);
  }

  auto& opt = cfg.optimize.options;
  opt.objective = explore::Objective::WorkErgotropyRatio;
  if (doc.contains("optimize")) {
    const auto& j = doc["optimize"];
    const std::string where = "optimize";
    reject_unknown(j, {"objective", "method", "restarts", "budget", "xtol", "ftol", "box", "omega3_sweep"}, where);
    if (j.contains("objective")) {
      const auto o = get<std::string>(j, "objective", where);
      if (o == "total_work") {
        opt.objective = explore::Objective::TotalWork;
      } else if (o == "ratio") {
        opt.objective = explore::Objective::WorkErgotropyRatio;
      } else {
        throw ConfigError("optimize.objective: must be total_work or ratio");
      }
    }
    if (j.contains("method")) {
      const auto m = get<std::string>(j, "method", where);
      if (m == "nelder_mead") {
        opt.method = explore::Method::NelderMead;
      } else if (m == "differential_evolution") {
        opt.method = explore::Method::DifferentialEvolution;
      } else {
        throw ConfigError("optimize.method: must be nelder_mead or differential_evolution");
      }
    }
    maybe(j, "restarts", where, opt.restarts);
    maybe(j, "budget", where, opt.budget);
    maybe(j, "xtol", where, opt.xtol);
    maybe(j, "ftol", where, opt.ftol);
    if (j.contains("box")) parse_box(j["box"], cfg.optimize.box, "optimize.box");
    maybe(j, "omega3_sweep", where, cfg.optimize.omega3_sweep);
    for (double w : cfg.optimize.omega3_sweep) {
      if (!(w > 0 && w < omega1)) throw ConfigError("optimize.omega3_sweep: values must lie in (0, omega1)");
    }
    if (opt.budget < 1) throw ConfigError("optimize.budget: must be positive");
    if (opt.restarts < 1) throw ConfigError("optimize.restarts: must be positive");
  }

  auto& sc = cfg.scan.options;
  if (doc.contains("scan")) {
    const auto& j = doc["scan"];
    const std::string where = "scan";
    reject_unknown(j, {"family", "samples", "max_cycles", "beta1", "min_alpha23_tau_cold", "box"}, where);
    if (j.contains("family")) sc.family = parse_family(get<std::string>(j, "family", where));
    maybe(j, "samples", where, sc.samples);
    maybe(j, "max_cycles", where, sc.max_cycles);
    maybe(j, "beta1", where, sc.beta1);
    maybe(j, "min_alpha23_tau_cold", where, sc.min_alpha23_tau_cold);
    if (j.contains("box")) parse_box(j["box"], cfg.scan.box, "scan.box");
    if (sc.samples < 0) throw ConfigError("scan.samples: must be non-negative");
    if (sc.max_cycles < 1) throw ConfigError("scan.max_cycles: must be positive");
    if (!(sc.beta1 > 0)) throw ConfigError("scan.beta1: must be positive");
  }
  if (!cfg.scan.box.omega3) throw ConfigError("scan.box.omega3: the scan always draws omega3");
  if (!(cfg.scan.box.omega3->hi < omega1)) throw ConfigError("scan.box.omega3: must stay below omega1");
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------------------
// Output helpers

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline double or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

inline json params_json(const EngineParams<double>& p) {
  return {{"omega1", p.omega1()},       {"omega3", p.omega3()},     {"alpha12", p.alpha12},
          {"alpha23", p.alpha23},       {"tau_comp", p.tau_comp},   {"tau_hot", p.tau_hot},
          {"tau_cold", p.tau_cold},     {"ramp", ramp_name(p.ramp)}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

struct SimulateResult {
  EngineRun<double> run;
  ErgotropyResult<double> ergotropy;
  double ratio{0};  // -W_T / ergotropy: fraction of the ergotropy extracted
  json summary;
};

inline SimulateResult simulate(const RunConfig& cfg) {
  SimulateResult r;
  r.run = run_engine(cfg.engine);
  r.ergotropy = ergotropy(cfg.engine.prep, cfg.ergotropy);
  const double wt = r.run.total_work();
  r.ratio = r.ergotropy.value > 0 && wt != 0 ? -wt / r.ergotropy.value : 0.0;

  double w1 = 0, w2 = 0, q1 = 0, q2 = 0, du = 0, wc = 0, residual = 0;
  for (const auto& c : r.run.cycles) {
    w1 += c.w1;
    w2 += c.w2;
    q1 += c.q1;
    q2 += c.q2;
    du += c.delta_u;
    wc += c.w_cycle;
    residual = std::max(residual, std::abs(c.first_law_residual()));
  }
  const auto fin = mode_energies(r.run.final_state, cfg.engine.prep.frequencies());
  r.summary = {{"schema_version", kSchemaVersion},
               {"command", "simulate"},
               {"params", detail::params_json(cfg.engine)},
               {"cycles", r.run.cycles.size()},
               {"hit_cycle_cap", r.run.hit_cycle_cap},
               {"total_work", wt},
               {"totals", {{"W1", w1}, {"W2", w2}, {"Q1", q1}, {"Q2", q2}, {"dU", du}, {"W_cycle", wc}}},
               {"ergotropy", r.ergotropy.value},
               {"ergotropy_levels", r.ergotropy.levels},
               {"ratio", r.ratio},
               {"max_first_law_residual", residual},
               {"final_energies", {fin[0], fin[1], fin[2]}}};
  return r;
}

inline void write_simulation(const SimulateResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = detail::open_out(dir / "cycles.csv");
    out << kCyclesHeader << '\n';
    for (const auto& c : r.run.cycles) {
      out << c.index << ',' << c.w1 << ',' << c.w2 << ',' << c.q1 << ',' << c.q2 << ',' << c.delta_u << ','
          << c.w_cycle << ',' << c.w_cum << ',' << detail::or_nan(c.eta.value) << ',' << c.energy[0] << ','
          << c.energy[1] << ',' << c.energy[2];
      for (double v : c.max_corr.discord) out << ',' << v;
      for (double v : c.max_corr.negativity) out << ',' << v;
      out << '\n';
    }
  }
  {
    auto out = detail::open_out(dir / "timeseries.csv");
    out << kTimeseriesHeader << '\n';
    for (const auto& s : r.run.series) {
      out << s.t << ',' << s.energy[0] << ',' << s.energy[1] << ',' << s.energy[2];
      for (double v : s.corr.discord) out << ',' << v;
      for (double v : s.corr.negativity) out << ',' << v;
      out << '\n';
    }
  }
  detail::write_json(dir / "summary.json", r.summary);
}

// ---------------------------------------------------------------------------
// optimize

inline json optimize_json(const explore::OptimizeResult<double>& r) {
  json point = json::object();
  const auto& p = r.best;
  return {{"schema_version", kSchemaVersion},
          {"command", "optimize"},
          {"params", detail::params_json(p)},
          {"value", r.value},
          {"total_work", r.total_work},
          {"ergotropy", r.ergotropy},
          {"cycles", r.cycles},
          {"evaluations", r.evaluations},
          {"converged", r.converged},
          {"best_restart", r.best_restart}};
}

inline void write_optimization(const explore::OptimizeResult<double>& r, const fs::path& dir) {
  fs::create_directories(dir);
  detail::write_json(dir / "best.json", optimize_json(r));
  auto out = detail::open_out(dir / "trace.csv");
  out << kTraceHeader << '\n';
  for (const auto& t : r.trace) out << t.evaluation << ',' << t.restart << ',' << t.value << ',' << t.best << '\n';
}

/// One ratio-objective optimization per omega3; rows in sweep order.
inline std::vector<explore::OptimizeResult<double>> omega3_sweep(const RunConfig& cfg) {
  std::vector<explore::OptimizeResult<double>> out;
  auto opt = cfg.optimize.options;
  opt.objective = explore::Objective::WorkErgotropyRatio;
  opt.seed = cfg.seed;
  opt.workers = cfg.workers;
  for (double w3 : cfg.optimize.omega3_sweep) {
    auto base = cfg.engine;
    base.prep.omega3 = w3;
    auto box = cfg.optimize.box;
    box.omega3.reset();
    out.push_back(explore::optimize(box, base, opt));
  }
  return out;
}

inline void write_sweep(const std::vector<explore::OptimizeResult<double>>& rows, const fs::path& dir) {
  fs::create_directories(dir);
  auto out = detail::open_out(dir / "sweep.csv");
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    const auto& p = r.best;
    const double ratio = r.ergotropy > 0 && r.total_work != 0 ? -r.total_work / r.ergotropy : 0.0;
    out << p.omega3() << ',' << ratio << ',' << r.total_work << ',' << r.ergotropy << ',' << r.cycles << ','
        << r.evaluations << ',' << (r.converged ? 1 : 0) << ',' << p.alpha12 << ',' << p.alpha23 << ','
        << p.tau_hot << ',' << p.tau_cold << ',' << p.tau_comp << '\n';
  }
}

// ---------------------------------------------------------------------------
// scan

inline void write_scan(const std::vector<explore::ScanSample<double>>& samples, explore::Family family,
                       const fs::path& dir) {
  fs::create_directories(dir);
  auto out = detail::open_out(dir / "scan.csv");
  out << kScanHeader << '\n';
  for (const auto& s : samples) {
    const auto& p = s.params;
    out << s.index << ',' << explore::to_string(family) << ',' << p.omega3() << ',' << p.alpha12 << ','
        << p.alpha23 << ',' << p.tau_hot << ',' << p.tau_cold << ',' << p.tau_comp << ',' << s.cycles << ','
        << s.total_work;
    for (double v : s.max_corr.discord) out << ',' << v;
    for (double v : s.max_corr.negativity) out << ',' << v;
    std::string err = s.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << (s.hit_cycle_cap ? 1 : 0) << ',' << (s.included ? 1 : 0) << ',' << err << '\n';
  }
}

// ---------------------------------------------------------------------------
// validate

struct CheckResult {
  std::string name;
  bool pass{false};
  std::string detail;
};

struct ValidateOptions {
  // Test hook: added to one entry of each stroke propagator before the
  // symplectic check (negative control).
  double perturb_propagator{0};
  std::uint64_t seed{1};
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace detail

/// The oracle suites behind `validate`.
inline std::vector<CheckResult> validation_suite(const ValidateOptions& vo = {}) {
  std::vector<CheckResult> out;
  auto check = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, detail] = body();
      out.push_back({name, ok, detail});
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  check("airy_vs_ode", [&] {
    auto rng = explore::substream(vo.seed, 6);
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
      RampSchedule<double> s;
      s.omega_in = 0.1 + 0.9 * explore::unit_uniform(rng);
      s.omega_fin = 0.1 + 0.9 * explore::unit_uniform(rng);
      s.duration = 0.5 + 19.5 * explore::unit_uniform(rng);
      s.mode = RampMode::LinearAiry;
      if (s.degenerate()) continue;
      const auto a = ramp_propagator(s);
      const auto o = ode_propagator(s, 1e-12);
      worst = std::max(worst, (a.s - o.s).cwiseAbs().maxCoeff());
    }
    return std::pair{worst <= 1e-8, "max entry difference " + detail::fmt(worst)};
  });

  check("symplectic_strokes", [&] {
    auto p = EngineParams<double>::optimized_run();
    double worst = 0;
    for (RampMode mode : {RampMode::QuasiStaticAsymptotic, RampMode::LinearAiry, RampMode::Sudden}) {
      p.ramp = mode;
      OttoEngine<double> engine(p);
      for (StrokeKind k : {StrokeKind::Compression, StrokeKind::Heating, StrokeKind::Expansion, StrokeKind::Cooling}) {
        auto prop = engine.stroke_propagator(k);
        prop.s(1, 4) += vo.perturb_propagator;
        worst = std::max(worst, prop.symplectic_defect());
      }
    }
    return std::pair{worst <= 1e-10, "max |S Omega S^T - Omega| " + detail::fmt(worst)};
  });

  check("coupling_vs_expm", [&] {
    double worst = 0;
    for (auto which : {CouplingPair::Hot, CouplingPair::Cold}) {
      const double alpha = 0.038, t = 0.59;
      const Matrix<6, double> a = coupling_generator(alpha, 1.0, 0.1, which);
      const Matrix<6, double> ref = (a * t).exp();
      worst = std::max(worst, (coupling_propagator(alpha, 1.0, 0.1, t, which).s - ref).cwiseAbs().maxCoeff());
    }
    return std::pair{worst <= 1e-12, "max entry difference " + detail::fmt(worst)};
  });

  check("weak_coupling_work", [&] {
    // Single sudden cycle against the second-order expression.
    analytics::WeakCouplingInput<double> in;
    in.omega1 = 1;
    in.omega3 = 0.5;
    in.alpha12 = 0.5;
    in.tau_hot = 0.02;
    in.c1 = 200;
    in.c3 = 1;
    EngineParams<double> p;
    p.alpha12 = in.alpha12;
    p.tau_hot = in.tau_hot;
    p.ramp = RampMode::Sudden;
    p.stop = FixedCycles{1};
    p.track_correlations = false;
    p.record_timeseries = false;
    p.prep.omega3 = in.omega3;
    p.prep.modes = {Thermal<double>{(in.c1 - 1) / 2}, Thermal<double>{}, Thermal<double>{}};
    const double sim = run_engine(p).cycles.front().w_cycle;
    const double formula = analytics::work_one_cycle_thermal(in);
    const double rel = std::abs(sim - formula) / std::abs(formula);
    const double at = in.alpha12 * in.tau_hot;
    return std::pair{rel <= 10 * at * at, "relative error " + detail::fmt(rel) + " vs bound " +
                                             detail::fmt(10 * at * at)};
  });

  check("first_law", [&] {
    const auto run = run_engine(EngineParams<double>::optimized_run());
    double worst = 0, scale = 1;
    for (const auto& c : run.cycles) {
      worst = std::max(worst, std::abs(c.first_law_residual()));
      scale = std::max({scale, std::abs(c.q1), std::abs(c.w1), std::abs(c.w2)});
    }
    return std::pair{worst <= 1e-12 * scale, "max residual " + detail::fmt(worst)};
  });

  check("ergotropy_vacuum", [&] {
    const double e = ergotropy(Preparation<double>::hot_thermal(std::numeric_limits<double>::infinity(), 0.1)).value;
    return std::pair{e == 0.0, "ergotropy " + detail::fmt(e)};
  });

  check("quasi_static_phase_form", [&] {
    // In the adiabatic regime the exact ramp must approach the asymptotic
    // propagator; report which phase form gets there.
    RampSchedule<double> s;
    s.omega_in = 1;
    s.omega_fin = 0.5;
    s.duration = 400;
    s.mode = RampMode::LinearAiry;
    const auto exact = ramp_propagator(s);
    s.mode = RampMode::QuasiStaticAsymptotic;
    s.phase = PhaseForm::Wkb;
    const double wkb = (ramp_propagator(s).s - exact.s).cwiseAbs().maxCoeff();
    s.phase = PhaseForm::AsPrinted;
    const double printed = (ramp_propagator(s).s - exact.s).cwiseAbs().maxCoeff();
    const std::string winner = wkb < printed ? "wkb" : "as_printed";
    return std::pair{wkb < 1e-2 && wkb < printed, "matched form " + winner + " (wkb " + detail::fmt(wkb) +
                                                      ", as_printed " + detail::fmt(printed) + ")"};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses argv and runs a subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Three-oscillator quantum Otto engine: simulate, optimize, scan, validate"};
  app.require_subcommand(1);
  std::string config_path, out_dir, ramp;
  std::optional<std::uint64_t> seed;
  std::optional<long> cycles, samples, budget;
  std::optional<int> workers;
  double perturb = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--ramp", ramp, "ramp mode")->check(CLI::IsMember({"sudden", "airy", "quasistatic"}));
  };
  auto* sim = app.add_subcommand("simulate", "run the engine and write cycles.csv, timeseries.csv, summary.json");
  add_common(sim);
  sim->add_option("--cycles", cycles, "run exactly this many cycles")->check(CLI::NonNegativeNumber);
  auto* opt = app.add_subcommand("optimize", "optimize the extracted work over a parameter box");
  add_common(opt);
  opt->add_option("--budget", budget, "objective evaluations")->check(CLI::PositiveNumber);
  auto* scan = app.add_subcommand("scan", "random parameter scan");
  add_common(scan);
  scan->add_option("--samples", samples, "number of samples")->check(CLI::NonNegativeNumber);
  scan->add_option("--cycles", cycles, "per-sample cycle cap")->check(CLI::PositiveNumber);
  auto* val = app.add_subcommand("validate", "run the oracle checks");
  val->add_option("--seed", seed, "random seed");
  val->add_option("--perturb-propagator", perturb)->group("");  // hidden test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (val->parsed()) {
      ValidateOptions vo;
      vo.perturb_propagator = perturb;
      if (seed) vo.seed = *seed;
      bool all = true;
      for (const auto& c : validation_suite(vo)) {
        out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        all = all && c.pass;
      }
      return all ? kExitOk : kExitNumerical;
    }

    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output = out_dir;
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (!ramp.empty()) {
      cfg.engine.ramp = detail::parse_ramp(ramp);
      cfg.scan.options.ramp = cfg.engine.ramp;
    }
    const fs::path dir = cfg.output;

    if (sim->parsed()) {
      if (cycles) cfg.engine.stop = FixedCycles{*cycles};
      const auto r = simulate(cfg);
      write_simulation(r, dir);
      out << "cycles " << r.run.cycles.size() << " total_work " << r.run.total_work() << " ratio " << r.ratio
          << '\n';
      return kExitOk;
    }
    if (opt->parsed()) {
      if (budget) cfg.optimize.options.budget = *budget;
      if (!cfg.optimize.omega3_sweep.empty()) {
        const auto rows = omega3_sweep(cfg);
        write_sweep(rows, dir);
        out << "sweep points " << rows.size() << '\n';
        return kExitOk;
      }
      auto o = cfg.optimize.options;
      o.seed = cfg.seed;
      o.workers = cfg.workers;
      const auto r = explore::optimize(cfg.optimize.box, cfg.engine, o);
      write_optimization(r, dir);
      out << "value " << r.value << " total_work " << r.total_work << " evaluations " << r.evaluations
          << " converged " << (r.converged ? "yes" : "no") << '\n';
      return kExitOk;
    }
    if (scan->parsed()) {
      auto so = cfg.scan.options;
      if (samples) so.samples = *samples;
      if (cycles) so.max_cycles = *cycles;
      so.seed = cfg.seed;
      so.workers = cfg.workers;
      const auto rows = explore::random_scan(cfg.scan.box, so);
      write_scan(rows, so.family, dir);
      out << "samples " << rows.size() << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace qhe::cli
