#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <vector>

#include "qhe/errors.hpp"
#include "qhe/gaussian.hpp"

namespace qhe {

/// <p_i^2>/2 + omega^2 <x_i^2>/2 for unit mass.
template <int Modes, typename Real>
Real mode_energy(const Covariance<Modes, Real>& sigma, int i, Real omega) {
  return (sigma.p2(i) + omega * omega * sigma.x2(i)) / Real(2);
}

template <typename Real>
std::array<Real, 3> mode_energies(const ThreeMode<Real>& sigma, const std::array<Real, 3>& omegas) {
  return {mode_energy(sigma, 0, omegas[0]), mode_energy(sigma, 1, omegas[1]),
          mode_energy(sigma, 2, omegas[2])};
}

// ---------------------------------------------------------------------------
// Efficiency

template <typename Real = double>
struct EfficiencyResult {
  std::optional<Real> value;  // empty when no heat was absorbed

  bool defined() const { return value.has_value(); }
};

/// Cycle efficiency max(0, -W + dU) / sum_{Q_i < 0} |Q_i|.
///
/// Negative heat is heat absorbed by the working medium. The result is
/// undefined when no heat flows in (zero denominator).
template <typename Real>
EfficiencyResult<Real> efficiency(Real work, Real delta_u, Real q1, Real q2) {
  using std::abs;
  Real absorbed{0};
  if (q1 < 0) absorbed += abs(q1);
  if (q2 < 0) absorbed += abs(q2);
  if (absorbed == Real(0)) return {};
  const Real numerator = std::max(Real(0), -work + delta_u);
  return {numerator / absorbed};
}

// ---------------------------------------------------------------------------
// Ordered enumeration over the (n1, n2, n3) occupation lattice

/// Visits lattice points in order of a key that is monotone in every index
/// (non-increasing for `Descending`, non-decreasing otherwise). Ties are broken
/// lexicographically on (n1, n2, n3). `extent[k] < 0` means unbounded.
template <typename Real, bool Descending>
class LatticeEnumerator {
 public:
  using Point = std::array<long, 3>;
  using KeyFn = std::function<Real(const Point&)>;

  LatticeEnumerator(KeyFn key, std::array<long, 3> extent) : key_(std::move(key)), extent_(extent) {
    push({0, 0, 0});
  }

  bool done() const { return heap_.empty(); }

  /// Returns the next (key, point) pair.
  std::pair<Real, Point> next() {
    const Entry top = heap_.top();
    heap_.pop();
    for (int k = 0; k < 3; ++k) {
      Point p = top.point;
      ++p[k];
      if (extent_[k] >= 0 && p[k] >= extent_[k]) continue;
      push(p);
    }
    return {top.key, top.point};
  }

 private:
  struct Entry {
    Real key;
    Point point;
  };
  struct Worse {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.key != b.key) return Descending ? a.key < b.key : a.key > b.key;
      return a.point > b.point;
    }
  };

  void push(const Point& p) {
    if (!seen_.insert(p).second) return;
    heap_.push({key_(p), p});
  }

  KeyFn key_;
  std::array<long, 3> extent_;
  std::priority_queue<Entry, std::vector<Entry>, Worse> heap_;
  std::set<Point> seen_;
};

// ---------------------------------------------------------------------------
// Spectrum of the initial product state

template <typename Real = double>
struct SpectrumPopulation {
  std::vector<Real> populations;  // descending
  Real tail_mass{0};              // 1 - sum(populations)
};

namespace detail {

/// Eigenvalue sequence of a single-mode initial state: geometric ratio and
/// number of nonzero eigenvalues (-1 = infinite).
template <typename Real>
struct ModeSpectrum {
  Real ratio{0};
  long extent{1};

  Real operator()(long n) const {
    using std::pow;
    if (extent >= 0 && n >= extent) return Real(0);
    return (Real(1) - ratio) * pow(ratio, Real(n));
  }
};

template <typename Real>
ModeSpectrum<Real> mode_spectrum(const ModePreparation<Real>& m) {
  if (const auto* t = std::get_if<Thermal<Real>>(&m)) {
    if (t->mean_occupation == Real(0)) return {Real(0), 1};
    return {t->mean_occupation / (t->mean_occupation + Real(1)), -1};
  }
  return {Real(0), 1};  // squeezed vacuum is pure
}

/// Energy of a mode above its ground state.
template <typename Real>
Real excitation_energy(const ModePreparation<Real>& m, Real omega) {
  using std::sinh;
  if (const auto* t = std::get_if<Thermal<Real>>(&m)) return omega * t->mean_occupation;
  const Real r = std::get<SqueezedVacuum<Real>>(m).squeezing;
  return omega * sinh(r) * sinh(r);
}

}  // namespace detail

/// Descending eigenvalues of the initial product density operator, truncated
/// once the retained mass reaches 1 - tail.
template <typename Real>
SpectrumPopulation<Real> initial_spectrum(const Preparation<Real>& prep, Real tail, std::size_t budget = 1000000) {
  if (!(tail > 0)) throw DomainError("initial_spectrum: tail mass must be positive");
  prep.validate();
  std::array<detail::ModeSpectrum<Real>, 3> spectra;
  std::array<long, 3> extent{};
  for (int k = 0; k < 3; ++k) {
    spectra[k] = detail::mode_spectrum(prep.modes[k]);
    extent[k] = spectra[k].extent;
  }
  LatticeEnumerator<Real, true> it(
      [&spectra](const auto& p) { return spectra[0](p[0]) * spectra[1](p[1]) * spectra[2](p[2]); }, extent);
  SpectrumPopulation<Real> out;
  Real mass{0};
  while (!it.done() && mass < Real(1) - tail) {
    if (out.populations.size() >= budget) {
      std::ostringstream msg;
      msg << "initial_spectrum: level budget " << budget << " exhausted with retained mass " << mass;
      throw ConvergenceFailure(msg.str());
    }
    const Real q = it.next().first;
    out.populations.push_back(q);
    mass += q;
  }
  out.tail_mass = std::max(Real(0), Real(1) - mass);
  return out;
}

/// The lowest `count` eigenvalues of sum_k omega_k n_k, ascending.
template <typename Real>
std::vector<Real> lowest_levels(const std::array<Real, 3>& omegas, std::size_t count) {
  LatticeEnumerator<Real, false> it(
      [&omegas](const auto& p) { return omegas[0] * Real(p[0]) + omegas[1] * Real(p[1]) + omegas[2] * Real(p[2]); },
      {-1, -1, -1});
  std::vector<Real> out;
  out.reserve(count);
  while (out.size() < count) out.push_back(it.next().first);
  return out;
}

// ---------------------------------------------------------------------------
// Ergotropy

/// Energy of the passive rearrangement: largest population on the lowest level.
template <typename Real>
Real passive_energy(std::span<const Real> populations, std::span<const Real> levels) {
  if (levels.size() < populations.size()) throw DomainError("passive_energy: fewer levels than populations");
  std::vector<Real> q(populations.begin(), populations.end());
  std::vector<Real> e(levels.begin(), levels.begin() + static_cast<std::ptrdiff_t>(q.size()));
  std::sort(q.begin(), q.end(), std::greater<>());
  std::sort(e.begin(), e.end());
  return std::inner_product(q.begin(), q.end(), e.begin(), Real(0));
}

/// Ergotropy of a state diagonal in the energy basis with the given
/// population on each level.
template <typename Real>
Real diagonal_ergotropy(std::span<const Real> populations, std::span<const Real> levels) {
  const Real energy = std::inner_product(populations.begin(), populations.end(), levels.begin(), Real(0));
  return energy - passive_energy(populations, levels);
}

template <typename Real = double>
struct ErgotropyOptions {
  Real tail{Real(1e-8)};
  Real convergence{Real(1e-6)};
  std::size_t level_budget{1000000};
};

template <typename Real = double>
struct ErgotropyResult {
  Real value{0};
  Real initial_energy{0};  // above the global ground state
  Real passive_energy{0};
  std::size_t levels{0};
  Real tail_mass{0};
  Real last_relative_change{0};
};

/// Ergotropy of the initial product state with respect to the uncoupled
/// Hamiltonian at frequencies (omega1, omega3, omega3).
///
/// Zero-point energies cancel, so everything is measured from the ground
/// state. The truncation tail is refined tenfold until the value changes by
/// less than `convergence` (relative).
template <typename Real>
ErgotropyResult<Real> ergotropy(const Preparation<Real>& prep, const ErgotropyOptions<Real>& opt = {}) {
  using std::abs;
  prep.validate();
  const auto omegas = prep.frequencies();
  Real initial{0};
  for (int k = 0; k < 3; ++k) initial += detail::excitation_energy(prep.modes[k], omegas[k]);

  auto evaluate = [&](Real tail) {
    const auto spec = initial_spectrum(prep, tail, opt.level_budget);
    const auto levels = lowest_levels(omegas, spec.populations.size());
    ErgotropyResult<Real> r;
    r.initial_energy = initial;
    r.passive_energy = std::inner_product(spec.populations.begin(), spec.populations.end(), levels.begin(), Real(0));
    r.value = initial - r.passive_energy;
    r.levels = spec.populations.size();
    r.tail_mass = spec.tail_mass;
    return r;
  };

  Real tail = opt.tail;
  ErgotropyResult<Real> prev = evaluate(tail);
  for (;;) {
    if (prev.tail_mass == Real(0)) return prev;  // spectrum exhausted exactly
    tail /= Real(10);
    ErgotropyResult<Real> next;
    try {
      next = evaluate(tail);
    } catch (const ConvergenceFailure& e) {
      std::ostringstream msg;
      msg << "ergotropy did not converge: last value " << prev.value << " with " << prev.levels
          << " levels, tail mass " << prev.tail_mass << " (" << e.what() << ")";
      throw ConvergenceFailure(msg.str());
    }
    const Real change = abs(next.value - prev.value) / std::max(abs(next.value), Real(1e-300));
    next.last_relative_change = change;
    if (change < opt.convergence || abs(next.value - prev.value) < opt.convergence * Real(1e-12)) return next;
    prev = next;
  }
}

}  // namespace qhe
