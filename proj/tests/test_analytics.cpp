#include <gtest/gtest.h>

#include "qhe/analytics.hpp"
#include "qhe/engine.hpp"
#include "support.hpp"

namespace qhe {
namespace {

using analytics::WeakCouplingInput;
using testing::Rng;

constexpr double kC1 = 200.001666663888891;  // coth(0.005)

WeakCouplingInput<double> input(double w3, double alpha, double tau) {
  WeakCouplingInput<double> in;
  in.omega3 = w3;
  in.alpha12 = alpha;
  in.tau_hot = tau;
  return in;
}

EngineParams<double> single_cycle(double w3, double alpha, double tau, RampMode mode, ModePreparation<double> m1,
                                  ModePreparation<double> rest) {
  EngineParams<double> p;
  p.alpha12 = alpha;
  p.tau_hot = tau;
  p.tau_comp = mode == RampMode::Sudden ? 0.0 : 85.02;
  p.ramp = mode;
  p.stop = FixedCycles{1};
  p.track_correlations = false;
  p.record_timeseries = false;
  p.prep.omega3 = w3;
  p.prep.modes = {m1, rest, rest};
  return p;
}

double nu12_after_heating(const EngineParams<double>& p) {
  OttoEngine<double> e(p);
  e.run_stroke(StrokeKind::Compression);
  e.run_stroke(StrokeKind::Heating);
  return partial_transpose_min_eigenvalue(restrict(e.state(), 0, 1));
}

TEST(WorkOneCycle, Examples) {
  auto in = input(0.5, 0.05, 1.0);
  in.c1 = kC1;
  in.c3 = 1;
  EXPECT_NEAR(analytics::work_one_cycle_thermal(in), 0.188436718751302082, 1e-14);
  in.omega3 = 1.0;
  EXPECT_EQ(analytics::work_one_cycle_thermal(in), 0.0);
  in.r1 = 0.4;
  in.r3 = 0.4;
  EXPECT_EQ(analytics::work_one_cycle_squeezed(in), 0.0);
}

TEST(WorkOneCycle, MatchesSimulatorInSuddenMode) {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const double w3 = testing::uniform(rng, 0.1, 0.9);
    const double alpha = 0.5, at = testing::log_uniform(rng, 1e-3, 1e-2);
    auto in = input(w3, alpha, at / alpha);
    in.c1 = testing::uniform(rng, 1.0, 50.0);
    in.c3 = testing::uniform(rng, 1.0, 3.0);
    const auto c = run_engine(single_cycle(w3, alpha, in.tau_hot, RampMode::Sudden, Thermal<double>{(in.c1 - 1) / 2},
                                           Thermal<double>{(in.c3 - 1) / 2}))
                       .cycles[0];
    const double f = analytics::work_one_cycle_thermal(in);
    // W is a difference of stroke works, so near the threshold the error is
    // measured against the compression work rather than against W itself.
    const double scale = std::max(std::abs(f), std::abs(c.w1));
    EXPECT_LT(std::abs(c.w_cycle - f), 10 * at * at * scale) << "trial " << trial;
  }
}

TEST(Threshold, ExampleAndLimits) {
  EXPECT_NEAR(analytics::extraction_threshold(1.0, 0.5, 0.05), 602.0, 1e-9);
  EXPECT_TRUE(std::isinf(analytics::extraction_threshold(1.0, 0.5, 0.0)));
  EXPECT_TRUE(analytics::extraction_predicted(603.0, 1.0, 0.5, 0.05));
  EXPECT_FALSE(analytics::extraction_predicted(601.0, 1.0, 0.5, 0.05));
}

TEST(Threshold, SignOfWorkFlipsAtThreshold) {
  // Bisection on c1 for a root of the closed form, c3 = 1.
  for (auto [w3, alpha] : {std::pair{0.5, 0.05}, std::pair{0.1, 0.038}, std::pair{0.8, 0.3}}) {
    const double xs = analytics::extraction_threshold(1.0, w3, alpha);
    auto w = [&](double c1) {
      auto in = input(w3, alpha, 0.7);
      in.c1 = c1;
      return analytics::work_one_cycle_thermal(in);
    };
    double lo = 1.0, hi = 10 * xs;
    ASSERT_GT(w(lo), 0);
    ASSERT_LT(w(hi), 0);
    while (hi - lo > 1e-9 * xs) {
      const double mid = (lo + hi) / 2;
      (w(mid) > 0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(lo, xs, 2e-9 * xs);
    // The squeezed form has the same threshold in e^{2 r1}.
    auto in = input(w3, alpha, 0.7);
    in.r1 = std::log(xs) / 2;
    EXPECT_NEAR(analytics::work_one_cycle_squeezed(in), 0.0, 1e-10 * 0.7 * 0.7 * xs);
  }
}

TEST(WorkOneCycle, SqueezedReferenceExampleHasSimulatorSign) {
  auto in = input(0.1, 0.038, 0.59);
  in.r1 = squeezing_matching_thermal(kC1);
  const double f = analytics::work_one_cycle_squeezed(in);
  const double sim = run_engine(single_cycle(0.1, 0.038, 0.59, RampMode::Sudden, SqueezedVacuum<double>{in.r1},
                                             SqueezedVacuum<double>{0.0}))
                         .cycles[0]
                         .w_cycle;
  EXPECT_GT(f, 0);
  EXPECT_GT(sim, 0);
  // e^{2 r1} = 400 amplifies the neglected higher orders well beyond 10 (alpha tau)^2.
  EXPECT_LT(std::abs(sim - f) / f, 0.12);
}

TEST(ThermalEigenvalue, LimitsAndDomain) {
  auto in = input(0.1, 0.038, 0.0);
  in.c1 = kC1;
  in.c3 = 1.7;
  EXPECT_NEAR(analytics::nu12_sudden_thermal(in), 0.85, 1e-12);
  in.c3 = kC1;
  EXPECT_THROW(analytics::nu12_sudden_thermal(in), DomainError);
}

TEST(ThermalEigenvalue, ZeroTemperatureNeverEntangledAtHighTemperature) {
  // beta1 omega1 = 1e-2 is far on the separable side of the predicate.
  EXPECT_FALSE(analytics::thermal_entanglement_predicate(1e-2, 1.0, 0.1));
  for (double at : {1e-3, 1e-2, 1e-1}) {
    auto in = input(0.1, at, 1.0);
    in.c1 = kC1;
    EXPECT_GT(analytics::nu12_sudden_thermal(in), 0.5);
  }
}

TEST(ThermalEigenvalue, PredicateMatchesSignOfEigenvalue) {
  // With c3 -> 1 the sign of nu - 1/2 is that of
  // w1 w3 c1^2 - (w1^2 + w3^2) c1 + w1 w3, and (c1 + 1/c1)/2 = coth(beta1 w1).
  Rng rng(52);
  int entangled = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double w3 = testing::uniform(rng, 0.05, 0.95);
    const double b1 = testing::log_uniform(rng, 1e-2, 10.0);
    auto in = input(w3, 0.01, 1.0);
    in.c1 = 1 / std::tanh(b1 / 2);
    in.c3 = 1;
    const double nu = analytics::nu12_sudden_thermal(in);
    if (std::abs(nu - 0.5) < 1e-12) continue;
    const bool predicted = analytics::thermal_entanglement_predicate(b1, 1.0, w3);
    EXPECT_EQ(predicted, nu < 0.5) << "w3 " << w3 << " beta1 " << b1;
    entangled += predicted;
  }
  EXPECT_GT(entangled, 50);
}

TEST(ThermalEigenvalue, IncompatibleWithExtraction) {
  // Wherever extraction is predicted (c1 above the threshold), nu12 >= 1/2.
  int counted = 0;
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 60; ++j) {
      const double b1 = std::pow(10.0, -3 + 2.5 * i / 59);
      const double at = std::pow(10.0, -3 + 2.0 * j / 59);
      for (double w3 : {0.1, 0.5, 0.9}) {
        const double alpha = 0.2;
        auto in = input(w3, alpha, at / alpha);
        in.c1 = 1 / std::tanh(b1 / 2);
        in.c3 = 1;
        if (!analytics::extraction_predicted(in.c1, 1.0, w3, alpha)) continue;
        ++counted;
        EXPECT_GE(analytics::nu12_sudden_thermal(in), 0.5);
      }
    }
  }
  EXPECT_GT(counted, 100);
}

TEST(SqueezedEigenvalue, LimitsAndSimulatorAgreement) {
  auto in = input(0.1, 0.0, 1.0);
  in.r1 = 1.0;
  EXPECT_NEAR(analytics::nu12_sudden_squeezed(in), 0.5, 1e-15);
  // Phi = 0 when e^{2 (r1 + r3)} w3 = w1.
  in = input(0.25, 0.1, 1.0);
  in.r1 = std::log(4.0) / 2;
  EXPECT_NEAR(analytics::nu12_sudden_squeezed(in), 0.5, 1e-15);

  // Error against the simulator is third order in alpha tau.
  std::vector<double> ats, errs;
  for (double at : {0.1, 0.05, 0.025, 0.0125}) {
    auto c = input(0.1, 0.5, at / 0.5);
    c.r1 = 1.0;
    const double sim = nu12_after_heating(
        single_cycle(0.1, 0.5, c.tau_hot, RampMode::Sudden, SqueezedVacuum<double>{1.0}, SqueezedVacuum<double>{0.0}));
    ats.push_back(at);
    errs.push_back(std::abs(sim - analytics::nu12_sudden_squeezed(c)));
  }
  EXPECT_LT(errs[0], 2e-4);
  EXPECT_NEAR(testing::loglog_slope(ats, errs), 3.0, 0.2);
}

TEST(QuasiStaticWork, ExamplesAndSigns) {
  auto in = input(0.5, 0.05, 1.0);
  in.c1 = kC1;
  in.c3 = 1;
  EXPECT_NEAR(analytics::work_qs_thermal(in), -0.124376041664930557, 1e-14);
  in.c3 = kC1;
  EXPECT_EQ(analytics::work_qs_thermal(in), 0.0);
  in.r1 = in.r3 = 0.6;
  EXPECT_EQ(analytics::work_qs_squeezed(in), 0.0);
  in.r1 = 0.8;
  in.r3 = 0.1;
  EXPECT_LT(analytics::work_qs_squeezed(in), 0.0);
  std::swap(in.r1, in.r3);
  EXPECT_GT(analytics::work_qs_squeezed(in), 0.0);
}

TEST(QuasiStaticWork, MatchesSimulator) {
  for (double at : {0.02, 0.01}) {
    const double alpha = 0.038, tau = at / alpha;
    auto in = input(0.5, alpha, tau);
    in.c1 = 200;
    in.c3 = 3;
    in.r1 = 1.5;
    in.r3 = 0.3;
    const auto qs = RampMode::QuasiStaticAsymptotic;
    const double wt = run_engine(single_cycle(0.5, alpha, tau, qs, Thermal<double>{99.5}, Thermal<double>{1.0}))
                          .cycles[0]
                          .w_cycle;
    const double ws = run_engine(single_cycle(0.5, alpha, tau, qs, SqueezedVacuum<double>{1.5},
                                              SqueezedVacuum<double>{0.3}))
                          .cycles[0]
                          .w_cycle;
    EXPECT_NEAR(wt, analytics::work_qs_thermal(in), 0.01 * std::abs(wt)) << at;
    EXPECT_NEAR(ws, analytics::work_qs_squeezed(in), 0.01 * std::abs(ws)) << at;
    const double nu = nu12_after_heating(single_cycle(0.5, alpha, tau, qs, Thermal<double>{99.5}, Thermal<double>{1.0}));
    EXPECT_NEAR(nu, analytics::nu12_qs_thermal(in), 20 * at * at * at);
  }
}

TEST(QuasiStaticEigenvalue, Examples) {
  auto in = input(0.1, 0.1, 0.0);
  in.c1 = kC1;
  in.c3 = 2.5;
  EXPECT_NEAR(analytics::nu12_qs_thermal(in), 1.25, 1e-15);
  // T3 = 0 stays above 1/2.
  in.c3 = 1;
  in.tau_hot = 1;
  EXPECT_GT(analytics::nu12_qs_thermal(in), 0.5);
  EXPECT_NEAR(analytics::nu12_qs_squeezed_special(0.1, 1.0, 1.0), 0.382479880635619848, 1e-15);
  EXPECT_EQ(analytics::nu12_qs_squeezed_special(0.1, 0.0, 1.0), 0.5);
  EXPECT_LT(analytics::nu12_qs_squeezed_special(1e-3, 1.0, 0.01), 0.5);
}

TEST(Predicate, ExampleRightHandSide) {
  // (1 + 0.01) / 0.2 = 5.05: coth(beta1) < 5.05 entangles.
  EXPECT_TRUE(analytics::thermal_entanglement_predicate(0.21, 1.0, 0.1));
  EXPECT_FALSE(analytics::thermal_entanglement_predicate(0.19, 1.0, 0.1));
}

}  // namespace
}  // namespace qhe
