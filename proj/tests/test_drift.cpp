#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "obal/drift.hpp"

using obal::DdmDetector;
using obal::DriftStatus;
using obal::TargetWindowConfig;
using obal::TargetWindowDetector;
using obal::window_drift_decision;

TEST_CASE("DDM: an all-correct stream stays stable") {
  DdmDetector ddm;
  for (int i = 0; i < 1000; ++i) {
    CHECK(ddm.update(true) == DriftStatus::kStable);
  }
}

TEST_CASE("DDM: a constant moderate error rate stays stable") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution err(0.1);
  DdmDetector ddm;
  for (int i = 0; i < 2000; ++i) {
    CHECK(ddm.update(!err(rng)) != DriftStatus::kDrift);
  }
}

TEST_CASE("DDM: error rate jumping 0.1 -> 0.5 drifts within 500 instances") {
  std::mt19937_64 rng(42);
  DdmDetector ddm;
  std::bernoulli_distribution low(0.1);
  for (int i = 0; i < 500; ++i) ddm.update(!low(rng));
  std::bernoulli_distribution high(0.5);
  int delay = -1;
  for (int i = 0; i < 500; ++i) {
    if (ddm.update(!high(rng)) == DriftStatus::kDrift) {
      delay = i + 1;
      break;
    }
  }
  REQUIRE(delay > 0);
  CHECK(delay <= 500);
}

TEST_CASE("DDM: a single error as the very first update does not drift") {
  DdmDetector ddm;
  CHECK(ddm.update(false) == DriftStatus::kStable);
}

TEST_CASE("DDM: thresholds are inactive during the warm-up period") {
  DdmDetector ddm;
  // All-wrong updates: p=1 throughout, yet nothing may fire before 30.
  for (int i = 0; i < 29; ++i) {
    CHECK(ddm.update(false) == DriftStatus::kStable);
  }
}

TEST_CASE("DDM: p and s follow their definitions") {
  DdmDetector ddm;
  for (int i = 0; i < 8; ++i) ddm.update(i % 4 != 0);  // 2 errors in 8
  CHECK(ddm.count() == 8);
  CHECK(ddm.error_rate() == doctest::Approx(0.25));
  CHECK(ddm.deviation() == doctest::Approx(std::sqrt(0.25 * 0.75 / 8.0)));
}

TEST_CASE("DDM: warning precedes drift on a gradual degradation") {
  std::mt19937_64 rng(7);
  DdmDetector ddm;
  std::bernoulli_distribution low(0.05);
  for (int i = 0; i < 400; ++i) ddm.update(!low(rng));
  bool saw_warning = false, saw_drift = false;
  std::bernoulli_distribution high(0.6);
  for (int i = 0; i < 400 && !saw_drift; ++i) {
    const DriftStatus s = ddm.update(!high(rng));
    saw_warning = saw_warning || s == DriftStatus::kWarning;
    saw_drift = s == DriftStatus::kDrift;
  }
  CHECK(saw_warning);
  CHECK(saw_drift);
}

TEST_CASE("DDM: state resets after a reported drift") {
  std::mt19937_64 rng(11);
  DdmDetector ddm;
  std::bernoulli_distribution low(0.05);
  for (int i = 0; i < 300; ++i) ddm.update(!low(rng));
  std::bernoulli_distribution high(0.7);
  bool drifted = false;
  for (int i = 0; i < 500 && !drifted; ++i) {
    drifted = ddm.update(!high(rng)) == DriftStatus::kDrift;
  }
  REQUIRE(drifted);
  CHECK(ddm.count() == 0);  // fresh counters
  // A clean stream after the reset must stay stable through warm-up again.
  for (int i = 0; i < 200; ++i) {
    CHECK(ddm.update(true) == DriftStatus::kStable);
  }
}

TEST_CASE("window decision: worked arithmetic example") {
  // mu_ref = 0.5, sigma = 0.1, n = 100, z = 3: threshold is 0.53.
  CHECK(window_drift_decision(0.5, 0.54, 0.1, 100, 3.0, false));
  CHECK(window_drift_decision(0.5, 0.54, 0.1, 100, 3.0, true));
  CHECK_FALSE(window_drift_decision(0.5, 0.525, 0.1, 100, 3.0, false));
  CHECK(window_drift_decision(0.5, 0.53, 0.1, 100, 3.0, true));
  // A likelihood drop of the same size: only the two-sided test reacts.
  CHECK(window_drift_decision(0.5, 0.46, 0.1, 100, 3.0, false));
  CHECK_FALSE(window_drift_decision(0.5, 0.46, 0.1, 100, 3.0, true));
}

TEST_CASE("window decision: identical windows never drift") {
  CHECK_FALSE(window_drift_decision(0.5, 0.5, 0.1, 100, 3.0, false));
  CHECK_FALSE(window_drift_decision(0.5, 0.5, 0.0, 100, 3.0, false));
  CHECK_FALSE(window_drift_decision(0.5, 0.5, 0.0, 100, 3.0, true));
}

TEST_CASE("window decision: sigma=0 collapses the threshold to mu_ref") {
  CHECK(window_drift_decision(0.5, 0.5 + 1e-12, 0.0, 100, 3.0, false));
  CHECK(window_drift_decision(0.5, 0.5 + 1e-12, 0.0, 100, 3.0, true));
}

TEST_CASE("window decision: raising mu_det never flips drift back to none") {
  bool fired = false;
  for (double mu_det = 0.5; mu_det <= 0.6; mu_det += 0.001) {
    const bool now = window_drift_decision(0.5, mu_det, 0.1, 100, 3.0, true);
    CHECK((now || !fired));  // once true, stays true as mu_det grows
    fired = fired || now;
  }
  CHECK(fired);
}

TEST_CASE("window detector: no decisions until 2n values arrived") {
  TargetWindowDetector det({.window_size = 10});
  for (int i = 0; i < 19; ++i) {
    CHECK_FALSE(det.update(1.0 + i));  // still warming
    CHECK_FALSE(det.warmed());
  }
  det.update(100.0);
  CHECK(det.warmed());
}

TEST_CASE("window detector: windows slide and stay adjacent") {
  TargetWindowDetector det({.window_size = 3});
  const std::vector<double> warm = {1, 2, 3, 4, 5, 6};
  det.warm_up(warm);
  CHECK(det.mu_ref() == doctest::Approx(2.0));
  CHECK(det.mu_det() == doctest::Approx(5.0));
  det.update(7.0);  // windows become {2,3,4} and {5,6,7}
  CHECK(det.mu_ref() == doctest::Approx(3.0));
  CHECK(det.mu_det() == doctest::Approx(6.0));
  CHECK(det.sigma() == doctest::Approx(1.0));  // sample std of {2,3,4}
}

TEST_CASE("window detector: constant stream with one raised value drifts") {
  TargetWindowDetector det({.window_size = 5});
  for (int i = 0; i < 10; ++i) det.update(0.8);
  CHECK_FALSE(det.update(0.8));  // identical windows
  CHECK(det.update(0.9));       // sigma = 0, mu_det moved up
}

TEST_CASE("window detector: likelihood drop is caught two-sided only") {
  TargetWindowDetector two_sided({.window_size = 5});
  TargetWindowDetector literal({.window_size = 5, .eq11_literal = true});
  for (int i = 0; i < 10; ++i) {
    two_sided.update(0.8);
    literal.update(0.8);
  }
  CHECK(two_sided.update(0.1));
  CHECK_FALSE(literal.update(0.1));
}

TEST_CASE("window detector: rejects non-finite likelihoods, reset clears") {
  TargetWindowDetector det({.window_size = 2});
  CHECK_THROWS_AS(det.update(std::nan("")), std::invalid_argument);
  det.warm_up(std::vector<double>{1, 1, 1, 1});
  CHECK(det.warmed());
  det.reset();
  CHECK_FALSE(det.warmed());
}
