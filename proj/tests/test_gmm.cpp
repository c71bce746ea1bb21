#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "obal/gmm.hpp"

using obal::DataBatch;
using obal::EmConfig;
using obal::fit_gmm;
using obal::fit_gmm_bic;
using obal::GmmComponent;
using obal::GmmModel;
using obal::Instance;

namespace {

DataBatch batch_1d(const std::vector<double>& values) {
  std::vector<Instance> rows;
  rows.reserve(values.size());
  for (double v : values) rows.emplace_back(std::vector<double>{v},
                                            std::nullopt, 0);
  return DataBatch(std::move(rows), 2);
}

Instance point(std::vector<double> x) {
  return Instance(std::move(x), std::nullopt, 0);
}

GmmModel unit_gaussian_model(int d) {
  GmmModel model;
  model.dimension = d;
  GmmComponent c;
  c.mean = Eigen::VectorXd::Zero(d);
  c.covariance = Eigen::MatrixXd::Identity(d, d);
  c.weight = 1.0;
  model.components.push_back(std::move(c));
  return model;
}

}  // namespace

TEST_CASE("K=1 reduces to the closed-form mean and covariance") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  std::vector<Instance> rows;
  for (int i = 0; i < 40; ++i) {
    rows.emplace_back(std::vector<double>{gauss(rng), 3.0 * gauss(rng)},
                      std::nullopt, i);
  }
  const DataBatch batch(rows, 2);
  const GmmModel model = fit_gmm(batch, 1);
  REQUIRE(model.component_count() == 1);
  CHECK(model.iterations == 0);

  // Independent recomputation of the MLE moments.
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& r : rows) mean += Eigen::Vector2d(r.features.data());
  mean /= rows.size();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& r : rows) {
    const Eigen::Vector2d diff = Eigen::Vector2d(r.features.data()) - mean;
    cov += diff * diff.transpose();
  }
  cov /= rows.size();
  cov += 1e-6 * Eigen::Matrix2d::Identity();

  CHECK((model.components[0].mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((model.components[0].covariance - cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(model.components[0].weight == 1.0);
}

TEST_CASE("K=1 on 10k standard-normal draws recovers mu=0, var=1") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss;
  std::vector<double> values(10000);
  for (double& v : values) v = gauss(rng);
  const GmmModel model = fit_gmm(batch_1d(values), 1);
  CHECK(std::abs(model.components[0].mean(0)) < 0.05);
  CHECK(std::abs(model.components[0].covariance(0, 0) - 1.0) < 0.05);
}

TEST_CASE("two separated 1-D clusters: means and weights match a hard split") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> values;
  for (int i = 0; i < 100; ++i) values.push_back(0.0 + noise(rng));
  for (int i = 0; i < 200; ++i) values.push_back(10.0 + noise(rng));
  const GmmModel model = fit_gmm(batch_1d(values), 2, {.seed = 3});
  REQUIRE(model.component_count() == 2);

  // Brute-force oracle: assign by the midpoint and compute cluster stats.
  double sum_lo = 0.0, sum_hi = 0.0;
  int n_lo = 0, n_hi = 0;
  for (double v : values) {
    if (v < 5.0) {
      sum_lo += v;
      ++n_lo;
    } else {
      sum_hi += v;
      ++n_hi;
    }
  }
  const int lo = model.components[0].mean(0) < model.components[1].mean(0)
                     ? 0
                     : 1;
  const int hi = 1 - lo;
  CHECK(std::abs(model.components[lo].mean(0) - sum_lo / n_lo) < 0.1);
  CHECK(std::abs(model.components[hi].mean(0) - sum_hi / n_hi) < 0.1);
  CHECK(model.components[lo].weight ==
        doctest::Approx(n_lo / 300.0).epsilon(0.05));
  CHECK(model.components[hi].weight ==
        doctest::Approx(n_hi / 300.0).epsilon(0.05));
}

TEST_CASE("EM log-likelihood trace is nondecreasing on 20 random datasets") {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> center(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Instance> rows;
    for (int blob = 0; blob < 3; ++blob) {
      const double cx = center(rng), cy = center(rng);
      const double scale = 0.3 + std::abs(gauss(rng));
      for (int i = 0; i < 60; ++i) {
        rows.emplace_back(
            std::vector<double>{cx + scale * gauss(rng),
                                cy + scale * gauss(rng)},
            std::nullopt, 0);
      }
    }
    const GmmModel model =
        fit_gmm(DataBatch(rows, 2), 3, {.seed = 1000 + trial});
    REQUIRE(model.log_likelihood_trace.size() >= 1);
    for (std::size_t i = 1; i < model.log_likelihood_trace.size(); ++i) {
      CHECK(model.log_likelihood_trace[i] >=
            model.log_likelihood_trace[i - 1] - 1e-9);
    }
    CHECK(model.final_log_likelihood ==
          model.log_likelihood_trace.back());
    double weight_total = 0.0;
    for (const auto& c : model.components) {
      CHECK(c.weight >= 0.0);
      CHECK(c.weight <= 1.0);
      weight_total += c.weight;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance);
      CHECK(es.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
    }
    CHECK(weight_total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("density examples: standard normal peaks") {
  const GmmModel m1 = unit_gaussian_model(1);
  CHECK(obal::max_component_likelihood(m1, point({0.0})) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  const GmmModel m2 = unit_gaussian_model(2);
  CHECK(obal::max_component_likelihood(m2, point({0.0, 0.0})) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi)));
  // Unimodal decay: the peak dominates a point 10 sigma away.
  CHECK(obal::max_component_likelihood(m1, point({0.0})) >
        obal::max_component_likelihood(m1, point({10.0})));
}

TEST_CASE("density stays positive even absurdly far from every component") {
  const GmmModel m = unit_gaussian_model(1);
  CHECK(obal::max_component_likelihood(m, point({1e6})) > 0.0);
  CHECK(obal::normalized_max_component_likelihood(m, point({1e6})) > 0.0);
}

TEST_CASE("normalized likelihood is exp(-mahalanobis^2/2), in (0,1]") {
  GmmModel m = unit_gaussian_model(1);
  m.components[0].covariance(0, 0) = 4.0;  // sigma = 2
  CHECK(obal::normalized_max_component_likelihood(m, point({0.0})) ==
        doctest::Approx(1.0));
  // x = 3: mahalanobis = 1.5, so the weight is exp(-1.125).
  CHECK(obal::normalized_max_component_likelihood(m, point({3.0})) ==
        doctest::Approx(std::exp(-1.125)));
  CHECK(obal::normalized_max_component_likelihood(m, point({1.0})) <= 1.0);
}

TEST_CASE("mixture density integrates to 1 on a 1-D grid") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise;
  std::vector<double> values;
  for (int i = 0; i < 150; ++i) values.push_back(noise(rng));
  for (int i = 0; i < 150; ++i) values.push_back(8.0 + 2.0 * noise(rng));
  const GmmModel model = fit_gmm(batch_1d(values), 2, {.seed = 5});
  double integral = 0.0;
  const double step = 0.01;
  for (double x = -20.0; x <= 30.0; x += step) {
    integral += obal::mixture_density(model, point({x})) * step;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("degenerate batch falls back to a single component") {
  std::vector<double> values(10, 3.14);
  const GmmModel model = fit_gmm(batch_1d(values), 3);
  CHECK(model.degenerate_fallback);
  CHECK(model.component_count() == 1);
  CHECK(model.components[0].mean(0) == doctest::Approx(3.14));
  CHECK(model.components[0].covariance(0, 0) ==
        doctest::Approx(1e-6));  // pure floor
}

TEST_CASE("argument errors: K out of range and dimension mismatch") {
  const DataBatch batch = batch_1d({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(fit_gmm(batch, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_gmm(batch, 4), std::invalid_argument);
  const GmmModel model = fit_gmm(batch, 1);
  CHECK_THROWS_AS(obal::max_component_likelihood(model, point({1.0, 2.0})),
                  std::invalid_argument);
}

TEST_CASE("fits are deterministic in the seed") {
  std::mt19937_64 rng(91);
  std::normal_distribution<double> noise;
  std::vector<double> values;
  for (int i = 0; i < 120; ++i) {
    values.push_back((i % 2 == 0 ? -4.0 : 4.0) + noise(rng));
  }
  const DataBatch batch = batch_1d(values);
  const GmmModel a = fit_gmm(batch, 2, {.seed = 42});
  const GmmModel b = fit_gmm(batch, 2, {.seed = 42});
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
  CHECK(a.components[0].mean(0) == b.components[0].mean(0));
  CHECK(a.components[1].covariance(0, 0) == b.components[1].covariance(0, 0));
}

TEST_CASE("BIC picks two components for two clusters, one for one") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise;
  std::vector<double> bimodal, unimodal;
  for (int i = 0; i < 150; ++i) {
    bimodal.push_back(noise(rng));
    bimodal.push_back(12.0 + noise(rng));
    unimodal.push_back(noise(rng));
  }
  CHECK(fit_gmm_bic(batch_1d(bimodal), 5, {.seed = 9}).component_count() == 2);
  CHECK(fit_gmm_bic(batch_1d(unimodal), 5, {.seed = 9}).component_count() ==
        1);
}

TEST_CASE("gmm serialization round-trips") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise;
  std::vector<double> values;
  for (int i = 0; i < 80; ++i) values.push_back(5.0 * noise(rng));
  const GmmModel model = fit_gmm(batch_1d(values), 2, {.seed = 1});
  const GmmModel restored = obal::gmm_from_json(obal::gmm_to_json(model));
  CHECK(obal::gmm_to_json(restored) == obal::gmm_to_json(model));
  const Instance probe = point({1.7});
  CHECK(obal::max_component_likelihood(restored, probe) ==
        obal::max_component_likelihood(model, probe));
}
