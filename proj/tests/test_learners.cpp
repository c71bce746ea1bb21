#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "obal/learners.hpp"

using obal::average_ensemble_predict;
using obal::average_ensemble_proba;
using obal::BaseClassifier;
using obal::GaussianNaiveBayes;
using obal::HoeffdingTree;
using obal::HoeffdingTreeParams;
using obal::Instance;
using obal::LeafPrediction;

namespace {

Instance labeled(std::vector<double> x, int y) {
  return Instance(std::move(x), y, 0);
}

Instance unlabeled(std::vector<double> x) {
  return Instance(std::move(x), std::nullopt, 0);
}

void check_distribution(const std::vector<double>& dist, int classes) {
  REQUIRE(static_cast<int>(dist.size()) == classes);
  double total = 0.0;
  for (double p : dist) {
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
}

// Two well-separated 1-d classes: class 0 near 0, class 1 near 10.
Instance separable_sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::normal_distribution<double> noise(0.0, 0.5);
  const int y = coin(rng);
  return labeled({(y == 0 ? 0.0 : 10.0) + noise(rng)}, y);
}

// Fixed-output stub used to pin ensemble arithmetic.
class FixedClassifier : public BaseClassifier {
 public:
  explicit FixedClassifier(std::vector<double> dist)
      : dist_(std::move(dist)) {}
  int dimension() const override { return 1; }
  int class_count() const override { return static_cast<int>(dist_.size()); }
  double weight_seen() const override { return 1.0; }
  void train(const Instance&, double) override {}
  std::vector<double> predict_proba(const Instance&) const override {
    return dist_;
  }
  std::unique_ptr<BaseClassifier> clone() const override {
    return std::make_unique<FixedClassifier>(dist_);
  }
  nlohmann::json snapshot() const override { return {}; }

 private:
  std::vector<double> dist_;
};

}  // namespace

TEST_CASE("weight 0 training is an exact no-op for both learners") {
  GaussianNaiveBayes nb(2, 2);
  HoeffdingTree tree(2, 2);
  nb.train(labeled({1.0, 2.0}, 0), 1.0);
  tree.train(labeled({1.0, 2.0}, 0), 1.0);
  const auto nb_before = nb.snapshot();
  const auto tree_before = tree.snapshot();
  nb.train(labeled({5.0, -3.0}, 1), 0.0);
  tree.train(labeled({5.0, -3.0}, 1), 0.0);
  CHECK(nb.snapshot() == nb_before);
  CHECK(tree.snapshot() == tree_before);
}

TEST_CASE("weight 2 equals the same instance trained twice at weight 1") {
  GaussianNaiveBayes nb_once(1, 2), nb_twice(1, 2);
  HoeffdingTree tree_once(1, 2), tree_twice(1, 2);
  const Instance x = labeled({3.5}, 1);
  nb_once.train(x, 2.0);
  nb_twice.train(x, 1.0);
  nb_twice.train(x, 1.0);
  tree_once.train(x, 2.0);
  tree_twice.train(x, 1.0);
  tree_twice.train(x, 1.0);
  CHECK(nb_once.snapshot() == nb_twice.snapshot());
  CHECK(tree_once.snapshot() == tree_twice.snapshot());
}

TEST_CASE("weight additivity: a then b equals a+b on random sequences") {
  // Integer features and dyadic weights make every partial product exactly
  // representable, so the sufficient statistics must match bit for bit.
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> value(-20, 20);
  std::uniform_int_distribution<int> quarters(1, 8);
  std::uniform_int_distribution<int> coin(0, 1);
  GaussianNaiveBayes split_weights(1, 2), joint(1, 2);
  for (int i = 0; i < 50; ++i) {
    const Instance x = labeled({static_cast<double>(value(rng))}, coin(rng));
    const double a = quarters(rng) / 4.0, b = quarters(rng) / 4.0;
    split_weights.train(x, a);
    split_weights.train(x, b);
    joint.train(x, a + b);
  }
  CHECK(split_weights.snapshot() == joint.snapshot());
}

TEST_CASE("naive Bayes separates two hand-checked classes") {
  // Class 0 sits at {0, 1}, class 1 at {10, 11}: posteriors are dominated
  // by the Gaussian term, so every training point classifies correctly.
  GaussianNaiveBayes nb(1, 2);
  const std::vector<Instance> points = {labeled({0.0}, 0), labeled({1.0}, 0),
                                        labeled({10.0}, 1),
                                        labeled({11.0}, 1)};
  for (const Instance& p : points) nb.train(p, 1.0);
  for (const Instance& p : points) {
    CHECK(nb.predict(p) == *p.label);
  }
}

TEST_CASE("prediction errors: untrained classifier and dimension mismatch") {
  GaussianNaiveBayes nb(2, 2);
  HoeffdingTree tree(2, 2);
  CHECK_THROWS_AS(nb.predict_proba(unlabeled({1.0, 2.0})), std::logic_error);
  CHECK_THROWS_AS(tree.predict_proba(unlabeled({1.0, 2.0})),
                  std::logic_error);
  nb.train(labeled({1.0, 2.0}, 0), 1.0);
  CHECK_THROWS_AS(nb.predict_proba(unlabeled({1.0})), std::invalid_argument);
}

TEST_CASE("training errors: missing label, bad label, negative weight") {
  GaussianNaiveBayes nb(1, 2);
  CHECK_THROWS_AS(nb.train(unlabeled({1.0}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nb.train(labeled({1.0}, 2), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nb.train(labeled({1.0}, -1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nb.train(labeled({1.0}, 0), -0.5), std::invalid_argument);
}

TEST_CASE("classifier trained only on class 0 predicts class 0") {
  GaussianNaiveBayes nb(1, 3);
  HoeffdingTree tree(1, 3);
  for (int i = 0; i < 5; ++i) {
    nb.train(labeled({static_cast<double>(i)}, 0), 1.0);
    tree.train(labeled({static_cast<double>(i)}, 0), 1.0);
  }
  CHECK(obal::argmax_lowest(nb.predict_proba(unlabeled({2.0}))) == 0);
  CHECK(obal::argmax_lowest(tree.predict_proba(unlabeled({2.0}))) == 0);
}

TEST_CASE("symmetric evidence gives a near-uniform naive Bayes posterior") {
  GaussianNaiveBayes nb(1, 2);
  nb.train(labeled({-1.0}, 0), 1.0);
  nb.train(labeled({-2.0}, 0), 1.0);
  nb.train(labeled({1.0}, 1), 1.0);
  nb.train(labeled({2.0}, 1), 1.0);
  const auto dist = nb.predict_proba(unlabeled({0.0}));
  CHECK(dist[0] == doctest::Approx(0.5));
  CHECK(dist[1] == doctest::Approx(0.5));
}

TEST_CASE("distributions stay valid after every update") {
  std::mt19937_64 rng(11);
  GaussianNaiveBayes nb(1, 2);
  HoeffdingTree tree(1, 2, {.grace_period = 20});
  for (int i = 0; i < 200; ++i) {
    const Instance x = separable_sample(rng);
    nb.train(x, 0.5 + (i % 3));
    tree.train(x, 0.5 + (i % 3));
    check_distribution(nb.predict_proba(unlabeled(x.features)), 2);
    check_distribution(tree.predict_proba(unlabeled(x.features)), 2);
  }
}

TEST_CASE("majority-mode tree before the first split: smoothed leaf counts") {
  // Three class-0 instances, one class-1: smoothed counts are
  // (3+1)/(4+2) = 2/3 and (1+1)/(4+2) = 1/3.
  HoeffdingTree tree(1, 2, {.leaf_prediction = LeafPrediction::kMajority});
  tree.train(labeled({0.0}, 0), 1.0);
  tree.train(labeled({1.0}, 0), 1.0);
  tree.train(labeled({2.0}, 0), 1.0);
  tree.train(labeled({9.0}, 1), 1.0);
  CHECK(tree.leaf_count() == 1);
  const auto dist = tree.predict_proba(unlabeled({4.0}));
  CHECK(dist[0] == doctest::Approx(2.0 / 3.0));
  CHECK(dist[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("naive-Bayes-mode tree matches plain naive Bayes before a split") {
  std::mt19937_64 rng(3);
  GaussianNaiveBayes nb(1, 2);
  HoeffdingTree tree(1, 2);  // grace 200 > sample count: stays one leaf
  for (int i = 0; i < 60; ++i) {
    const Instance x = separable_sample(rng);
    nb.train(x, 1.0);
    tree.train(x, 1.0);
  }
  CHECK(tree.leaf_count() == 1);
  for (double v : {-1.0, 0.5, 4.0, 9.5, 11.0}) {
    const auto a = nb.predict_proba(unlabeled({v}));
    const auto b = tree.predict_proba(unlabeled({v}));
    CHECK(a[0] == doctest::Approx(b[0]));
    CHECK(a[1] == doctest::Approx(b[1]));
  }
}

TEST_CASE("tree splits on separable data once the grace period allows") {
  std::mt19937_64 rng(19);
  HoeffdingTree tree(1, 2, {.grace_period = 50});
  int i = 0;
  for (; i < 49; ++i) tree.train(separable_sample(rng), 1.0);
  CHECK(tree.leaf_count() == 1);  // below the grace period: no check yet
  for (; i < 400; ++i) tree.train(separable_sample(rng), 1.0);
  CHECK(tree.leaf_count() > 1);
  // After splitting on such data the tree routes both classes correctly.
  CHECK(tree.predict(unlabeled({0.0})) == 0);
  CHECK(tree.predict(unlabeled({10.0})) == 1);
}

TEST_CASE("tree never splits on a feature carrying no signal") {
  std::mt19937_64 rng(23);
  HoeffdingTree tree(1, 2, {.grace_period = 20});
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> x(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    tree.train(labeled({x(rng)}, coin(rng)), 1.0);
  }
  CHECK(tree.leaf_count() == 1);
}

TEST_CASE("average ensemble: single member returns its own argmax") {
  FixedClassifier a({0.3, 0.7});
  CHECK(average_ensemble_predict({&a}, unlabeled({0.0})) == 1);
}

TEST_CASE("average ensemble: exact tie breaks toward class 0") {
  FixedClassifier a({0.9, 0.1}), b({0.1, 0.9});
  CHECK(average_ensemble_predict({&a, &b}, unlabeled({0.0})) == 0);
}

TEST_CASE("average ensemble: three members, mean (0.467, 0.533) -> class 1") {
  FixedClassifier a({0.6, 0.4}), b({0.6, 0.4}), c({0.2, 0.8});
  const auto mean = average_ensemble_proba({&a, &b, &c}, unlabeled({0.0}));
  CHECK(mean[0] == doctest::Approx(1.4 / 3.0));
  CHECK(mean[1] == doctest::Approx(1.6 / 3.0));
  CHECK(average_ensemble_predict({&a, &b, &c}, unlabeled({0.0})) == 1);
}

TEST_CASE("average ensemble rejects an empty member list") {
  CHECK_THROWS_AS(average_ensemble_predict({}, unlabeled({0.0})),
                  std::invalid_argument);
}

TEST_CASE("snapshots round-trip both learners exactly") {
  std::mt19937_64 rng(31);
  GaussianNaiveBayes nb(1, 2);
  HoeffdingTree tree(1, 2, {.grace_period = 30});
  for (int i = 0; i < 300; ++i) {
    const Instance x = separable_sample(rng);
    nb.train(x, 1.0 + (i % 2));
    tree.train(x, 1.0 + (i % 2));
  }
  CHECK(tree.leaf_count() > 1);  // exercise internal-node serialization

  const auto nb_restored = obal::classifier_from_snapshot(nb.snapshot());
  const auto tree_restored = obal::classifier_from_snapshot(tree.snapshot());
  CHECK(nb_restored->snapshot() == nb.snapshot());
  CHECK(tree_restored->snapshot() == tree.snapshot());
  for (double v : {-2.0, 0.0, 3.3, 5.0, 10.0, 12.0}) {
    CHECK(nb_restored->predict_proba(unlabeled({v})) ==
          nb.predict_proba(unlabeled({v})));
    CHECK(tree_restored->predict_proba(unlabeled({v})) ==
          tree.predict_proba(unlabeled({v})));
  }
  CHECK_THROWS_AS(obal::classifier_from_snapshot({{"type", "perceptron"}}),
                  std::invalid_argument);
}

TEST_CASE("clone is independent of the original") {
  std::mt19937_64 rng(41);
  HoeffdingTree tree(1, 2, {.grace_period = 30});
  for (int i = 0; i < 120; ++i) tree.train(separable_sample(rng), 1.0);
  const auto frozen = tree.clone();
  const auto before = frozen->predict_proba(unlabeled({5.0}));
  for (int i = 0; i < 500; ++i) tree.train(separable_sample(rng), 1.0);
  CHECK(frozen->predict_proba(unlabeled({5.0})) == before);
  CHECK(frozen->snapshot() != tree.snapshot());
}
