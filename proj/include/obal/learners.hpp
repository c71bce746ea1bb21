#pragma once

#include <memory>
#include <vector>

#include <json.hpp>

#include "obal/core.hpp"

namespace obal {

/// Weighted running Gaussian over one feature within one class. Raw sums
/// keep weighted training exactly additive: weight a then b leaves the
/// same statistics as a single update with weight a + b.
struct GaussianStat {
  double weight = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x, double w);
  double mean() const;
  /// Weighted population variance, floored to keep densities finite.
  double variance() const;
  /// log N(x; mean, variance).
  double log_density(double x) const;
};

/// Abstract incremental classifier over `dimension` features and
/// `class_count` classes. Training takes a per-instance weight; prediction
/// is available once any positive weight has been seen.
class BaseClassifier {
 public:
  virtual ~BaseClassifier() = default;

  virtual int dimension() const = 0;
  virtual int class_count() const = 0;

  /// Total training weight absorbed so far.
  virtual double weight_seen() const = 0;
  bool trained() const { return weight_seen() > 0.0; }

  /// Incorporates one labeled instance with the given nonnegative weight.
  /// Weight 0 is a no-op. Throws std::invalid_argument on a missing label,
  /// an out-of-range label, a negative weight or a dimension mismatch.
  virtual void train(const Instance& instance, double weight) = 0;

  /// Class distribution for one instance: length class_count(), entries
  /// nonnegative and summing to 1. Throws std::logic_error before the
  /// first training instance.
  virtual std::vector<double> predict_proba(const Instance& instance) const = 0;

  /// Argmax of predict_proba, ties broken toward the lowest class index.
  int predict(const Instance& instance) const;

  virtual std::unique_ptr<BaseClassifier> clone() const = 0;

  /// Self-describing document for pool persistence; restored by
  /// classifier_from_snapshot. Round-trips the full learner state.
  virtual nlohmann::json snapshot() const = 0;
};

/// Online Gaussian naive Bayes: weighted class counts plus one GaussianStat
/// per class and feature. Priors use add-1 smoothing.
class GaussianNaiveBayes : public BaseClassifier {
 public:
  GaussianNaiveBayes(int dimension, int class_count);

  int dimension() const override { return dimension_; }
  int class_count() const override { return class_count_; }
  double weight_seen() const override { return total_weight_; }

  void train(const Instance& instance, double weight) override;
  std::vector<double> predict_proba(const Instance& instance) const override;
  std::unique_ptr<BaseClassifier> clone() const override;
  nlohmann::json snapshot() const override;

  static GaussianNaiveBayes from_snapshot(const nlohmann::json& doc);

 private:
  int dimension_;
  int class_count_;
  double total_weight_ = 0.0;
  std::vector<double> class_weight_;
  std::vector<std::vector<GaussianStat>> stats_;  // [class][feature]
};

enum class LeafPrediction {
  kMajority,    // Laplace-smoothed leaf class counts
  kNaiveBayes,  // Gaussian naive Bayes over the leaf statistics
};

struct HoeffdingTreeParams {
  int grace_period = 200;
  double split_confidence = 1e-7;  // delta
  double tie_threshold = 0.05;     // tau
  LeafPrediction leaf_prediction = LeafPrediction::kNaiveBayes;
  /// Candidate thresholds evaluated per numeric feature when a leaf
  /// attempts a split.
  int split_candidates = 10;
};

/// Incremental Hoeffding tree with per-class Gaussian estimators for
/// numeric attributes. A leaf splits only when the information-gain lead of
/// the best feature beats the Hoeffding bound
/// eps = sqrt(R^2 ln(1/delta) / (2n)) on the weighted count n, or when the
/// bound drops below the tie threshold.
class HoeffdingTree : public BaseClassifier {
 public:
  HoeffdingTree(int dimension, int class_count,
                HoeffdingTreeParams params = {});
  HoeffdingTree(HoeffdingTree&&) noexcept;
  HoeffdingTree& operator=(HoeffdingTree&&) noexcept;
  ~HoeffdingTree() override;  // out of line: Node is incomplete here

  int dimension() const override { return dimension_; }
  int class_count() const override { return class_count_; }
  double weight_seen() const override { return total_weight_; }
  const HoeffdingTreeParams& params() const { return params_; }

  /// Number of leaves currently in the tree (1 until the first split).
  int leaf_count() const;

  void train(const Instance& instance, double weight) override;
  std::vector<double> predict_proba(const Instance& instance) const override;
  std::unique_ptr<BaseClassifier> clone() const override;
  nlohmann::json snapshot() const override;

  static HoeffdingTree from_snapshot(const nlohmann::json& doc);

 private:
  struct Node;

  Node* sort_to_leaf(const Instance& instance) const;
  void attempt_split(Node& leaf);
  static nlohmann::json node_to_json(const Node& node);
  static std::unique_ptr<Node> node_from_json(const nlohmann::json& doc,
                                              int dimension, int class_count);

  int dimension_;
  int class_count_;
  HoeffdingTreeParams params_;
  double total_weight_ = 0.0;
  std::unique_ptr<Node> root_;
};

/// Restores any BaseClassifier written by snapshot(), dispatching on the
/// document's "type" field.
std::unique_ptr<BaseClassifier> classifier_from_snapshot(
    const nlohmann::json& doc);

/// Unweighted mean of the members' class distributions.
std::vector<double> average_ensemble_proba(
    const std::vector<const BaseClassifier*>& members,
    const Instance& instance);

/// Argmax of average_ensemble_proba, ties broken toward the lowest class
/// index. Throws std::invalid_argument on an empty member list.
int average_ensemble_predict(const std::vector<const BaseClassifier*>& members,
                             const Instance& instance);

/// Argmax with ties broken toward the lowest index; shared by every
/// prediction path so tie behavior is uniform.
int argmax_lowest(const std::vector<double>& values);

}  // namespace obal
