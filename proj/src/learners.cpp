#include "obal/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace obal {
namespace {

// Keeps Gaussian densities finite on degenerate (constant) features.
constexpr double kVarianceFloor = 1e-9;

double normal_cdf(double x, double mean, double sigma) {
  return 0.5 * std::erfc(-(x - mean) / (sigma * std::numbers::sqrt2));
}

// Shannon entropy in bits of an unnormalized nonnegative mass vector.
double entropy_bits(const std::vector<double>& mass) {
  double total = 0.0;
  for (double m : mass) total += m;
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double m : mass) {
    if (m > 0.0) {
      const double p = m / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

void validate_training_input(const Instance& instance, double weight,
                             int dimension, int class_count) {
  if (!instance.label.has_value()) {
    throw std::invalid_argument("train: instance carries no label");
  }
  if (*instance.label < 0 || *instance.label >= class_count) {
    throw std::invalid_argument("train: label out of range");
  }
  if (static_cast<int>(instance.features.size()) != dimension) {
    throw std::invalid_argument("train: feature dimension mismatch");
  }
  if (!(weight >= 0.0)) {
    throw std::invalid_argument("train: weight must be nonnegative");
  }
  for (double x : instance.features) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("train: non-finite feature value");
    }
  }
}

void validate_predict_input(const Instance& instance, int dimension,
                            bool trained) {
  if (!trained) {
    throw std::logic_error("predict: classifier has seen no training data");
  }
  if (static_cast<int>(instance.features.size()) != dimension) {
    throw std::invalid_argument("predict: feature dimension mismatch");
  }
}

// Turns per-class log scores into a normalized distribution.
std::vector<double> softmax(std::vector<double> log_scores) {
  const double top = *std::max_element(log_scores.begin(), log_scores.end());
  double total = 0.0;
  for (double& s : log_scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : log_scores) s /= total;
  return log_scores;
}

// Naive-Bayes log scores shared by GaussianNaiveBayes and tree leaves:
// add-1 smoothed prior plus per-feature Gaussian log likelihoods. Classes
// with no observed evidence fall back to the prior alone.
std::vector<double> naive_bayes_log_scores(
    const Instance& instance, const std::vector<double>& class_weight,
    const std::vector<std::vector<GaussianStat>>& stats) {
  const int class_count = static_cast<int>(class_weight.size());
  double total = 0.0;
  for (double w : class_weight) total += w;
  std::vector<double> scores(class_count, 0.0);
  for (int c = 0; c < class_count; ++c) {
    scores[c] = std::log((class_weight[c] + 1.0) / (total + class_count));
    for (std::size_t f = 0; f < instance.features.size(); ++f) {
      if (stats[c][f].weight > 0.0) {
        scores[c] += stats[c][f].log_density(instance.features[f]);
      }
    }
  }
  return scores;
}

std::vector<double> smoothed_distribution(
    const std::vector<double>& class_weight) {
  double total = 0.0;
  for (double w : class_weight) total += w;
  std::vector<double> dist(class_weight.size());
  for (std::size_t c = 0; c < dist.size(); ++c) {
    dist[c] = (class_weight[c] + 1.0) / (total + dist.size());
  }
  return dist;
}

nlohmann::json stat_to_json(const GaussianStat& s) {
  return nlohmann::json::array({s.weight, s.sum, s.sum_sq});
}

GaussianStat stat_from_json(const nlohmann::json& j) {
  GaussianStat s;
  s.weight = j.at(0).get<double>();
  s.sum = j.at(1).get<double>();
  s.sum_sq = j.at(2).get<double>();
  return s;
}

nlohmann::json stats_to_json(
    const std::vector<std::vector<GaussianStat>>& stats) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& per_class : stats) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& s : per_class) row.push_back(stat_to_json(s));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<GaussianStat>> stats_from_json(
    const nlohmann::json& j) {
  std::vector<std::vector<GaussianStat>> stats;
  for (const auto& row : j) {
    std::vector<GaussianStat> per_class;
    for (const auto& s : row) per_class.push_back(stat_from_json(s));
    stats.push_back(std::move(per_class));
  }
  return stats;
}

}  // namespace

void GaussianStat::add(double x, double w) {
  weight += w;
  sum += w * x;
  sum_sq += w * x * x;
}

double GaussianStat::mean() const { return weight > 0.0 ? sum / weight : 0.0; }

double GaussianStat::variance() const {
  if (weight <= 0.0) return kVarianceFloor;
  const double m = mean();
  return std::max(kVarianceFloor, sum_sq / weight - m * m);
}

double GaussianStat::log_density(double x) const {
  const double var = variance();
  const double diff = x - mean();
  return -0.5 * std::log(2.0 * std::numbers::pi * var) -
         diff * diff / (2.0 * var);
}

int BaseClassifier::predict(const Instance& instance) const {
  return argmax_lowest(predict_proba(instance));
}

// ---------------------------------------------------------------------------
// GaussianNaiveBayes

GaussianNaiveBayes::GaussianNaiveBayes(int dimension, int class_count)
    : dimension_(dimension), class_count_(class_count) {
  if (dimension < 1 || class_count < 2) {
    throw std::invalid_argument(
        "GaussianNaiveBayes: need dimension >= 1 and class_count >= 2");
  }
  class_weight_.assign(class_count_, 0.0);
  stats_.assign(class_count_, std::vector<GaussianStat>(dimension_));
}

void GaussianNaiveBayes::train(const Instance& instance, double weight) {
  validate_training_input(instance, weight, dimension_, class_count_);
  if (weight == 0.0) return;
  const int label = *instance.label;
  total_weight_ += weight;
  class_weight_[label] += weight;
  for (int f = 0; f < dimension_; ++f) {
    stats_[label][f].add(instance.features[f], weight);
  }
}

std::vector<double> GaussianNaiveBayes::predict_proba(
    const Instance& instance) const {
  validate_predict_input(instance, dimension_, trained());
  return softmax(naive_bayes_log_scores(instance, class_weight_, stats_));
}

std::unique_ptr<BaseClassifier> GaussianNaiveBayes::clone() const {
  return std::make_unique<GaussianNaiveBayes>(*this);
}

nlohmann::json GaussianNaiveBayes::snapshot() const {
  return {{"format", 1},
          {"type", "gaussian_naive_bayes"},
          {"dimension", dimension_},
          {"classes", class_count_},
          {"weight_seen", total_weight_},
          {"class_weight", class_weight_},
          {"stats", stats_to_json(stats_)}};
}

GaussianNaiveBayes GaussianNaiveBayes::from_snapshot(
    const nlohmann::json& doc) {
  if (doc.at("type") != "gaussian_naive_bayes" || doc.at("format") != 1) {
    throw std::invalid_argument("snapshot: not a gaussian_naive_bayes v1");
  }
  GaussianNaiveBayes clf(doc.at("dimension").get<int>(),
                         doc.at("classes").get<int>());
  clf.total_weight_ = doc.at("weight_seen").get<double>();
  clf.class_weight_ = doc.at("class_weight").get<std::vector<double>>();
  clf.stats_ = stats_from_json(doc.at("stats"));
  return clf;
}

// ---------------------------------------------------------------------------
// HoeffdingTree

struct HoeffdingTree::Node {
  // split_feature < 0 marks a leaf.
  int split_feature = -1;
  double split_threshold = 0.0;
  std::unique_ptr<Node> left, right;

  // Leaf state. class_weight includes the distribution inherited from the
  // parent split estimate; observed_class_weight counts only real training
  // weight and feeds split scoring.
  std::vector<double> class_weight;
  std::vector<double> observed_class_weight;
  std::vector<std::vector<GaussianStat>> stats;  // [class][feature]
  std::vector<double> feature_min, feature_max;
  double weight_at_last_check = 0.0;

  Node() = default;  // bare shell for deep_copy / deserialization
  Node(int dimension, int class_count, std::vector<double> inherited) {
    class_weight = std::move(inherited);
    class_weight.resize(class_count, 0.0);
    observed_class_weight.assign(class_count, 0.0);
    stats.assign(class_count, std::vector<GaussianStat>(dimension));
    feature_min.assign(dimension, std::numeric_limits<double>::infinity());
    feature_max.assign(dimension, -std::numeric_limits<double>::infinity());
    for (double w : class_weight) weight_at_last_check += w;
  }

  bool is_leaf() const { return split_feature < 0; }

  double total_class_weight() const {
    double total = 0.0;
    for (double w : class_weight) total += w;
    return total;
  }

  std::unique_ptr<Node> deep_copy() const {
    auto copy = std::make_unique<Node>();
    copy->split_feature = split_feature;
    copy->split_threshold = split_threshold;
    copy->class_weight = class_weight;
    copy->observed_class_weight = observed_class_weight;
    copy->stats = stats;
    copy->feature_min = feature_min;
    copy->feature_max = feature_max;
    copy->weight_at_last_check = weight_at_last_check;
    if (left) copy->left = left->deep_copy();
    if (right) copy->right = right->deep_copy();
    return copy;
  }
};

HoeffdingTree::HoeffdingTree(HoeffdingTree&&) noexcept = default;
HoeffdingTree& HoeffdingTree::operator=(HoeffdingTree&&) noexcept = default;
HoeffdingTree::~HoeffdingTree() = default;

HoeffdingTree::HoeffdingTree(int dimension, int class_count,
                             HoeffdingTreeParams params)
    : dimension_(dimension), class_count_(class_count), params_(params) {
  if (dimension < 1 || class_count < 2) {
    throw std::invalid_argument(
        "HoeffdingTree: need dimension >= 1 and class_count >= 2");
  }
  if (params_.grace_period < 1 || params_.split_confidence <= 0.0 ||
      params_.split_confidence >= 1.0 || params_.split_candidates < 1) {
    throw std::invalid_argument("HoeffdingTree: invalid parameters");
  }
  root_ = std::make_unique<Node>(dimension_, class_count_,
                                 std::vector<double>{});
}

HoeffdingTree::Node* HoeffdingTree::sort_to_leaf(
    const Instance& instance) const {
  Node* node = root_.get();
  while (!node->is_leaf()) {
    node = instance.features[node->split_feature] <= node->split_threshold
               ? node->left.get()
               : node->right.get();
  }
  return node;
}

void HoeffdingTree::train(const Instance& instance, double weight) {
  validate_training_input(instance, weight, dimension_, class_count_);
  if (weight == 0.0) return;
  total_weight_ += weight;
  Node& leaf = *sort_to_leaf(instance);
  const int label = *instance.label;
  leaf.class_weight[label] += weight;
  leaf.observed_class_weight[label] += weight;
  for (int f = 0; f < dimension_; ++f) {
    const double x = instance.features[f];
    leaf.stats[label][f].add(x, weight);
    leaf.feature_min[f] = std::min(leaf.feature_min[f], x);
    leaf.feature_max[f] = std::max(leaf.feature_max[f], x);
  }
  if (leaf.total_class_weight() - leaf.weight_at_last_check >=
      params_.grace_period) {
    attempt_split(leaf);
  }
}

void HoeffdingTree::attempt_split(Node& leaf) {
  leaf.weight_at_last_check = leaf.total_class_weight();

  const double h0 = entropy_bits(leaf.observed_class_weight);
  double observed_total = 0.0;
  for (double w : leaf.observed_class_weight) observed_total += w;
  if (observed_total <= 0.0 || h0 <= 0.0) return;  // pure or empty leaf

  struct Candidate {
    double gain = -1.0;
    int feature = -1;
    double threshold = 0.0;
    std::vector<double> left_mass, right_mass;
  };
  Candidate best;
  double second_gain = -1.0;

  for (int f = 0; f < dimension_; ++f) {
    if (!(leaf.feature_max[f] > leaf.feature_min[f])) continue;
    Candidate feature_best;
    const double lo = leaf.feature_min[f];
    const double step = (leaf.feature_max[f] - lo) /
                        (params_.split_candidates + 1);
    for (int i = 1; i <= params_.split_candidates; ++i) {
      const double t = lo + i * step;
      std::vector<double> left(class_count_, 0.0), right(class_count_, 0.0);
      for (int c = 0; c < class_count_; ++c) {
        const GaussianStat& s = leaf.stats[c][f];
        if (s.weight <= 0.0) continue;
        const double p_left =
            normal_cdf(t, s.mean(), std::sqrt(s.variance()));
        left[c] = s.weight * p_left;
        right[c] = s.weight - left[c];
      }
      double w_left = 0.0, w_right = 0.0;
      for (int c = 0; c < class_count_; ++c) {
        w_left += left[c];
        w_right += right[c];
      }
      const double gain =
          h0 - (w_left * entropy_bits(left) + w_right * entropy_bits(right)) /
                   observed_total;
      if (gain > feature_best.gain) {
        feature_best = {gain, f, t, std::move(left), std::move(right)};
      }
    }
    if (feature_best.feature < 0) continue;
    if (feature_best.gain > best.gain) {
      second_gain = best.gain;
      best = std::move(feature_best);
    } else if (feature_best.gain > second_gain) {
      second_gain = feature_best.gain;
    }
  }
  if (best.feature < 0 || best.gain <= 0.0) return;

  // Hoeffding bound on the weighted count; R = log2(C) bounds the
  // information-gain range.
  const double range = std::log2(static_cast<double>(class_count_));
  const double n = leaf.total_class_weight();
  const double eps = std::sqrt(range * range *
                               std::log(1.0 / params_.split_confidence) /
                               (2.0 * n));
  const double lead = best.gain - std::max(second_gain, 0.0);
  if (lead <= eps && eps >= params_.tie_threshold) return;

  leaf.split_feature = best.feature;
  leaf.split_threshold = best.threshold;
  leaf.left = std::make_unique<Node>(dimension_, class_count_,
                                     std::move(best.left_mass));
  leaf.right = std::make_unique<Node>(dimension_, class_count_,
                                      std::move(best.right_mass));
  leaf.class_weight.clear();
  leaf.observed_class_weight.clear();
  leaf.stats.clear();
  leaf.feature_min.clear();
  leaf.feature_max.clear();
}

std::vector<double> HoeffdingTree::predict_proba(
    const Instance& instance) const {
  validate_predict_input(instance, dimension_, trained());
  const Node& leaf = *sort_to_leaf(instance);
  double observed = 0.0;
  for (double w : leaf.observed_class_weight) observed += w;
  if (params_.leaf_prediction == LeafPrediction::kNaiveBayes &&
      observed > 0.0) {
    return softmax(
        naive_bayes_log_scores(instance, leaf.class_weight, leaf.stats));
  }
  return smoothed_distribution(leaf.class_weight);
}

int HoeffdingTree::leaf_count() const {
  int count = 0;
  const auto walk = [&count](const Node& node, const auto& self) -> void {
    if (node.is_leaf()) {
      ++count;
      return;
    }
    self(*node.left, self);
    self(*node.right, self);
  };
  walk(*root_, walk);
  return count;
}

std::unique_ptr<BaseClassifier> HoeffdingTree::clone() const {
  auto copy = std::make_unique<HoeffdingTree>(dimension_, class_count_,
                                              params_);
  copy->total_weight_ = total_weight_;
  copy->root_ = root_->deep_copy();
  return copy;
}

nlohmann::json HoeffdingTree::node_to_json(const Node& node) {
  nlohmann::json j;
  j["split_feature"] = node.split_feature;
  if (!node.is_leaf()) {
    j["split_threshold"] = node.split_threshold;
    j["left"] = node_to_json(*node.left);
    j["right"] = node_to_json(*node.right);
    return j;
  }
  j["class_weight"] = node.class_weight;
  j["observed_class_weight"] = node.observed_class_weight;
  j["stats"] = stats_to_json(node.stats);
  j["weight_at_last_check"] = node.weight_at_last_check;
  // Infinities mark "nothing observed yet"; JSON cannot carry them.
  nlohmann::json mins = nlohmann::json::array();
  nlohmann::json maxs = nlohmann::json::array();
  for (std::size_t f = 0; f < node.feature_min.size(); ++f) {
    const bool seen = node.feature_max[f] >= node.feature_min[f];
    mins.push_back(seen ? nlohmann::json(node.feature_min[f])
                        : nlohmann::json());
    maxs.push_back(seen ? nlohmann::json(node.feature_max[f])
                        : nlohmann::json());
  }
  j["feature_min"] = std::move(mins);
  j["feature_max"] = std::move(maxs);
  return j;
}

std::unique_ptr<HoeffdingTree::Node> HoeffdingTree::node_from_json(
    const nlohmann::json& doc, int dimension, int class_count) {
  const int split_feature = doc.at("split_feature").get<int>();
  if (split_feature >= 0) {
    auto node = std::make_unique<Node>();
    node->split_feature = split_feature;
    node->split_threshold = doc.at("split_threshold").get<double>();
    node->left = node_from_json(doc.at("left"), dimension, class_count);
    node->right = node_from_json(doc.at("right"), dimension, class_count);
    return node;
  }
  auto node = std::make_unique<Node>(dimension, class_count,
                                     std::vector<double>{});
  node->class_weight = doc.at("class_weight").get<std::vector<double>>();
  node->observed_class_weight =
      doc.at("observed_class_weight").get<std::vector<double>>();
  node->stats = stats_from_json(doc.at("stats"));
  node->weight_at_last_check = doc.at("weight_at_last_check").get<double>();
  for (int f = 0; f < dimension; ++f) {
    const auto& lo = doc.at("feature_min").at(f);
    const auto& hi = doc.at("feature_max").at(f);
    if (!lo.is_null()) node->feature_min[f] = lo.get<double>();
    if (!hi.is_null()) node->feature_max[f] = hi.get<double>();
  }
  return node;
}

nlohmann::json HoeffdingTree::snapshot() const {
  const char* leaf_mode =
      params_.leaf_prediction == LeafPrediction::kNaiveBayes ? "naive_bayes"
                                                             : "majority";
  return {{"format", 1},
          {"type", "hoeffding_tree"},
          {"dimension", dimension_},
          {"classes", class_count_},
          {"weight_seen", total_weight_},
          {"params",
           {{"grace_period", params_.grace_period},
            {"split_confidence", params_.split_confidence},
            {"tie_threshold", params_.tie_threshold},
            {"leaf_prediction", leaf_mode},
            {"split_candidates", params_.split_candidates}}},
          {"root", node_to_json(*root_)}};
}

HoeffdingTree HoeffdingTree::from_snapshot(const nlohmann::json& doc) {
  if (doc.at("type") != "hoeffding_tree" || doc.at("format") != 1) {
    throw std::invalid_argument("snapshot: not a hoeffding_tree v1");
  }
  const auto& p = doc.at("params");
  HoeffdingTreeParams params;
  params.grace_period = p.at("grace_period").get<int>();
  params.split_confidence = p.at("split_confidence").get<double>();
  params.tie_threshold = p.at("tie_threshold").get<double>();
  params.leaf_prediction = p.at("leaf_prediction") == "naive_bayes"
                               ? LeafPrediction::kNaiveBayes
                               : LeafPrediction::kMajority;
  params.split_candidates = p.at("split_candidates").get<int>();
  HoeffdingTree tree(doc.at("dimension").get<int>(),
                     doc.at("classes").get<int>(), params);
  tree.total_weight_ = doc.at("weight_seen").get<double>();
  tree.root_ =
      node_from_json(doc.at("root"), tree.dimension_, tree.class_count_);
  return tree;
}

// ---------------------------------------------------------------------------
// Ensembles

std::unique_ptr<BaseClassifier> classifier_from_snapshot(
    const nlohmann::json& doc) {
  const std::string type = doc.at("type").get<std::string>();
  if (type == "gaussian_naive_bayes") {
    return std::make_unique<GaussianNaiveBayes>(
        GaussianNaiveBayes::from_snapshot(doc));
  }
  if (type == "hoeffding_tree") {
    return std::make_unique<HoeffdingTree>(HoeffdingTree::from_snapshot(doc));
  }
  throw std::invalid_argument("snapshot: unknown classifier type " + type);
}

std::vector<double> average_ensemble_proba(
    const std::vector<const BaseClassifier*>& members,
    const Instance& instance) {
  if (members.empty()) {
    throw std::invalid_argument("average ensemble: no members");
  }
  std::vector<double> mean(members.front()->class_count(), 0.0);
  for (const BaseClassifier* member : members) {
    const std::vector<double> dist = member->predict_proba(instance);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += dist[c];
  }
  for (double& m : mean) m /= members.size();
  return mean;
}

int average_ensemble_predict(const std::vector<const BaseClassifier*>& members,
                             const Instance& instance) {
  return argmax_lowest(average_ensemble_proba(members, instance));
}

int argmax_lowest(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("argmax of an empty vector");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace obal
