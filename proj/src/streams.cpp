#include "obal/streams.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace obal {
namespace {

void validate_config(const ScenarioConfig& config, std::int64_t count) {
  if (config.samples_per_stream < 1) {
    throw std::invalid_argument("scenario: samples_per_stream must be >= 1");
  }
  if (config.sea_thetas.empty()) {
    throw std::invalid_argument("scenario: sea_thetas must not be empty");
  }
  std::int64_t previous = 0;
  for (std::size_t i = 0; i < config.change_points.size(); ++i) {
    const std::int64_t cp = config.change_points[i];
    if (cp <= (i == 0 ? 0 : previous)) {
      throw std::invalid_argument(
          "scenario: change points must be strictly increasing");
    }
    if (cp >= count) {
      throw std::invalid_argument(
          "scenario: change point beyond the stream length");
    }
    previous = cp;
  }
}

int resolved_dimension(GeneratorKind kind, int requested) {
  if (requested > 0) {
    if (kind == GeneratorKind::kSea && requested < 3) {
      throw std::invalid_argument("sea: needs at least 3 features");
    }
    return requested;
  }
  switch (kind) {
    case GeneratorKind::kSea:
      return 3;
    case GeneratorKind::kTree:
      return 20;
    case GeneratorKind::kRbf:
      return 10;
    case GeneratorKind::kHyperplane:
      return 4;
  }
  throw std::invalid_argument("unknown generator kind");
}

/// Shared shape of the four concept generators: emit the next instance,
/// or switch to the next concept at a change point.
class ConceptGenerator {
 public:
  virtual ~ConceptGenerator() = default;
  virtual void next_concept() = 0;
  virtual Instance next(std::int64_t t) = 0;
};

// --- SEA ---------------------------------------------------------------

class SeaGenerator : public ConceptGenerator {
 public:
  SeaGenerator(const ScenarioConfig& config, int dimension)
      : dimension_(dimension),
        thetas_(config.sea_thetas),
        features_(mix_seed(config.seed, 0)) {}

  void next_concept() override { ++segment_; }

  Instance next(std::int64_t t) override {
    std::uniform_real_distribution<double> value(0.0, 10.0);
    std::vector<double> x(dimension_);
    for (double& v : x) v = value(features_);
    const double theta = thetas_[static_cast<std::size_t>(segment_) %
                                 thetas_.size()];
    const int y = sea_label(x, theta);
    return Instance(std::move(x), y, t);
  }

 private:
  int dimension_;
  std::vector<double> thetas_;
  int segment_ = 0;
  std::mt19937_64 features_;
};

// --- Tree --------------------------------------------------------------

struct RandomTreeNode {
  int feature = -1;  // < 0: leaf
  double threshold = 0.0;
  int label = 0;
  std::unique_ptr<RandomTreeNode> below, above;
};

std::unique_ptr<RandomTreeNode> build_random_tree(
    int depth, std::vector<double>& lo, std::vector<double>& hi,
    std::mt19937_64& rng) {
  auto node = std::make_unique<RandomTreeNode>();
  if (depth == 0) {
    std::uniform_int_distribution<int> coin(0, 1);
    node->label = coin(rng);
    return node;
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(lo.size()) - 1);
  node->feature = pick(rng);
  std::uniform_real_distribution<double> split(lo[node->feature],
                                               hi[node->feature]);
  node->threshold = split(rng);
  const double saved_hi = hi[node->feature];
  hi[node->feature] = node->threshold;
  node->below = build_random_tree(depth - 1, lo, hi, rng);
  hi[node->feature] = saved_hi;
  const double saved_lo = lo[node->feature];
  lo[node->feature] = node->threshold;
  node->above = build_random_tree(depth - 1, lo, hi, rng);
  lo[node->feature] = saved_lo;
  return node;
}

int classify_by_tree(const RandomTreeNode& node,
                     const std::vector<double>& x) {
  if (node.feature < 0) return node.label;
  return x[node.feature] <= node.threshold ? classify_by_tree(*node.below, x)
                                           : classify_by_tree(*node.above, x);
}

class TreeGenerator : public ConceptGenerator {
 public:
  TreeGenerator(const ScenarioConfig& config, int dimension)
      : dimension_(dimension),
        depth_(config.tree_depth),
        seed_(config.seed),
        features_(mix_seed(config.seed, 0)) {
    if (depth_ < 1 || depth_ > 20) {
      throw std::invalid_argument("tree: depth must be in [1, 20]");
    }
    next_concept();
  }

  void next_concept() override {
    std::mt19937_64 concept_rng(mix_seed(seed_, 1000 + concept_index_));
    ++concept_index_;
    std::vector<double> lo(dimension_, 0.0), hi(dimension_, 1.0);
    tree_ = build_random_tree(depth_, lo, hi, concept_rng);
  }

  Instance next(std::int64_t t) override {
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::vector<double> x(dimension_);
    for (double& v : x) v = value(features_);
    const int y = classify_by_tree(*tree_, x);
    return Instance(std::move(x), y, t);
  }

 private:
  int dimension_;
  int depth_;
  std::uint64_t seed_;
  int concept_index_ = 0;
  std::mt19937_64 features_;
  std::unique_ptr<RandomTreeNode> tree_;
};

// --- RBF ---------------------------------------------------------------

class RbfGenerator : public ConceptGenerator {
 public:
  RbfGenerator(const ScenarioConfig& config, int dimension)
      : dimension_(dimension),
        velocity_(config.rbf_velocity),
        features_(mix_seed(config.seed, 0)) {
    if (config.rbf_centroids < 1) {
      throw std::invalid_argument("rbf: needs at least one centroid");
    }
    std::mt19937_64 setup(mix_seed(config.seed, 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sigma(0.05, 0.15);
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    centroids_.resize(config.rbf_centroids);
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
      Centroid& c = centroids_[k];
      c.center.resize(dimension_);
      for (double& v : c.center) v = unit(setup);
      c.sigma = sigma(setup);
      c.weight = weight(setup);
      c.label = static_cast<int>(k) % 2;
      c.velocity.resize(dimension_);
    }
    direction_rng_.seed(mix_seed(config.seed, 2));
    next_concept();  // draw the initial motion directions
  }

  void next_concept() override {
    std::normal_distribution<double> gauss;
    for (Centroid& c : centroids_) {
      double norm = 0.0;
      for (double& v : c.velocity) {
        v = gauss(direction_rng_);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : c.velocity) v = v / norm * velocity_;
    }
  }

  Instance next(std::int64_t t) override {
    // Continuous incremental drift: every step moves every centroid.
    for (Centroid& c : centroids_) {
      for (int f = 0; f < dimension_; ++f) {
        c.center[f] += c.velocity[f];
        if (c.center[f] < 0.0) {
          c.center[f] = -c.center[f];
          c.velocity[f] = -c.velocity[f];
        } else if (c.center[f] > 1.0) {
          c.center[f] = 2.0 - c.center[f];
          c.velocity[f] = -c.velocity[f];
        }
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double total = 0.0;
    for (const Centroid& c : centroids_) total += c.weight;
    double ticket = unit(features_) * total;
    const Centroid* chosen = &centroids_.back();
    for (const Centroid& c : centroids_) {
      ticket -= c.weight;
      if (ticket <= 0.0) {
        chosen = &c;
        break;
      }
    }
    std::normal_distribution<double> gauss;
    std::vector<double> x(dimension_);
    for (int f = 0; f < dimension_; ++f) {
      x[f] = chosen->center[f] + chosen->sigma * gauss(features_);
    }
    return Instance(std::move(x), chosen->label, t);
  }

 private:
  struct Centroid {
    std::vector<double> center;
    std::vector<double> velocity;
    double sigma = 0.1;
    double weight = 1.0;
    int label = 0;
  };

  int dimension_;
  double velocity_;
  std::vector<Centroid> centroids_;
  std::mt19937_64 features_;
  std::mt19937_64 direction_rng_;
};

// --- Hyperplane --------------------------------------------------------

class HyperplaneGenerator : public ConceptGenerator {
 public:
  HyperplaneGenerator(const ScenarioConfig& config, int dimension)
      : dimension_(dimension),
        velocity_(config.hyperplane_velocity),
        features_(mix_seed(config.seed, 0)),
        direction_rng_(mix_seed(config.seed, 2)) {
    std::mt19937_64 setup(mix_seed(config.seed, 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    weights_.resize(dimension_);
    directions_.assign(dimension_, 1.0);
    for (double& w : weights_) w = unit(setup);
    next_concept();
  }

  void next_concept() override {
    std::uniform_int_distribution<int> coin(0, 1);
    for (double& s : directions_) s = coin(direction_rng_) == 0 ? -1.0 : 1.0;
  }

  Instance next(std::int64_t t) override {
    // Continuous rotation: weights creep every step, bouncing off [0, 1].
    for (int j = 0; j < dimension_; ++j) {
      weights_[j] += directions_[j] * velocity_;
      if (weights_[j] < 0.0) {
        weights_[j] = -weights_[j];
        directions_[j] = -directions_[j];
      } else if (weights_[j] > 1.0) {
        weights_[j] = 2.0 - weights_[j];
        directions_[j] = -directions_[j];
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(dimension_);
    for (double& v : x) v = unit(features_);
    const double activation =
        std::inner_product(weights_.begin(), weights_.end(), x.begin(), 0.0);
    const double bias =
        std::accumulate(weights_.begin(), weights_.end(), 0.0) / 2.0;
    return Instance(std::move(x), activation > bias ? 1 : 0, t);
  }

 private:
  int dimension_;
  double velocity_;
  std::vector<double> weights_;
  std::vector<double> directions_;
  std::mt19937_64 features_;
  std::mt19937_64 direction_rng_;
};

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_feature_cell(const std::string& cell, int row, int column) {
  std::size_t consumed = 0;
  double value = 0.0;
  bool ok = !cell.empty();
  if (ok) {
    try {
      value = std::stod(cell, &consumed);
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok || consumed != cell.size() || !std::isfinite(value)) {
    throw std::runtime_error("csv row " + std::to_string(row) + ", column " +
                             std::to_string(column) +
                             ": not a numeric feature: '" + cell + "'");
  }
  return value;
}

}  // namespace

GeneratorKind parse_generator_kind(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "sea") return GeneratorKind::kSea;
  if (lower == "tree") return GeneratorKind::kTree;
  if (lower == "rbf") return GeneratorKind::kRbf;
  if (lower == "hyperplane") return GeneratorKind::kHyperplane;
  throw std::invalid_argument("unknown generator kind: " + name);
}

std::string generator_kind_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kSea:
      return "sea";
    case GeneratorKind::kTree:
      return "tree";
    case GeneratorKind::kRbf:
      return "rbf";
    case GeneratorKind::kHyperplane:
      return "hyperplane";
  }
  throw std::invalid_argument("unknown generator kind");
}

ScenarioConfig default_scenario(GeneratorKind kind) {
  ScenarioConfig config;
  config.kind = kind;
  switch (kind) {
    case GeneratorKind::kSea:
      config.samples_per_stream = 25000;
      config.change_points = {25000, 50000, 75000};
      break;
    case GeneratorKind::kTree:
      config.samples_per_stream = 5000;
      config.change_points = {5000, 10000, 15000};
      break;
    case GeneratorKind::kRbf:
      config.samples_per_stream = 5000;
      break;
    case GeneratorKind::kHyperplane:
      config.samples_per_stream = 30000;
      break;
  }
  return config;
}

int sea_label(const std::vector<double>& features, double theta) {
  if (features.size() < 2) {
    throw std::invalid_argument("sea_label: needs at least 2 features");
  }
  return features[0] + features[1] <= theta ? 1 : 0;
}

std::vector<Instance> generate_synthetic(GeneratorKind kind,
                                         const ScenarioConfig& config,
                                         std::int64_t count) {
  if (count < 0) count = config.total_samples();
  validate_config(config, count);
  const int dimension = resolved_dimension(kind, config.dimension);

  std::unique_ptr<ConceptGenerator> generator;
  switch (kind) {
    case GeneratorKind::kSea:
      generator = std::make_unique<SeaGenerator>(config, dimension);
      break;
    case GeneratorKind::kTree:
      generator = std::make_unique<TreeGenerator>(config, dimension);
      break;
    case GeneratorKind::kRbf:
      generator = std::make_unique<RbfGenerator>(config, dimension);
      break;
    case GeneratorKind::kHyperplane:
      generator = std::make_unique<HyperplaneGenerator>(config, dimension);
      break;
  }
  if (!generator) throw std::invalid_argument("unknown generator kind");

  std::mt19937_64 noise_rng(mix_seed(config.seed, 3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Instance> out;
  out.reserve(count);
  std::size_t next_change = 0;
  for (std::int64_t t = 0; t < count; ++t) {
    if (next_change < config.change_points.size() &&
        t == config.change_points[next_change]) {
      generator->next_concept();
      ++next_change;
    }
    Instance instance = generator->next(t);
    if (config.label_noise > 0.0 && unit(noise_rng) < config.label_noise) {
      instance.label = 1 - *instance.label;
    }
    out.push_back(std::move(instance));
  }
  return out;
}

std::vector<Instance> load_csv_stream(const std::string& path,
                                      const CsvSchema& schema) {
  std::ifstream file(path);
  if (!file) {
    throw std::runtime_error("csv: cannot open file: " + path);
  }
  std::vector<Instance> out;
  std::string line;
  int data_row = 0;
  bool header_pending = schema.has_header;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    ++data_row;
    const std::vector<std::string> cells = split_csv_row(line);
    const auto cell_at = [&](int column) -> const std::string& {
      if (column < 0 || column >= static_cast<int>(cells.size())) {
        throw std::runtime_error("csv row " + std::to_string(data_row) +
                                 ": missing column " +
                                 std::to_string(column + 1));
      }
      return cells[column];
    };
    std::vector<double> features;
    features.reserve(schema.feature_columns.size());
    for (int column : schema.feature_columns) {
      features.push_back(
          parse_feature_cell(cell_at(column), data_row, column + 1));
    }
    std::optional<int> label;
    if (schema.label_column.has_value()) {
      const std::string& token = cell_at(*schema.label_column);
      if (!schema.class_map.empty()) {
        const auto it = schema.class_map.find(token);
        if (it == schema.class_map.end()) {
          throw std::runtime_error("csv row " + std::to_string(data_row) +
                                   ": unknown class token: '" + token + "'");
        }
        label = it->second;
      } else {
        try {
          const int value = std::stoi(token);
          if (value < 0) throw std::invalid_argument("negative");
          label = value;
        } catch (const std::exception&) {
          throw std::runtime_error("csv row " + std::to_string(data_row) +
                                   ": unknown class token: '" + token + "'");
        }
      }
    }
    out.emplace_back(std::move(features), label,
                     static_cast<std::int64_t>(data_row - 1));
  }
  return out;
}

Multistream build_multistream_scenario(const std::vector<Instance>& dataset,
                                       int n_sources,
                                       const std::vector<std::size_t>& sizes) {
  if (dataset.empty()) {
    throw std::invalid_argument("scenario: empty dataset");
  }
  if (n_sources < 1) {
    throw std::invalid_argument("scenario: need at least one source");
  }
  if (static_cast<int>(sizes.size()) != n_sources) {
    throw std::invalid_argument(
        "scenario: one block size required per source");
  }
  std::size_t claimed = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("scenario: empty source block");
    claimed += s;
  }
  if (claimed > dataset.size()) {
    throw std::invalid_argument("scenario: block sizes exceed the dataset");
  }
  if (claimed == dataset.size()) {
    throw std::invalid_argument("scenario: no samples left for the target");
  }
  const std::size_t d = dataset.front().features.size();
  int class_count = 0;
  for (const Instance& instance : dataset) {
    if (!instance.label.has_value()) {
      throw std::invalid_argument("scenario: dataset must be fully labeled");
    }
    class_count = std::max(class_count, *instance.label + 1);
    if (instance.features.size() != d) {
      throw std::invalid_argument("scenario: inconsistent dimensions");
    }
  }

  // Pooled per-feature Gaussian score; the product of densities is taken in
  // log space, and constants drop out of the ordering.
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const Instance& instance : dataset) {
    for (std::size_t f = 0; f < d; ++f) mean[f] += instance.features[f];
  }
  for (double& m : mean) m /= dataset.size();
  for (const Instance& instance : dataset) {
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = instance.features[f] - mean[f];
      var[f] += diff * diff;
    }
  }
  for (double& v : var) v = std::max(v / dataset.size(), 1e-12);

  std::vector<double> score(dataset.size(), 0.0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = dataset[i].features[f] - mean[f];
      score[i] -= diff * diff / (2.0 * var[f]) + 0.5 * std::log(var[f]);
    }
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;  // deterministic tie-break by arrival
  });

  Multistream out;
  out.dimension = static_cast<int>(d);
  out.class_count = class_count;
  std::size_t offset = 0;
  for (int s = 0; s < n_sources; ++s) {
    std::vector<std::size_t> block(order.begin() + offset,
                                   order.begin() + offset + sizes[s]);
    offset += sizes[s];
    std::sort(block.begin(), block.end());  // back to chronological order
    std::vector<Instance> stream;
    stream.reserve(block.size());
    for (std::size_t i : block) stream.push_back(dataset[i]);
    out.sources.push_back(std::move(stream));
  }
  std::vector<std::size_t> block(order.begin() + offset, order.end());
  std::sort(block.begin(), block.end());
  out.target.reserve(block.size());
  out.held_out_target_labels.reserve(block.size());
  for (std::size_t i : block) {
    Instance stripped = dataset[i];
    out.held_out_target_labels.push_back(*stripped.label);
    stripped.label.reset();
    out.target.push_back(std::move(stripped));
  }
  return out;
}

std::vector<Instance> standardize_dataset(const std::vector<Instance>& data) {
  if (data.empty()) return {};
  const std::size_t d = data.front().features.size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const Instance& instance : data) {
    for (std::size_t f = 0; f < d; ++f) mean[f] += instance.features[f];
  }
  for (double& m : mean) m /= data.size();
  for (const Instance& instance : data) {
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = instance.features[f] - mean[f];
      var[f] += diff * diff;
    }
  }
  for (double& v : var) v /= data.size();
  std::vector<Instance> out = data;
  for (Instance& instance : out) {
    for (std::size_t f = 0; f < d; ++f) {
      const double scale = var[f] > 1e-24 ? std::sqrt(var[f]) : 1.0;
      instance.features[f] = (instance.features[f] - mean[f]) / scale;
    }
  }
  return out;
}

void apply_label_noise(std::vector<Instance>& stream, int class_count,
                       double rate, std::uint64_t seed) {
  if (rate <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> shift(1, class_count - 1);
  for (Instance& instance : stream) {
    if (instance.label.has_value() && unit(rng) < rate) {
      instance.label = (*instance.label + shift(rng)) % class_count;
    }
  }
}

void flip_labels(std::vector<Instance>& stream, int class_count) {
  for (Instance& instance : stream) {
    if (instance.label.has_value()) {
      instance.label = (*instance.label + 1) % class_count;
    }
  }
}

Multistream build_scenario(const ScenarioConfig& config) {
  if (config.n_sources < 1) {
    throw std::invalid_argument("scenario: need at least one source");
  }
  std::vector<Instance> data = generate_synthetic(config.kind, config);
  if (config.standardize) data = standardize_dataset(data);
  std::vector<std::size_t> sizes = config.source_sizes;
  if (sizes.empty()) {
    sizes.assign(config.n_sources,
                 static_cast<std::size_t>(config.samples_per_stream));
  }
  Multistream out = build_multistream_scenario(data, config.n_sources, sizes);
  if (config.source_gain_shifts < 0) {
    throw std::invalid_argument("scenario: source_gain_shifts must be >= 0");
  }
  if (config.stream_gain_spread > 0.0) {
    if (config.stream_gain_spread >= 1.0) {
      throw std::invalid_argument("scenario: stream_gain_spread must be < 1");
    }
    auto apply_gains = [&](std::vector<Instance>& stream, int index,
                           int shifts, double phase) {
      std::mt19937_64 rng(mix_seed(config.seed, 300 + index));
      std::uniform_real_distribution<double> unif(
          1.0 - config.stream_gain_spread, 1.0 + config.stream_gain_spread);
      auto redraw = [&] {
        std::vector<double> gains(static_cast<std::size_t>(out.dimension));
        for (double& gain : gains) gain = unif(rng);
        return gains;
      };
      std::vector<double> gains = redraw();
      std::size_t next_shift = 0;
      const double n = static_cast<double>(stream.size());
      auto shift_position = [&](int j) {  // j = 1..shifts
        return static_cast<std::size_t>(n * (j - 1 + phase) / shifts);
      };
      for (std::size_t i = 0; i < stream.size(); ++i) {
        while (next_shift < static_cast<std::size_t>(shifts) &&
               i >= shift_position(static_cast<int>(next_shift) + 1)) {
          gains = redraw();
          ++next_shift;
        }
        for (std::size_t j = 0; j < stream[i].features.size(); ++j) {
          stream[i].features[j] *= gains[j];
        }
      }
    };
    for (int i = 0; i < config.n_sources; ++i) {
      const double phase =
          static_cast<double>(i + 1) / static_cast<double>(config.n_sources + 1);
      apply_gains(out.sources[i], i, config.source_gain_shifts, phase);
    }
    apply_gains(out.target, config.n_sources, 0, 0.0);
  }
  if (config.noisy_source >= 0) {
    if (config.noisy_source >= config.n_sources) {
      throw std::invalid_argument("scenario: noisy_source out of range");
    }
    auto& stream = out.sources[config.noisy_source];
    if (config.noisy_source_flip) {
      flip_labels(stream, out.class_count);
    } else {
      apply_label_noise(stream, out.class_count, config.noisy_source_rate,
                        mix_seed(config.seed, 77));
    }
  }
  return out;
}

}  // namespace obal
