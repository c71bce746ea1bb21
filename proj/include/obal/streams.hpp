#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obal/core.hpp"

namespace obal {

enum class GeneratorKind { kSea, kTree, kRbf, kHyperplane };

/// Parses "sea" / "tree" / "rbf" / "hyperplane" (case-insensitive).
/// Throws std::invalid_argument on anything else.
GeneratorKind parse_generator_kind(const std::string& name);
std::string generator_kind_name(GeneratorKind kind);

/// Describes one synthetic scenario: a single generated stream of
/// samples_per_stream * (n_sources + 1) instances that is afterwards split
/// into n_sources labeled source streams plus one unlabeled target stream.
struct ScenarioConfig {
  GeneratorKind kind = GeneratorKind::kSea;
  int n_sources = 3;
  std::int64_t samples_per_stream = 25000;
  /// Concept-change positions in the generated stream, strictly
  /// increasing. Abrupt for SEA (next theta) and Tree (fresh tree);
  /// for RBF/Hyperplane the parameters move continuously and a change
  /// point redraws the motion direction.
  std::vector<std::int64_t> change_points;
  std::uint64_t seed = 0;

  /// Feature count; 0 means the generator's default (SEA 3, Tree 20,
  /// RBF 10, Hyperplane 4). SEA ignores larger values beyond adding
  /// uninformative features.
  int dimension = 0;
  /// SEA threshold schedule: segment s uses sea_thetas[s % size()]. The
  /// default alternation revisits both concepts; a monotone list makes
  /// every change move the boundary to fresh territory.
  std::vector<double> sea_thetas = {4.0, 7.0};
  int tree_depth = 5;
  int rbf_centroids = 12;
  double rbf_velocity = 1e-3;         // fraction of the feature range per step
  double hyperplane_velocity = 1e-3;  // weight motion per step
  /// Probability of flipping any generated label (whole stream).
  double label_noise = 0.0;

  // --- multistream assembly ---
  /// Per-source block sizes for the probability-sorted split; empty means
  /// n_sources blocks of samples_per_stream each.
  std::vector<std::size_t> source_sizes;
  /// Standardize features (zero mean, unit variance, computed over the
  /// whole generated stream) before splitting. Keeps stream means near the
  /// origin so that covariance alignment does not displace them.
  bool standardize = true;
  /// Optional label corruption of one source stream after the split.
  int noisy_source = -1;
  double noisy_source_rate = 0.0;
  /// When set, the noisy source's labels are flipped deterministically to
  /// the complementary class instead of randomly perturbed.
  bool noisy_source_flip = false;
  /// Per-stream sensor calibration: when > 0, every stream k (sources
  /// first, target last) observes its features through fixed per-feature
  /// gains drawn uniformly from [1 - spread, 1 + spread]. Labels are
  /// assigned before the gains apply, so each stream sees the shared
  /// concept in its own coordinate frame.
  double stream_gain_spread = 0.0;
  /// Mid-stream recalibrations: each source redraws its gain vector this
  /// many times, at staggered local positions (source k's j-th shift sits
  /// at fraction (j - 1 + (k+1)/(n_sources+1)) / shifts of its stream), so
  /// the covariate shifts arrive asynchronously. The target never shifts.
  /// Requires stream_gain_spread > 0.
  int source_gain_shifts = 0;

  std::int64_t total_samples() const {
    return samples_per_stream * (n_sources + 1);
  }
};

/// Table-S1-style defaults per generator: SEA 25k/stream d=3 with the
/// 4->7->4->7 theta schedule, Tree 5k d=20 with three fresh trees,
/// RBF 5k d=10 and Hyperplane 30k d=4 with continuous motion.
ScenarioConfig default_scenario(GeneratorKind kind);

/// The SEA concept: class 1 iff f1 + f2 <= theta.
int sea_label(const std::vector<double>& features, double theta);

/// Generates `count` labeled instances (count < 0 means
/// config.total_samples()). Deterministic in config.seed; concept changes
/// happen exactly at config.change_points.
std::vector<Instance> generate_synthetic(GeneratorKind kind,
                                         const ScenarioConfig& config,
                                         std::int64_t count = -1);

struct CsvSchema {
  std::vector<int> feature_columns;  // 0-based indices into the row
  std::optional<int> label_column;
  /// Maps label tokens to class indices; when empty, tokens must already
  /// be nonnegative integers.
  std::map<std::string, int> class_map;
  bool has_header = false;
};

/// Loads a comma-separated stream; row order becomes the timestamps.
/// Parse problems name the 1-based data row and column.
std::vector<Instance> load_csv_stream(const std::string& path,
                                      const CsvSchema& schema);

/// One assembled scenario: N labeled sources, an unlabeled target, and the
/// target's held-out labels, which exist purely for scoring predictions.
struct Multistream {
  std::vector<std::vector<Instance>> sources;
  std::vector<Instance> target;  // labels stripped
  std::vector<int> held_out_target_labels;
  int dimension = 0;
  int class_count = 0;
};

/// Splits a labeled dataset into sources and target by the
/// covariate-shift-inducing procedure: score every instance by its Gaussian
/// probability under the pooled per-feature moments, sort descending,
/// hand source i the i-th contiguous block of `sizes`, leave the remainder
/// to the target, and restore chronological order inside every stream.
/// Target labels are stripped and held out.
Multistream build_multistream_scenario(const std::vector<Instance>& dataset,
                                       int n_sources,
                                       const std::vector<std::size_t>& sizes);

/// Z-scores every feature using the dataset's pooled moments.
std::vector<Instance> standardize_dataset(const std::vector<Instance>& data);

/// Flips each label with probability `rate` to a uniformly drawn different
/// class (binary: the complement).
void apply_label_noise(std::vector<Instance>& stream, int class_count,
                       double rate, std::uint64_t seed);

/// Deterministically replaces every label y with (y + 1) mod C.
void flip_labels(std::vector<Instance>& stream, int class_count);

/// Generates, optionally standardizes, splits, and applies the configured
/// source-label corruption: the one-call scenario builder.
Multistream build_scenario(const ScenarioConfig& config);

}  // namespace obal
