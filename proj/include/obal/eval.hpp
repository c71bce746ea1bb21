#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "obal/engine.hpp"
#include "obal/streams.hpp"

namespace obal {

/// Ablation variants: which of the three adaptation mechanisms run.
///   v1   - none: one incrementally updated classifier per stream,
///          uniformly averaged.
///   v2   - drift handling only.
///   v3   - drift handling + covariance alignment, uniform weights.
///   full - everything, including correlation re-weighting.
enum class Variant { kV1, kV2, kV3, kFull };

/// Parses "v1" / "v2" / "v3" / "full" (case-insensitive).
Variant parse_variant(const std::string& name);
std::string variant_name(Variant variant);

/// Sets the engine's three ablation switches for the variant; the other
/// fields are left untouched.
void apply_variant(ObalConfig& config, Variant variant);

/// One complete experiment: a scenario recipe, engine parameters, a
/// variant, and the seeds to aggregate over. Each seed rebuilds the
/// scenario and the engine with that seed.
struct ExperimentConfig {
  ScenarioConfig scenario;
  ObalConfig engine;
  Variant variant = Variant::kFull;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Applies only the keys present in `doc` onto `config` (deep merge for
/// the scenario/engine sections). Unknown keys are rejected so config
/// file typos fail loudly instead of silently keeping a default.
void merge_experiment_json(ExperimentConfig& config,
                           const nlohmann::json& doc);

/// Outcome of a single seeded run. Predictions are scored prequentially
/// against the held-out target labels from the first initialized answer
/// onward; the instances consumed by initialization are not scored.
/// `accuracy` counts every scored prediction, including the stale answers
/// emitted during a re-initialization gap; `accuracy_live` excludes the
/// stale ones.
struct SeedResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double accuracy_live = 0.0;
  /// Accuracy per window of 1000 scored predictions (last window may be
  /// shorter); length = ceil(scored / 1000).
  std::vector<double> trajectory;
  /// Scored predictions in stream order (useful for isolation checks).
  std::vector<int> predictions;
  std::int64_t scored = 0;
  std::int64_t stale_scored = 0;
  int source_drifts = 0;
  int target_drifts = 0;
  int initializations = 0;
  double wall_seconds = 0.0;
};

/// Per-experiment aggregate: one SeedResult per seed plus the over-seeds
/// mean and sample standard deviation of both accuracy metrics.
struct Report {
  Variant variant = Variant::kFull;
  std::vector<SeedResult> seeds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_accuracy_live = 0.0;
  double std_accuracy_live = 0.0;
};

/// 100 * matches / total. Throws std::invalid_argument when the lengths
/// differ or both are empty.
double prequential_accuracy(const std::vector<int>& predictions,
                            const std::vector<int>& labels);

/// Accuracy over consecutive windows of `window` predictions; the last
/// window keeps whatever remains. Empty input gives an empty trajectory.
std::vector<double> accuracy_trajectory(const std::vector<int>& predictions,
                                        const std::vector<int>& labels,
                                        std::size_t window = 1000);

/// Replays an assembled multistream through one engine in global
/// timestamp order and scores the target predictions. The engine config
/// is used as given (variant already applied, seed already set). When
/// `event_sink` is non-null the engine's full event log is moved into it.
SeedResult evaluate_stream(const Multistream& stream,
                           const ObalConfig& engine_config,
                           std::vector<EngineEvent>* event_sink = nullptr);

/// Runs one seed of the experiment: builds the scenario with the seed,
/// applies the variant, runs evaluate_stream.
SeedResult run_single(const ExperimentConfig& config, std::uint64_t seed,
                      std::vector<EngineEvent>* event_sink = nullptr);

/// Runs every seed and aggregates. Throws std::invalid_argument when the
/// seed list is empty. When `event_sink` is non-null the per-seed event
/// logs are appended to it in seed order (timestamps restart per seed).
Report run_experiment(const ExperimentConfig& config,
                      std::vector<EngineEvent>* event_sink = nullptr);

/// Parameters the sweep can vary while everything else stays fixed.
enum class SweepParameter { kWindowLength, kIMax, kPoolCapacity };

/// Parses "window_length" / "i_max" / "pool_capacity" (case-insensitive).
SweepParameter parse_sweep_parameter(const std::string& name);
std::string sweep_parameter_name(SweepParameter parameter);

/// One full experiment per value, base config otherwise untouched.
/// Throws std::invalid_argument when `values` is empty.
std::vector<Report> parameter_sweep(const ExperimentConfig& base,
                                    SweepParameter parameter,
                                    const std::vector<int>& values);

/// Report CSV: a header row, one row per seed, then a `mean` and a `std`
/// summary row. Accuracies carry four decimals; no timing columns, so
/// fixed seeds reproduce the bytes exactly.
std::string report_csv(const Report& report);

/// Sweep CSV: a header row plus one aggregate row per swept value.
std::string sweep_csv(SweepParameter parameter, const std::vector<int>& values,
                      const std::vector<Report>& reports);

/// Trajectory CSV: one row per (seed, window) pair.
std::string trajectory_csv(const Report& report);

/// Event log as NDJSON: one JSON object per line.
void write_event_log(std::span<const EngineEvent> events, std::ostream& out);

}  // namespace obal
