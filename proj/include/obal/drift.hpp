#pragma once

#include <cstdint>
#include <deque>
#include <span>

#include <json.hpp>

namespace obal {

enum class DriftStatus { kStable, kWarning, kDrift };

/// Drift Detection Method over a stream of per-instance correctness flags.
/// Tracks the running error probability p_i and its deviation
/// s_i = sqrt(p_i (1 - p_i) / i) together with their recorded minima;
/// warning fires at p_i + s_i >= p_min + 2 s_min and drift at
/// p_i + s_i >= p_min + 3 s_min, but only once the error level actually
/// exceeds the recorded minimum (p_i + s_i > p_min + s_min) — otherwise an
/// all-correct stream, whose minima are all zero, would trip the >=
/// thresholds immediately. Thresholds stay inactive for the first
/// `warm_up` updates, and a reported drift resets the detector.
class DdmDetector {
 public:
  explicit DdmDetector(int warm_up = 30);

  DriftStatus update(bool correct);

  DriftStatus status() const { return status_; }
  std::int64_t count() const { return count_; }
  double error_rate() const { return count_ > 0 ? errors_ / count_ : 0.0; }
  double deviation() const;
  double p_min() const { return p_min_; }
  double s_min() const { return s_min_; }

  void reset();

  /// Checkpoint round-trip: the restored detector continues identically.
  nlohmann::json to_json() const;
  static DdmDetector from_json(const nlohmann::json& j);

 private:
  int warm_up_;
  std::int64_t count_ = 0;
  double errors_ = 0.0;
  double p_min_;
  double s_min_;
  DriftStatus status_ = DriftStatus::kStable;
};

struct TargetWindowConfig {
  int window_size = 200;  // n; one window's worth of likelihood values
  double z_alpha = 3.0;
  /// The printed form of the test fires only on a likelihood increase;
  /// drift under a stale density model usually lowers the likelihood, so
  /// the default tests both sides. Set true for the literal one-sided test.
  bool eq11_literal = false;
};

/// The windowed decision itself: drift iff
///   mu_det >= mu_ref + z_alpha * sigma / sqrt(n)   (literal), or
///   |mu_det - mu_ref| >= z_alpha * sigma / sqrt(n) (two-sided, default),
/// requiring |mu_det - mu_ref| > 0 so that identical windows never drift
/// even when sigma collapses to zero.
bool window_drift_decision(double mu_ref, double mu_det, double sigma, int n,
                           double z_alpha, bool literal);

/// Dual sliding windows over the target stream's max-component likelihood
/// values. The newest 2n values form reference window W_ref (older half)
/// and detection window W_det (newer half); each update slides both one
/// step. Decisions start once 2n values have arrived.
class TargetWindowDetector {
 public:
  explicit TargetWindowDetector(TargetWindowConfig config);

  /// Appends warm-up likelihoods without producing decisions.
  void warm_up(std::span<const double> likelihoods);

  /// Slides the windows by one likelihood; returns true when the windows
  /// are full and the configured test fires. Throws std::invalid_argument
  /// on a non-finite likelihood.
  bool update(double likelihood);

  bool warmed() const { return values_.size() == 2 * window_size(); }
  int window_size() const { return config_.window_size; }
  const TargetWindowConfig& config() const { return config_; }

  /// Statistics of the current windows (meaningful once warmed).
  double mu_ref() const;
  double mu_det() const;
  /// Sample standard deviation of W_ref.
  double sigma() const;

  void reset();

  /// Checkpoint round-trip: the restored detector continues identically.
  nlohmann::json to_json() const;
  static TargetWindowDetector from_json(const nlohmann::json& j);

 private:
  TargetWindowConfig config_;
  std::deque<double> values_;  // at most 2n, oldest first
};

}  // namespace obal
