#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "obal/adacosa.hpp"
#include "obal/core.hpp"
#include "obal/drift.hpp"
#include "obal/gmm.hpp"
#include "obal/learners.hpp"
#include "obal/linalg.hpp"

namespace obal {

/// One frozen entry of the classifier pool. Entries are never retrained;
/// `stamp` preserves insertion order for the eviction tie rule.
struct PoolEntry {
  std::unique_ptr<BaseClassifier> classifier;
  double weight = 0.0;
  std::int64_t stamp = 0;
};

/// Bounded pool of retired target classifiers. Inserting past capacity
/// evicts the lowest-weight entry (ties: oldest), which may be the
/// newcomer itself.
class ClassifierPool {
 public:
  explicit ClassifierPool(int capacity);

  /// Returns the weight of the evicted entry, if the insert displaced one.
  std::optional<double> insert(std::unique_ptr<BaseClassifier> classifier,
                               double weight);

  std::size_t size() const { return entries_.size(); }
  int capacity() const { return capacity_; }
  const PoolEntry& entry(std::size_t i) const { return entries_.at(i); }
  void clear() { entries_.clear(); }

  /// Moves every entry out, leaving the pool empty.
  std::vector<PoolEntry> drain() {
    return std::exchange(entries_, {});
  }

  nlohmann::json to_json() const;
  static ClassifierPool from_json(const nlohmann::json& j);

 private:
  int capacity_;
  std::int64_t next_stamp_ = 0;
  std::vector<PoolEntry> entries_;
};

/// Weight of the archived instance nearest to `instance` in Euclidean
/// distance; equidistant candidates resolve to the earliest archive index.
double retrieve_correlation_weight(const DataBatch& archive,
                                   const std::vector<double>& cw,
                                   const Instance& instance);

struct ObalConfig {
  int window_length = 200;  // L_n: per-stream initialization batch size
  int i_max = 3;
  int pool_capacity = 5;  // |P|
  int k_max = 5;          // BIC bound for every GMM fit
  /// Ablation switches: the full method keeps all three on. v1 = all off,
  /// v2 = drift handling only, v3 = drift handling + alignment.
  bool drift_handling = true;
  bool align = true;
  bool reweight = true;
  double z_alpha = 3.0;
  bool eq11_literal = false;
  LearnerKind learner = LearnerKind::kHoeffdingTree;
  HoeffdingTreeParams tree_params;
  EmConfig em;  // seed field is ignored; the engine derives GMM seeds
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ObalConfig from_json(const nlohmann::json& j);
};

/// Per-target-instance outcome. `prediction` is -1 only before the first
/// initialization completes; during a re-initialization gap the engine
/// keeps answering from the pre-drift ensemble and flags the output stale.
struct TargetOutput {
  std::vector<double> distribution;
  int prediction = -1;
  bool stale = false;
  bool drift = false;
};

/// Structured log record; the evaluator serializes these as NDJSON.
struct EngineEvent {
  std::int64_t t = 0;   // engine-wide step counter
  std::string stream;   // "S<i>" or "T"
  std::string event;    // prediction|source_drift|target_drift|reinit|pool_evict
  nlohmann::json payload;
};

/// The online orchestrator: buffers the first L_n instances of every
/// stream, initializes, then routes per-instance work — DDM plus
/// weighted alignment on the source side, likelihood-window monitoring
/// and the Eq. 9 ensemble on the target side. A detected target drift
/// clears every classifier and repeats initialization on fresh batches.
class ObalEngine {
 public:
  ObalEngine(int n_sources, int dimension, int class_count,
             const ObalConfig& config);

  /// Feeds one labeled source instance. Throws std::invalid_argument on a
  /// bad index, a missing label, or a dimension mismatch.
  void process_source_instance(int source_index, const Instance& instance);

  /// Feeds one unlabeled target instance and returns the prediction
  /// record. Throws std::invalid_argument if the instance carries a label
  /// (held-out labels must never reach the engine) or on a dimension
  /// mismatch.
  TargetOutput process_target_instance(const Instance& instance);

  /// Eq. 9 over the live target classifiers and the pool. Throws
  /// std::logic_error when no classifier exists yet.
  std::vector<double> ensemble_predict(const Instance& instance) const;

  bool initialized() const { return initialized_; }
  bool buffering() const { return buffering_; }
  int initializations() const { return init_count_; }
  int n_sources() const { return n_sources_; }
  int dimension() const { return dimension_; }
  int class_count() const { return class_count_; }
  const ObalConfig& config() const { return config_; }
  const ClassifierPool& pool() const { return pool_; }

  /// Live Eq. 9 weight of source i's current classifier: the running
  /// mean (1/n) sum aw*cw, or the AdaCOSA scalar before any online
  /// instance arrived.
  double source_weight(int source_index) const;
  /// Correlation weight vector captured at the latest initialization.
  const std::vector<double>& correlation_weights(int source_index) const;

  const std::vector<EngineEvent>& events() const { return events_; }
  void clear_events() { events_.clear(); }

  /// Versioned full-state document; restore continues bit-identically.
  nlohmann::json checkpoint() const;
  static ObalEngine restore(const nlohmann::json& j);

 private:
  struct SourceState {
    std::unique_ptr<BaseClassifier> f_source;  // f_Si
    std::unique_ptr<BaseClassifier> f_target;  // f_Ti
    DdmDetector ddm;
    GmmModel gmm;
    AlignmentTransform transform;
    std::optional<DataBatch> archive;
    std::vector<double> cw;
    double cw_scalar = 1.0;
    double weight_sum = 0.0;       // sum of aw*cw since classifier creation
    std::int64_t weight_count = 0;  // n
    std::deque<Instance> recent;   // last L_n raw instances

    double live_weight() const {
      return weight_count == 0 ? cw_scalar
                               : weight_sum / static_cast<double>(weight_count);
    }
  };

  /// Weighted frozen ensemble snapshot used for stale predictions during a
  /// re-initialization gap.
  struct StaleMember {
    std::unique_ptr<BaseClassifier> classifier;
    double weight = 0.0;
  };

  void log(const std::string& stream, const std::string& event,
           nlohmann::json payload);
  void try_initialize();
  std::vector<double> predict_from(
      const std::vector<const BaseClassifier*>& members,
      const std::vector<double>& weights, const Instance& instance) const;

  ObalConfig config_;
  int n_sources_ = 0;
  int dimension_ = 0;
  int class_count_ = 0;

  bool buffering_ = true;
  bool initialized_ = false;
  int init_count_ = 0;
  std::int64_t step_ = 0;

  std::vector<std::vector<Instance>> source_buffers_;
  std::vector<Instance> target_buffer_;

  std::vector<SourceState> sources_;
  GmmModel gmm_target_;
  TargetWindowDetector target_detector_;
  Eigen::MatrixXd target_covariance_;  // archived C_T for drift-time refits
  ClassifierPool pool_;
  std::vector<StaleMember> stale_ensemble_;

  std::vector<EngineEvent> events_;
};

}  // namespace obal
