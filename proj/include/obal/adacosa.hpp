#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "obal/core.hpp"
#include "obal/learners.hpp"
#include "obal/linalg.hpp"

namespace obal {

/// Base-learner choice for every classifier the method trains.
enum class LearnerKind { kHoeffdingTree, kNaiveBayes };

LearnerKind parse_learner_kind(const std::string& name);
std::string learner_kind_name(LearnerKind kind);

/// Fresh untrained classifier of the requested kind.
std::unique_ptr<BaseClassifier> make_classifier(
    LearnerKind kind, int dimension, int class_count,
    const HoeffdingTreeParams& tree_params = {});

/// The re-weighting learning rate beta_n = 0.5 * ln(1 + sqrt(2 * ln(L_n /
/// I_max))). Throws std::invalid_argument unless L_n / I_max > 1.
double compute_beta(double window_length, double i_max);

/// One multiplicative weight update: cw * exp(-beta * loss) with the 0/1
/// mismatch loss. A correct prediction returns cw unchanged.
double update_correlation_weight(double cw, int predicted_label,
                                 int true_label, double beta);

struct AdaCosaConfig {
  /// Re-weighting iterations I_max.
  int i_max = 3;
  /// Covariance alignment on (off: identity transforms).
  bool align = true;
  /// Iterative correlation re-weighting on (off: one pass, uniform weights).
  bool reweight = true;
  LearnerKind learner = LearnerKind::kHoeffdingTree;
  HoeffdingTreeParams tree_params;
};

/// Initialization output for one source stream: both classifiers, the
/// fitted transform, the correlation weight vector with its scalar mean,
/// and the archived raw batch used later for weight retrieval.
struct SourceInit {
  std::unique_ptr<BaseClassifier> source_classifier;  // f_Si, raw space
  std::unique_ptr<BaseClassifier> target_classifier;  // f_Ti, target space
  AlignmentTransform transform;                       // A_Si
  std::vector<double> cw;
  double cw_scalar = 1.0;
  DataBatch archive;
};

struct InitResult {
  std::vector<SourceInit> sources;
  DataBatch target_archive;
  double beta = 0.0;
  int dimension = 0;
  int class_count = 0;
};

/// Runs the initialization: per iteration, refit every transform with the
/// current weights, train f_Si on the raw batch and f_Ti on the
/// weight-scaled aligned batch, then update every correlation weight from
/// the prediction of the averaged ensemble over all source and target
/// classifiers. Sources must be labeled, the target batch unlabeled, and
/// all batches must share one dimension and row count.
InitResult adacosa_init(const std::vector<DataBatch>& source_batches,
                        const DataBatch& target_batch,
                        const AdaCosaConfig& config);

/// Correlation-weighted ensemble over the target classifiers:
/// sum_i (cw_Si / sum_j cw_Sj) * f_Ti(instance).
std::vector<double> ensemble_init_predict(const InitResult& result,
                                          const Instance& instance);

/// Checkpoint round-trip for a finished initialization.
nlohmann::json init_result_to_json(const InitResult& result);
InitResult init_result_from_json(const nlohmann::json& j);

}  // namespace obal
