#include "obal/adacosa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "obal/serialize.hpp"

namespace obal {
namespace {

double mean_of(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

void validate_batches(const std::vector<DataBatch>& sources,
                      const DataBatch& target) {
  if (sources.empty()) {
    throw std::invalid_argument("adacosa: needs at least one source batch");
  }
  if (target.labeled()) {
    throw std::invalid_argument("adacosa: target batch must be unlabeled");
  }
  for (const DataBatch& source : sources) {
    if (source.dimension() != target.dimension()) {
      throw std::invalid_argument("adacosa: batch dimensions differ");
    }
    if (source.class_count() != target.class_count()) {
      throw std::invalid_argument("adacosa: batch class counts differ");
    }
    if (source.size() != target.size()) {
      throw std::invalid_argument("adacosa: batches must share one length");
    }
    if (!source.labeled()) {
      throw std::invalid_argument("adacosa: source batches must be labeled");
    }
  }
}

}  // namespace

LearnerKind parse_learner_kind(const std::string& name) {
  if (name == "hoeffding" || name == "tree") return LearnerKind::kHoeffdingTree;
  if (name == "bayes" || name == "naive_bayes") return LearnerKind::kNaiveBayes;
  throw std::invalid_argument("unknown learner kind: " + name);
}

std::string learner_kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kHoeffdingTree:
      return "hoeffding";
    case LearnerKind::kNaiveBayes:
      return "naive_bayes";
  }
  throw std::invalid_argument("unknown learner kind");
}

std::unique_ptr<BaseClassifier> make_classifier(
    LearnerKind kind, int dimension, int class_count,
    const HoeffdingTreeParams& tree_params) {
  switch (kind) {
    case LearnerKind::kHoeffdingTree:
      return std::make_unique<HoeffdingTree>(dimension, class_count,
                                             tree_params);
    case LearnerKind::kNaiveBayes:
      return std::make_unique<GaussianNaiveBayes>(dimension, class_count);
  }
  throw std::invalid_argument("unknown learner kind");
}

double compute_beta(double window_length, double i_max) {
  if (!(window_length > 0.0) || !(i_max > 0.0) || window_length <= i_max) {
    throw std::invalid_argument(
        "compute_beta: window_length / i_max must exceed 1");
  }
  return 0.5 * std::log(1.0 + std::sqrt(2.0 * std::log(window_length / i_max)));
}

double update_correlation_weight(double cw, int predicted_label,
                                 int true_label, double beta) {
  if (predicted_label == true_label) return cw;
  return cw * std::exp(-beta);
}

InitResult adacosa_init(const std::vector<DataBatch>& source_batches,
                        const DataBatch& target_batch,
                        const AdaCosaConfig& config) {
  validate_batches(source_batches, target_batch);
  if (config.i_max < 1) {
    throw std::invalid_argument("adacosa: i_max must be >= 1");
  }
  const int d = target_batch.dimension();
  const int class_count = target_batch.class_count();
  const std::size_t n_sources = source_batches.size();
  const std::size_t window = target_batch.size();

  const double beta =
      config.reweight
          ? compute_beta(static_cast<double>(window),
                         static_cast<double>(config.i_max))
          : 0.0;

  // The target covariance carries no weights and never changes.
  const Eigen::MatrixXd c_target = regularized_covariance(target_batch);

  std::vector<std::vector<double>> cw(n_sources,
                                      std::vector<double>(window, 1.0));
  std::vector<AlignmentTransform> transforms(
      n_sources, AlignmentTransform::identity(d));
  std::vector<std::unique_ptr<BaseClassifier>> f_source(n_sources);
  std::vector<std::unique_ptr<BaseClassifier>> f_target(n_sources);
  std::vector<DataBatch> aligned;  // iteration-local, rebuilt every pass

  const int iterations = config.reweight ? config.i_max : 1;
  for (int iteration = 0; iteration < iterations; ++iteration) {
    // Training phase: every transform is refit because the weights moved,
    // and both classifiers are recreated from scratch.
    aligned.clear();
    for (std::size_t i = 0; i < n_sources; ++i) {
      if (config.align) {
        transforms[i] = coral_transform(
            regularized_covariance(source_batches[i], cw[i]), c_target);
      }
      aligned.push_back(
          apply_alignment(source_batches[i], cw[i], transforms[i]));
      f_source[i] =
          make_classifier(config.learner, d, class_count, config.tree_params);
      f_target[i] =
          make_classifier(config.learner, d, class_count, config.tree_params);
      for (std::size_t t = 0; t < window; ++t) {
        f_source[i]->train(source_batches[i].row(t), 1.0);
        f_target[i]->train(aligned[i].row(t), cw[i][t]);
      }
    }
    if (!config.reweight) break;

    // Update phase: the frozen ensemble over all f_Si and f_Ti judges
    // every source instance; each classifier consumes the instance's
    // representation in its own space (raw for f_Si, weighted-aligned for
    // f_Ti).
    for (std::size_t i = 0; i < n_sources; ++i) {
      for (std::size_t t = 0; t < window; ++t) {
        const Instance& raw = source_batches[i].row(t);
        const Instance& mapped = aligned[i].row(t);
        std::vector<double> votes(class_count, 0.0);
        for (std::size_t j = 0; j < n_sources; ++j) {
          const std::vector<double> ps = f_source[j]->predict_proba(raw);
          const std::vector<double> pt = f_target[j]->predict_proba(mapped);
          for (int c = 0; c < class_count; ++c) votes[c] += ps[c] + pt[c];
        }
        const int predicted = argmax_lowest(votes);
        cw[i][t] =
            update_correlation_weight(cw[i][t], predicted, *raw.label, beta);
      }
    }
  }

  InitResult result{.sources = {},
                    .target_archive = target_batch,
                    .beta = beta,
                    .dimension = d,
                    .class_count = class_count};
  result.sources.reserve(n_sources);
  for (std::size_t i = 0; i < n_sources; ++i) {
    result.sources.push_back(SourceInit{
        .source_classifier = std::move(f_source[i]),
        .target_classifier = std::move(f_target[i]),
        .transform = transforms[i],
        .cw = std::move(cw[i]),
        .cw_scalar = 0.0,
        .archive = source_batches[i]});
    result.sources.back().cw_scalar = mean_of(result.sources.back().cw);
  }
  return result;
}

std::vector<double> ensemble_init_predict(const InitResult& result,
                                          const Instance& instance) {
  if (result.sources.empty()) {
    throw std::logic_error("ensemble_init_predict: uninitialized result");
  }
  if (static_cast<int>(instance.features.size()) != result.dimension) {
    throw std::invalid_argument("ensemble_init_predict: dimension mismatch");
  }
  double total = 0.0;
  for (const SourceInit& source : result.sources) total += source.cw_scalar;
  std::vector<double> distribution(result.class_count, 0.0);
  for (const SourceInit& source : result.sources) {
    const std::vector<double> p =
        source.target_classifier->predict_proba(instance);
    const double coefficient = source.cw_scalar / total;
    for (int c = 0; c < result.class_count; ++c) {
      distribution[c] += coefficient * p[c];
    }
  }
  return distribution;
}

nlohmann::json init_result_to_json(const InitResult& result) {
  nlohmann::json sources = nlohmann::json::array();
  for (const SourceInit& source : result.sources) {
    sources.push_back(
        {{"source_classifier", source.source_classifier->snapshot()},
         {"target_classifier", source.target_classifier->snapshot()},
         {"transform", transform_to_json(source.transform)},
         {"cw", source.cw},
         {"cw_scalar", source.cw_scalar},
         {"archive", batch_to_json(source.archive)}});
  }
  return {{"beta", result.beta},
          {"dimension", result.dimension},
          {"class_count", result.class_count},
          {"target_archive", batch_to_json(result.target_archive)},
          {"sources", std::move(sources)}};
}

InitResult init_result_from_json(const nlohmann::json& j) {
  InitResult result{
      .sources = {},
      .target_archive = batch_from_json(j.at("target_archive")),
      .beta = j.at("beta").get<double>(),
      .dimension = j.at("dimension").get<int>(),
      .class_count = j.at("class_count").get<int>()};
  for (const nlohmann::json& source : j.at("sources")) {
    result.sources.push_back(SourceInit{
        .source_classifier =
            classifier_from_snapshot(source.at("source_classifier")),
        .target_classifier =
            classifier_from_snapshot(source.at("target_classifier")),
        .transform = transform_from_json(source.at("transform")),
        .cw = source.at("cw").get<std::vector<double>>(),
        .cw_scalar = source.at("cw_scalar").get<double>(),
        .archive = batch_from_json(source.at("archive"))});
  }
  return result;
}

}  // namespace obal
