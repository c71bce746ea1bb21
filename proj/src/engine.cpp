#include "obal/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "obal/serialize.hpp"

namespace obal {
namespace {

constexpr int kCheckpointVersion = 1;

/// Row-scales one instance by its weight and maps it through A, exactly
/// like apply_alignment does batch-wise.
Instance align_one(const Instance& instance, double weight,
                   const AlignmentTransform& transform) {
  const int d = transform.dimension();
  Instance out = instance;
  for (int j = 0; j < d; ++j) {
    double value = 0.0;
    for (int k = 0; k < d; ++k) {
      value += instance.features[k] * transform.matrix(k, j);
    }
    out.features[j] = weight * value;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ClassifierPool
// ---------------------------------------------------------------------------

ClassifierPool::ClassifierPool(int capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw std::invalid_argument("pool: capacity must be >= 1");
  }
}

std::optional<double> ClassifierPool::insert(
    std::unique_ptr<BaseClassifier> classifier, double weight) {
  if (!classifier) {
    throw std::invalid_argument("pool: null classifier");
  }
  if (weight < 0.0) {
    throw std::invalid_argument("pool: negative weight");
  }
  entries_.push_back(
      PoolEntry{std::move(classifier), weight, next_stamp_++});
  if (static_cast<int>(entries_.size()) <= capacity_) return std::nullopt;
  std::size_t victim = 0;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    // Strictly lower weight wins; equal weight keeps the earlier (older)
    // candidate.
    if (entries_[i].weight < entries_[victim].weight) victim = i;
  }
  const double evicted = entries_[victim].weight;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  return evicted;
}

nlohmann::json ClassifierPool::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const PoolEntry& entry : entries_) {
    entries.push_back({{"classifier", entry.classifier->snapshot()},
                       {"weight", entry.weight},
                       {"stamp", entry.stamp}});
  }
  return {{"capacity", capacity_},
          {"next_stamp", next_stamp_},
          {"entries", std::move(entries)}};
}

ClassifierPool ClassifierPool::from_json(const nlohmann::json& j) {
  ClassifierPool pool(j.at("capacity").get<int>());
  pool.next_stamp_ = j.at("next_stamp").get<std::int64_t>();
  for (const nlohmann::json& entry : j.at("entries")) {
    pool.entries_.push_back(
        PoolEntry{classifier_from_snapshot(entry.at("classifier")),
                  entry.at("weight").get<double>(),
                  entry.at("stamp").get<std::int64_t>()});
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Weight retrieval
// ---------------------------------------------------------------------------

double retrieve_correlation_weight(const DataBatch& archive,
                                   const std::vector<double>& cw,
                                   const Instance& instance) {
  if (archive.size() != cw.size()) {
    throw std::invalid_argument(
        "retrieve_correlation_weight: archive/weight length mismatch");
  }
  if (static_cast<int>(instance.features.size()) != archive.dimension()) {
    throw std::invalid_argument(
        "retrieve_correlation_weight: dimension mismatch");
  }
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < archive.size(); ++t) {
    const std::vector<double>& row = archive.row(t).features;
    double distance = 0.0;
    for (std::size_t f = 0; f < row.size(); ++f) {
      const double diff = row[f] - instance.features[f];
      distance += diff * diff;
    }
    if (distance < best_distance) {  // strict: earliest index wins ties
      best_distance = distance;
      best = t;
    }
  }
  return cw[best];
}

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

nlohmann::json ObalConfig::to_json() const {
  return {{"window_length", window_length},
          {"i_max", i_max},
          {"pool_capacity", pool_capacity},
          {"k_max", k_max},
          {"drift_handling", drift_handling},
          {"align", align},
          {"reweight", reweight},
          {"z_alpha", z_alpha},
          {"eq11_literal", eq11_literal},
          {"learner", learner_kind_name(learner)},
          {"tree_params",
           {{"grace_period", tree_params.grace_period},
            {"split_confidence", tree_params.split_confidence},
            {"tie_threshold", tree_params.tie_threshold},
            {"leaf_prediction",
             tree_params.leaf_prediction == LeafPrediction::kNaiveBayes
                 ? "naive_bayes"
                 : "majority"},
            {"split_candidates", tree_params.split_candidates}}},
          {"em",
           {{"max_iters", em.max_iters},
            {"tol", em.tol},
            {"reg_floor", em.reg_floor}}},
          {"seed", seed}};
}

ObalConfig ObalConfig::from_json(const nlohmann::json& j) {
  ObalConfig config;
  config.window_length = j.at("window_length").get<int>();
  config.i_max = j.at("i_max").get<int>();
  config.pool_capacity = j.at("pool_capacity").get<int>();
  config.k_max = j.at("k_max").get<int>();
  config.drift_handling = j.at("drift_handling").get<bool>();
  config.align = j.at("align").get<bool>();
  config.reweight = j.at("reweight").get<bool>();
  config.z_alpha = j.at("z_alpha").get<double>();
  config.eq11_literal = j.at("eq11_literal").get<bool>();
  config.learner = parse_learner_kind(j.at("learner").get<std::string>());
  const nlohmann::json& tree = j.at("tree_params");
  config.tree_params.grace_period = tree.at("grace_period").get<int>();
  config.tree_params.split_confidence =
      tree.at("split_confidence").get<double>();
  config.tree_params.tie_threshold = tree.at("tie_threshold").get<double>();
  config.tree_params.leaf_prediction =
      tree.at("leaf_prediction").get<std::string>() == "majority"
          ? LeafPrediction::kMajority
          : LeafPrediction::kNaiveBayes;
  config.tree_params.split_candidates = tree.at("split_candidates").get<int>();
  const nlohmann::json& em = j.at("em");
  config.em.max_iters = em.at("max_iters").get<int>();
  config.em.tol = em.at("tol").get<double>();
  config.em.reg_floor = em.at("reg_floor").get<double>();
  config.seed = j.at("seed").get<std::uint64_t>();
  return config;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

ObalEngine::ObalEngine(int n_sources, int dimension, int class_count,
                       const ObalConfig& config)
    : config_(config),
      n_sources_(n_sources),
      dimension_(dimension),
      class_count_(class_count),
      target_detector_(TargetWindowConfig{config.window_length,
                                          config.z_alpha,
                                          config.eq11_literal}),
      pool_(config.pool_capacity) {
  if (n_sources < 1) {
    throw std::invalid_argument("engine: needs at least one source");
  }
  if (dimension < 1 || class_count < 2) {
    throw std::invalid_argument("engine: bad dimension or class count");
  }
  if (config.window_length < 2) {
    throw std::invalid_argument("engine: window_length must be >= 2");
  }
  source_buffers_.resize(n_sources);
}

void ObalEngine::log(const std::string& stream, const std::string& event,
                     nlohmann::json payload) {
  events_.push_back(EngineEvent{step_, stream, event, std::move(payload)});
}

void ObalEngine::try_initialize() {
  if (!buffering_) return;
  const std::size_t window = static_cast<std::size_t>(config_.window_length);
  if (target_buffer_.size() < window) return;
  for (const auto& buffer : source_buffers_) {
    if (buffer.size() < window) return;
  }

  std::vector<DataBatch> source_batches;
  source_batches.reserve(n_sources_);
  for (const auto& buffer : source_buffers_) {
    source_batches.emplace_back(buffer, class_count_);
  }
  const DataBatch target_batch(target_buffer_, class_count_);

  AdaCosaConfig ac;
  ac.i_max = config_.i_max;
  ac.align = config_.align;
  ac.reweight = config_.reweight;
  ac.learner = config_.learner;
  ac.tree_params = config_.tree_params;
  InitResult init = adacosa_init(source_batches, target_batch, ac);

  target_covariance_ = regularized_covariance(target_batch);
  sources_.clear();
  sources_.resize(static_cast<std::size_t>(n_sources_));
  for (int i = 0; i < n_sources_; ++i) {
    SourceState& state = sources_[static_cast<std::size_t>(i)];
    SourceInit& from = init.sources[static_cast<std::size_t>(i)];
    state.f_source = std::move(from.source_classifier);
    state.f_target = std::move(from.target_classifier);
    state.transform = from.transform;
    state.archive = std::move(from.archive);
    state.cw = std::move(from.cw);
    state.cw_scalar = from.cw_scalar;
    state.weight_sum = 0.0;
    state.weight_count = 0;
    state.recent.assign(state.archive->rows().begin(),
                        state.archive->rows().end());
    if (config_.drift_handling) {
      EmConfig em = config_.em;
      em.seed = mix_seed(config_.seed, 100 + static_cast<std::uint64_t>(i));
      state.gmm = fit_gmm_bic(*state.archive, config_.k_max, em);
    }
  }

  if (config_.drift_handling) {
    EmConfig em = config_.em;
    em.seed = mix_seed(config_.seed, 99);
    gmm_target_ = fit_gmm_bic(target_batch, config_.k_max, em);
    // The archived batch supplies the initial reference window.
    target_detector_.reset();
    std::vector<double> reference;
    reference.reserve(target_batch.size());
    for (const Instance& row : target_batch.rows()) {
      reference.push_back(max_component_likelihood(gmm_target_, row));
    }
    target_detector_.warm_up(reference);
  }

  stale_ensemble_.clear();
  for (auto& buffer : source_buffers_) buffer.clear();
  target_buffer_.clear();
  buffering_ = false;
  initialized_ = true;
  ++init_count_;
  log("T", "reinit",
      {{"initialization", init_count_}, {"beta", init.beta}});
}

void ObalEngine::process_source_instance(int source_index,
                                         const Instance& instance) {
  if (source_index < 0 || source_index >= n_sources_) {
    throw std::invalid_argument("engine: unknown source index");
  }
  if (!instance.label.has_value()) {
    throw std::invalid_argument("engine: source instances must be labeled");
  }
  if (static_cast<int>(instance.features.size()) != dimension_) {
    throw std::invalid_argument("engine: source instance dimension mismatch");
  }
  ++step_;
  const std::string stream = "S" + std::to_string(source_index);

  if (buffering_) {
    auto& buffer = source_buffers_[static_cast<std::size_t>(source_index)];
    buffer.push_back(instance);
    if (buffer.size() > static_cast<std::size_t>(config_.window_length)) {
      buffer.erase(buffer.begin());  // keep the freshest L_n
    }
    try_initialize();
    return;
  }

  SourceState& state = sources_[static_cast<std::size_t>(source_index)];
  state.recent.push_back(instance);
  if (state.recent.size() > static_cast<std::size_t>(config_.window_length)) {
    state.recent.pop_front();
  }

  DriftStatus status = DriftStatus::kStable;
  if (config_.drift_handling) {
    const int predicted = state.f_source->predict(instance);
    status = state.ddm.update(predicted == *instance.label);
  }

  const double cw =
      retrieve_correlation_weight(*state.archive, state.cw, instance);

  if (status != DriftStatus::kDrift) {
    // Stable path (warnings included): aw = 1.
    state.f_target->train(align_one(instance, cw, state.transform), cw);
    state.f_source->train(instance, 1.0);
    state.weight_sum += cw;
    state.weight_count += 1;
    return;
  }

  // Drift: retire the current classifier, refit the transform from the
  // recent window, and start a fresh classifier weighted by how much the
  // new concept still resembles the modeled one (Eq. 8).
  log(stream, "source_drift",
      {{"timestamp", instance.timestamp}, {"error_rate", state.ddm.error_rate()}});
  const std::optional<double> evicted =
      pool_.insert(std::move(state.f_target), state.live_weight());
  if (evicted.has_value()) {
    log(stream, "pool_evict", {{"weight", *evicted}});
  }

  if (config_.align) {
    const DataBatch recent_batch(
        std::vector<Instance>(state.recent.begin(), state.recent.end()),
        class_count_);
    std::vector<double> weights;
    weights.reserve(recent_batch.size());
    for (const Instance& row : recent_batch.rows()) {
      weights.push_back(
          retrieve_correlation_weight(*state.archive, state.cw, row));
    }
    state.transform = coral_transform(
        regularized_covariance(recent_batch, weights), target_covariance_);
  }

  const double aw = normalized_max_component_likelihood(state.gmm, instance);
  state.f_target =
      make_classifier(config_.learner, dimension_, class_count_,
                      config_.tree_params);
  state.f_target->train(align_one(instance, cw, state.transform), aw * cw);
  state.f_source =
      make_classifier(config_.learner, dimension_, class_count_,
                      config_.tree_params);
  state.f_source->train(instance, 1.0);
  state.weight_sum = aw * cw;
  state.weight_count = 1;
}

std::vector<double> ObalEngine::predict_from(
    const std::vector<const BaseClassifier*>& members,
    const std::vector<double>& weights, const Instance& instance) const {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> distribution(static_cast<std::size_t>(class_count_),
                                   0.0);
  for (std::size_t m = 0; m < members.size(); ++m) {
    const double coefficient =
        total > 0.0 ? weights[m] / total
                    : 1.0 / static_cast<double>(members.size());
    const std::vector<double> p = members[m]->predict_proba(instance);
    for (int c = 0; c < class_count_; ++c) {
      distribution[static_cast<std::size_t>(c)] +=
          coefficient * p[static_cast<std::size_t>(c)];
    }
  }
  return distribution;
}

std::vector<double> ObalEngine::ensemble_predict(
    const Instance& instance) const {
  if (sources_.empty() && pool_.size() == 0) {
    throw std::logic_error("engine: no classifiers available");
  }
  std::vector<const BaseClassifier*> members;
  std::vector<double> weights;
  for (const SourceState& state : sources_) {
    members.push_back(state.f_target.get());
    weights.push_back(state.live_weight());
  }
  for (std::size_t l = 0; l < pool_.size(); ++l) {
    members.push_back(pool_.entry(l).classifier.get());
    weights.push_back(pool_.entry(l).weight);
  }
  return predict_from(members, weights, instance);
}

TargetOutput ObalEngine::process_target_instance(const Instance& instance) {
  if (instance.label.has_value()) {
    throw std::invalid_argument("engine: target instances must be unlabeled");
  }
  if (static_cast<int>(instance.features.size()) != dimension_) {
    throw std::invalid_argument("engine: target instance dimension mismatch");
  }
  ++step_;
  TargetOutput out;

  if (buffering_) {
    target_buffer_.push_back(instance);
    if (target_buffer_.size() >
        static_cast<std::size_t>(config_.window_length)) {
      target_buffer_.erase(target_buffer_.begin());
    }
    out.stale = true;
    if (!stale_ensemble_.empty()) {
      std::vector<const BaseClassifier*> members;
      std::vector<double> weights;
      for (const StaleMember& member : stale_ensemble_) {
        members.push_back(member.classifier.get());
        weights.push_back(member.weight);
      }
      out.distribution = predict_from(members, weights, instance);
      out.prediction = argmax_lowest(out.distribution);
    }
    log("T", "prediction",
        {{"timestamp", instance.timestamp},
         {"prediction", out.prediction},
         {"stale", true}});
    try_initialize();
    return out;
  }

  out.distribution = ensemble_predict(instance);
  out.prediction = argmax_lowest(out.distribution);
  log("T", "prediction",
      {{"timestamp", instance.timestamp},
       {"prediction", out.prediction},
       {"stale", false}});

  if (config_.drift_handling) {
    const double likelihood = max_component_likelihood(gmm_target_, instance);
    if (target_detector_.update(likelihood)) {
      out.drift = true;
      log("T", "target_drift",
          {{"timestamp", instance.timestamp},
           {"mu_ref", target_detector_.mu_ref()},
           {"mu_det", target_detector_.mu_det()}});
      // Keep a frozen copy of the current ensemble for the buffering gap,
      // then clear everything the re-initialization will rebuild.
      stale_ensemble_.clear();
      for (SourceState& state : sources_) {
        stale_ensemble_.push_back(
            StaleMember{std::move(state.f_target), state.live_weight()});
      }
      for (PoolEntry& entry : pool_.drain()) {
        stale_ensemble_.push_back(
            StaleMember{std::move(entry.classifier), entry.weight});
      }
      sources_.clear();
      gmm_target_ = GmmModel{};
      target_detector_.reset();
      buffering_ = true;
    }
  }
  return out;
}

double ObalEngine::source_weight(int source_index) const {
  if (source_index < 0 ||
      source_index >= static_cast<int>(sources_.size())) {
    throw std::invalid_argument("engine: unknown source index");
  }
  return sources_[static_cast<std::size_t>(source_index)].live_weight();
}

const std::vector<double>& ObalEngine::correlation_weights(
    int source_index) const {
  if (source_index < 0 ||
      source_index >= static_cast<int>(sources_.size())) {
    throw std::invalid_argument("engine: unknown source index");
  }
  return sources_[static_cast<std::size_t>(source_index)].cw;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

nlohmann::json ObalEngine::checkpoint() const {
  nlohmann::json sources = nlohmann::json::array();
  for (const SourceState& state : sources_) {
    sources.push_back(
        {{"f_source", state.f_source->snapshot()},
         {"f_target", state.f_target->snapshot()},
         {"ddm", state.ddm.to_json()},
         {"gmm", gmm_to_json(state.gmm)},
         {"transform", transform_to_json(state.transform)},
         {"archive", batch_to_json(*state.archive)},
         {"cw", state.cw},
         {"cw_scalar", state.cw_scalar},
         {"weight_sum", state.weight_sum},
         {"weight_count", state.weight_count},
         {"recent", batch_to_json(DataBatch(
                        std::vector<Instance>(state.recent.begin(),
                                              state.recent.end()),
                        class_count_))}});
  }
  nlohmann::json stale = nlohmann::json::array();
  for (const StaleMember& member : stale_ensemble_) {
    stale.push_back({{"classifier", member.classifier->snapshot()},
                     {"weight", member.weight}});
  }
  nlohmann::json source_buffers = nlohmann::json::array();
  for (const auto& buffer : source_buffers_) {
    nlohmann::json rows = nlohmann::json::array();
    for (const Instance& instance : buffer) {
      nlohmann::json row{{"features", instance.features},
                         {"timestamp", instance.timestamp}};
      if (instance.label.has_value()) row["label"] = *instance.label;
      rows.push_back(std::move(row));
    }
    source_buffers.push_back(std::move(rows));
  }
  nlohmann::json target_rows = nlohmann::json::array();
  for (const Instance& instance : target_buffer_) {
    target_rows.push_back({{"features", instance.features},
                           {"timestamp", instance.timestamp}});
  }
  nlohmann::json doc{{"version", kCheckpointVersion},
                     {"config", config_.to_json()},
                     {"n_sources", n_sources_},
                     {"dimension", dimension_},
                     {"class_count", class_count_},
                     {"buffering", buffering_},
                     {"initialized", initialized_},
                     {"init_count", init_count_},
                     {"step", step_},
                     {"source_buffers", std::move(source_buffers)},
                     {"target_buffer", std::move(target_rows)},
                     {"sources", std::move(sources)},
                     {"gmm_target", gmm_to_json(gmm_target_)},
                     {"target_detector", target_detector_.to_json()},
                     {"pool", pool_.to_json()},
                     {"stale_ensemble", std::move(stale)}};
  if (target_covariance_.size() > 0) {
    doc["target_covariance"] = matrix_to_json(target_covariance_);
  }
  return doc;
}

ObalEngine ObalEngine::restore(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::invalid_argument("engine: unsupported checkpoint version");
  }
  ObalEngine engine(j.at("n_sources").get<int>(),
                    j.at("dimension").get<int>(),
                    j.at("class_count").get<int>(),
                    ObalConfig::from_json(j.at("config")));
  engine.buffering_ = j.at("buffering").get<bool>();
  engine.initialized_ = j.at("initialized").get<bool>();
  engine.init_count_ = j.at("init_count").get<int>();
  engine.step_ = j.at("step").get<std::int64_t>();

  const auto read_instance = [](const nlohmann::json& row) {
    Instance instance;
    instance.features = row.at("features").get<std::vector<double>>();
    instance.timestamp = row.at("timestamp").get<std::int64_t>();
    if (row.contains("label")) instance.label = row.at("label").get<int>();
    return instance;
  };
  engine.source_buffers_.clear();
  for (const nlohmann::json& buffer : j.at("source_buffers")) {
    std::vector<Instance> rows;
    for (const nlohmann::json& row : buffer) rows.push_back(read_instance(row));
    engine.source_buffers_.push_back(std::move(rows));
  }
  engine.target_buffer_.clear();
  for (const nlohmann::json& row : j.at("target_buffer")) {
    engine.target_buffer_.push_back(read_instance(row));
  }

  for (const nlohmann::json& doc : j.at("sources")) {
    SourceState state;
    state.f_source = classifier_from_snapshot(doc.at("f_source"));
    state.f_target = classifier_from_snapshot(doc.at("f_target"));
    state.ddm = DdmDetector::from_json(doc.at("ddm"));
    state.gmm = gmm_from_json(doc.at("gmm"));
    state.transform = transform_from_json(doc.at("transform"));
    state.archive = batch_from_json(doc.at("archive"));
    state.cw = doc.at("cw").get<std::vector<double>>();
    state.cw_scalar = doc.at("cw_scalar").get<double>();
    state.weight_sum = doc.at("weight_sum").get<double>();
    state.weight_count = doc.at("weight_count").get<std::int64_t>();
    const DataBatch recent = batch_from_json(doc.at("recent"));
    state.recent.assign(recent.rows().begin(), recent.rows().end());
    engine.sources_.push_back(std::move(state));
  }
  engine.gmm_target_ = gmm_from_json(j.at("gmm_target"));
  engine.target_detector_ =
      TargetWindowDetector::from_json(j.at("target_detector"));
  engine.pool_ = ClassifierPool::from_json(j.at("pool"));
  for (const nlohmann::json& member : j.at("stale_ensemble")) {
    engine.stale_ensemble_.push_back(
        StaleMember{classifier_from_snapshot(member.at("classifier")),
                    member.at("weight").get<double>()});
  }
  if (j.contains("target_covariance")) {
    engine.target_covariance_ = matrix_from_json(j.at("target_covariance"));
  }
  return engine;
}

}  // namespace obal
