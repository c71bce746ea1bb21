#include "obal/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace obal {
namespace {

std::string lowercase(std::string text) {
  for (char& c : text) c = static_cast<char>(std::tolower(c));
  return text;
}

std::string format_fixed(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.4f", value);
  return buffer;
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

/// Sample standard deviation; zero for fewer than two values.
double std_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = mean_of(values);
  double sum = 0.0;
  for (double v : values) sum += (v - mean) * (v - mean);
  return std::sqrt(sum / static_cast<double>(values.size() - 1));
}

void reject_unknown_keys(const nlohmann::json& doc,
                         std::initializer_list<const char*> known,
                         const std::string& section) {
  for (const auto& item : doc.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* key) {
          return item.key() == key;
        }) == known.end()) {
      throw std::invalid_argument("config: unknown key '" + item.key() +
                                  "' in " + section);
    }
  }
}

void merge_scenario(ScenarioConfig& scenario, const nlohmann::json& doc) {
  reject_unknown_keys(
      doc,
      {"kind", "n_sources", "samples_per_stream", "change_points", "seed",
       "dimension", "sea_thetas", "tree_depth", "rbf_centroids",
       "rbf_velocity", "hyperplane_velocity", "label_noise", "source_sizes",
       "standardize", "noisy_source", "noisy_source_rate",
       "noisy_source_flip", "stream_gain_spread", "source_gain_shifts"},
      "scenario");
  if (doc.contains("kind")) {
    scenario.kind = parse_generator_kind(doc.at("kind").get<std::string>());
  }
  if (doc.contains("n_sources")) scenario.n_sources = doc.at("n_sources");
  if (doc.contains("samples_per_stream")) {
    scenario.samples_per_stream = doc.at("samples_per_stream");
  }
  if (doc.contains("change_points")) {
    scenario.change_points =
        doc.at("change_points").get<std::vector<std::int64_t>>();
  }
  if (doc.contains("seed")) scenario.seed = doc.at("seed");
  if (doc.contains("dimension")) scenario.dimension = doc.at("dimension");
  if (doc.contains("sea_thetas")) {
    scenario.sea_thetas = doc.at("sea_thetas").get<std::vector<double>>();
  }
  if (doc.contains("tree_depth")) scenario.tree_depth = doc.at("tree_depth");
  if (doc.contains("rbf_centroids")) {
    scenario.rbf_centroids = doc.at("rbf_centroids");
  }
  if (doc.contains("rbf_velocity")) {
    scenario.rbf_velocity = doc.at("rbf_velocity");
  }
  if (doc.contains("hyperplane_velocity")) {
    scenario.hyperplane_velocity = doc.at("hyperplane_velocity");
  }
  if (doc.contains("label_noise")) scenario.label_noise = doc.at("label_noise");
  if (doc.contains("source_sizes")) {
    scenario.source_sizes =
        doc.at("source_sizes").get<std::vector<std::size_t>>();
  }
  if (doc.contains("standardize")) scenario.standardize = doc.at("standardize");
  if (doc.contains("noisy_source")) {
    scenario.noisy_source = doc.at("noisy_source");
  }
  if (doc.contains("noisy_source_rate")) {
    scenario.noisy_source_rate = doc.at("noisy_source_rate");
  }
  if (doc.contains("noisy_source_flip")) {
    scenario.noisy_source_flip = doc.at("noisy_source_flip");
  }
  if (doc.contains("stream_gain_spread")) {
    scenario.stream_gain_spread = doc.at("stream_gain_spread");
  }
  if (doc.contains("source_gain_shifts")) {
    scenario.source_gain_shifts = doc.at("source_gain_shifts");
  }
}

nlohmann::json scenario_to_json(const ScenarioConfig& scenario) {
  return {{"kind", generator_kind_name(scenario.kind)},
          {"n_sources", scenario.n_sources},
          {"samples_per_stream", scenario.samples_per_stream},
          {"change_points", scenario.change_points},
          {"seed", scenario.seed},
          {"dimension", scenario.dimension},
          {"sea_thetas", scenario.sea_thetas},
          {"tree_depth", scenario.tree_depth},
          {"rbf_centroids", scenario.rbf_centroids},
          {"rbf_velocity", scenario.rbf_velocity},
          {"hyperplane_velocity", scenario.hyperplane_velocity},
          {"label_noise", scenario.label_noise},
          {"source_sizes", scenario.source_sizes},
          {"standardize", scenario.standardize},
          {"noisy_source", scenario.noisy_source},
          {"noisy_source_rate", scenario.noisy_source_rate},
          {"noisy_source_flip", scenario.noisy_source_flip},
          {"stream_gain_spread", scenario.stream_gain_spread},
          {"source_gain_shifts", scenario.source_gain_shifts}};
}

void merge_engine(ObalConfig& engine, const nlohmann::json& doc) {
  reject_unknown_keys(doc,
                      {"window_length", "i_max", "pool_capacity", "k_max",
                       "drift_handling", "align", "reweight", "z_alpha",
                       "eq11_literal", "learner", "tree_params", "em", "seed"},
                      "engine");
  if (doc.contains("window_length")) {
    engine.window_length = doc.at("window_length");
  }
  if (doc.contains("i_max")) engine.i_max = doc.at("i_max");
  if (doc.contains("pool_capacity")) {
    engine.pool_capacity = doc.at("pool_capacity");
  }
  if (doc.contains("k_max")) engine.k_max = doc.at("k_max");
  if (doc.contains("drift_handling")) {
    engine.drift_handling = doc.at("drift_handling");
  }
  if (doc.contains("align")) engine.align = doc.at("align");
  if (doc.contains("reweight")) engine.reweight = doc.at("reweight");
  if (doc.contains("z_alpha")) engine.z_alpha = doc.at("z_alpha");
  if (doc.contains("eq11_literal")) {
    engine.eq11_literal = doc.at("eq11_literal");
  }
  if (doc.contains("learner")) {
    engine.learner = parse_learner_kind(doc.at("learner").get<std::string>());
  }
  if (doc.contains("tree_params")) {
    const nlohmann::json& tree = doc.at("tree_params");
    reject_unknown_keys(tree,
                        {"grace_period", "split_confidence", "tie_threshold",
                         "leaf_prediction", "split_candidates"},
                        "engine.tree_params");
    if (tree.contains("grace_period")) {
      engine.tree_params.grace_period = tree.at("grace_period");
    }
    if (tree.contains("split_confidence")) {
      engine.tree_params.split_confidence = tree.at("split_confidence");
    }
    if (tree.contains("tie_threshold")) {
      engine.tree_params.tie_threshold = tree.at("tie_threshold");
    }
    if (tree.contains("leaf_prediction")) {
      engine.tree_params.leaf_prediction =
          tree.at("leaf_prediction").get<std::string>() == "majority"
              ? LeafPrediction::kMajority
              : LeafPrediction::kNaiveBayes;
    }
    if (tree.contains("split_candidates")) {
      engine.tree_params.split_candidates = tree.at("split_candidates");
    }
  }
  if (doc.contains("em")) {
    const nlohmann::json& em = doc.at("em");
    reject_unknown_keys(em, {"max_iters", "tol", "reg_floor"}, "engine.em");
    if (em.contains("max_iters")) engine.em.max_iters = em.at("max_iters");
    if (em.contains("tol")) engine.em.tol = em.at("tol");
    if (em.contains("reg_floor")) engine.em.reg_floor = em.at("reg_floor");
  }
  if (doc.contains("seed")) engine.seed = doc.at("seed");
}

}  // namespace

Variant parse_variant(const std::string& name) {
  const std::string key = lowercase(name);
  if (key == "v1") return Variant::kV1;
  if (key == "v2") return Variant::kV2;
  if (key == "v3") return Variant::kV3;
  if (key == "full") return Variant::kFull;
  throw std::invalid_argument("unknown variant: '" + name + "'");
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::kV1:
      return "v1";
    case Variant::kV2:
      return "v2";
    case Variant::kV3:
      return "v3";
    case Variant::kFull:
      return "full";
  }
  throw std::invalid_argument("unknown variant value");
}

void apply_variant(ObalConfig& config, Variant variant) {
  switch (variant) {
    case Variant::kV1:
      config.drift_handling = false;
      config.align = false;
      config.reweight = false;
      break;
    case Variant::kV2:
      config.drift_handling = true;
      config.align = false;
      config.reweight = false;
      break;
    case Variant::kV3:
      config.drift_handling = true;
      config.align = true;
      config.reweight = false;
      break;
    case Variant::kFull:
      config.drift_handling = true;
      config.align = true;
      config.reweight = true;
      break;
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"scenario", scenario_to_json(scenario)},
          {"engine", engine.to_json()},
          {"variant", variant_name(variant)},
          {"seeds", seeds}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  merge_experiment_json(config, j);
  return config;
}

void merge_experiment_json(ExperimentConfig& config,
                           const nlohmann::json& doc) {
  reject_unknown_keys(doc, {"scenario", "engine", "variant", "seeds"},
                      "experiment");
  if (doc.contains("scenario")) merge_scenario(config.scenario, doc.at("scenario"));
  if (doc.contains("engine")) merge_engine(config.engine, doc.at("engine"));
  if (doc.contains("variant")) {
    config.variant = parse_variant(doc.at("variant").get<std::string>());
  }
  if (doc.contains("seeds")) {
    config.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  }
}

double prequential_accuracy(const std::vector<int>& predictions,
                            const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument(
        "prequential_accuracy: prediction/label length mismatch");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("prequential_accuracy: nothing scored");
  }
  std::size_t matches = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++matches;
  }
  return 100.0 * static_cast<double>(matches) /
         static_cast<double>(predictions.size());
}

std::vector<double> accuracy_trajectory(const std::vector<int>& predictions,
                                        const std::vector<int>& labels,
                                        std::size_t window) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument(
        "accuracy_trajectory: prediction/label length mismatch");
  }
  if (window == 0) {
    throw std::invalid_argument("accuracy_trajectory: window must be >= 1");
  }
  std::vector<double> trajectory;
  for (std::size_t begin = 0; begin < predictions.size(); begin += window) {
    const std::size_t end = std::min(begin + window, predictions.size());
    std::size_t matches = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (predictions[i] == labels[i]) ++matches;
    }
    trajectory.push_back(100.0 * static_cast<double>(matches) /
                         static_cast<double>(end - begin));
  }
  return trajectory;
}

SeedResult evaluate_stream(const Multistream& stream,
                           const ObalConfig& engine_config,
                           std::vector<EngineEvent>* event_sink) {
  const int n_sources = static_cast<int>(stream.sources.size());
  ObalEngine engine(n_sources, stream.dimension, stream.class_count,
                    engine_config);

  SeedResult result;
  result.seed = engine_config.seed;
  std::vector<int> scored_labels;
  std::vector<char> scored_stale;

  const auto started = std::chrono::steady_clock::now();

  // Replay every stream in global timestamp order. The split preserved
  // the original per-stream chronology, so a k-way front merge suffices.
  std::vector<std::size_t> cursor(stream.sources.size() + 1, 0);
  const std::size_t target_slot = stream.sources.size();
  while (true) {
    int next = -1;
    std::int64_t next_time = std::numeric_limits<std::int64_t>::max();
    for (int s = 0; s < n_sources; ++s) {
      const auto& rows = stream.sources[static_cast<std::size_t>(s)];
      if (cursor[static_cast<std::size_t>(s)] < rows.size() &&
          rows[cursor[static_cast<std::size_t>(s)]].timestamp < next_time) {
        next = s;
        next_time = rows[cursor[static_cast<std::size_t>(s)]].timestamp;
      }
    }
    if (cursor[target_slot] < stream.target.size() &&
        stream.target[cursor[target_slot]].timestamp < next_time) {
      next = static_cast<int>(target_slot);
      next_time = stream.target[cursor[target_slot]].timestamp;
    }
    if (next < 0) break;

    if (next < n_sources) {
      const auto& rows = stream.sources[static_cast<std::size_t>(next)];
      engine.process_source_instance(
          next, rows[cursor[static_cast<std::size_t>(next)]++]);
      continue;
    }
    const std::size_t j = cursor[target_slot]++;
    const TargetOutput out =
        engine.process_target_instance(stream.target[j]);
    if (out.prediction < 0) continue;  // nothing exists to answer with yet
    result.predictions.push_back(out.prediction);
    scored_labels.push_back(stream.held_out_target_labels[j]);
    scored_stale.push_back(out.stale ? 1 : 0);
  }

  const auto finished = std::chrono::steady_clock::now();
  result.wall_seconds =
      std::chrono::duration<double>(finished - started).count();

  result.scored = static_cast<std::int64_t>(result.predictions.size());
  std::int64_t matches = 0;
  std::int64_t live_matches = 0;
  std::int64_t live_total = 0;
  for (std::size_t i = 0; i < result.predictions.size(); ++i) {
    const bool match = result.predictions[i] == scored_labels[i];
    matches += match;
    if (!scored_stale[i]) {
      ++live_total;
      live_matches += match;
    } else {
      ++result.stale_scored;
    }
  }
  if (result.scored > 0) {
    result.accuracy =
        100.0 * static_cast<double>(matches) / static_cast<double>(result.scored);
    result.trajectory = accuracy_trajectory(result.predictions, scored_labels);
  }
  result.accuracy_live =
      live_total > 0 ? 100.0 * static_cast<double>(live_matches) /
                           static_cast<double>(live_total)
                     : 0.0;

  for (const EngineEvent& event : engine.events()) {
    if (event.event == "source_drift") ++result.source_drifts;
    if (event.event == "target_drift") ++result.target_drifts;
  }
  result.initializations = engine.initializations();
  if (event_sink != nullptr) *event_sink = engine.events();
  return result;
}

SeedResult run_single(const ExperimentConfig& config, std::uint64_t seed,
                      std::vector<EngineEvent>* event_sink) {
  ScenarioConfig scenario = config.scenario;
  scenario.seed = seed;
  const Multistream stream = build_scenario(scenario);

  ObalConfig engine = config.engine;
  engine.seed = seed;
  apply_variant(engine, config.variant);
  return evaluate_stream(stream, engine, event_sink);
}

Report run_experiment(const ExperimentConfig& config,
                      std::vector<EngineEvent>* event_sink) {
  if (config.seeds.empty()) {
    throw std::invalid_argument("run_experiment: seed list is empty");
  }
  Report report;
  report.variant = config.variant;
  std::vector<double> accuracies;
  std::vector<double> live;
  for (std::uint64_t seed : config.seeds) {
    std::vector<EngineEvent> events;
    report.seeds.push_back(
        run_single(config, seed, event_sink == nullptr ? nullptr : &events));
    if (event_sink != nullptr) {
      event_sink->insert(event_sink->end(),
                         std::make_move_iterator(events.begin()),
                         std::make_move_iterator(events.end()));
    }
    accuracies.push_back(report.seeds.back().accuracy);
    live.push_back(report.seeds.back().accuracy_live);
  }
  report.mean_accuracy = mean_of(accuracies);
  report.std_accuracy = std_of(accuracies);
  report.mean_accuracy_live = mean_of(live);
  report.std_accuracy_live = std_of(live);
  return report;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  const std::string key = lowercase(name);
  if (key == "window_length") return SweepParameter::kWindowLength;
  if (key == "i_max") return SweepParameter::kIMax;
  if (key == "pool_capacity") return SweepParameter::kPoolCapacity;
  throw std::invalid_argument("unknown sweep parameter: '" + name + "'");
}

std::string sweep_parameter_name(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::kWindowLength:
      return "window_length";
    case SweepParameter::kIMax:
      return "i_max";
    case SweepParameter::kPoolCapacity:
      return "pool_capacity";
  }
  throw std::invalid_argument("unknown sweep parameter value");
}

std::vector<Report> parameter_sweep(const ExperimentConfig& base,
                                    SweepParameter parameter,
                                    const std::vector<int>& values) {
  if (values.empty()) {
    throw std::invalid_argument("parameter_sweep: no values given");
  }
  std::vector<Report> reports;
  reports.reserve(values.size());
  for (int value : values) {
    ExperimentConfig config = base;
    switch (parameter) {
      case SweepParameter::kWindowLength:
        config.engine.window_length = value;
        break;
      case SweepParameter::kIMax:
        config.engine.i_max = value;
        break;
      case SweepParameter::kPoolCapacity:
        config.engine.pool_capacity = value;
        break;
    }
    reports.push_back(run_experiment(config));
  }
  return reports;
}

std::string report_csv(const Report& report) {
  std::string out =
      "seed,accuracy,accuracy_live,scored,stale_scored,source_drifts,"
      "target_drifts,initializations\n";
  std::vector<double> columns[7];
  for (const SeedResult& seed : report.seeds) {
    out += std::to_string(seed.seed) + ',' + format_fixed(seed.accuracy) +
           ',' + format_fixed(seed.accuracy_live) + ',' +
           std::to_string(seed.scored) + ',' +
           std::to_string(seed.stale_scored) + ',' +
           std::to_string(seed.source_drifts) + ',' +
           std::to_string(seed.target_drifts) + ',' +
           std::to_string(seed.initializations) + '\n';
    columns[0].push_back(seed.accuracy);
    columns[1].push_back(seed.accuracy_live);
    columns[2].push_back(static_cast<double>(seed.scored));
    columns[3].push_back(static_cast<double>(seed.stale_scored));
    columns[4].push_back(static_cast<double>(seed.source_drifts));
    columns[5].push_back(static_cast<double>(seed.target_drifts));
    columns[6].push_back(static_cast<double>(seed.initializations));
  }
  out += "mean";
  for (const auto& column : columns) out += ',' + format_fixed(mean_of(column));
  out += "\nstd";
  for (const auto& column : columns) out += ',' + format_fixed(std_of(column));
  out += '\n';
  return out;
}

std::string sweep_csv(SweepParameter parameter, const std::vector<int>& values,
                      const std::vector<Report>& reports) {
  if (values.size() != reports.size()) {
    throw std::invalid_argument("sweep_csv: value/report count mismatch");
  }
  std::string out =
      "parameter,value,mean_accuracy,std_accuracy,mean_accuracy_live,"
      "std_accuracy_live,seeds\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += sweep_parameter_name(parameter) + ',' + std::to_string(values[i]) +
           ',' + format_fixed(reports[i].mean_accuracy) + ',' +
           format_fixed(reports[i].std_accuracy) + ',' +
           format_fixed(reports[i].mean_accuracy_live) + ',' +
           format_fixed(reports[i].std_accuracy_live) + ',' +
           std::to_string(reports[i].seeds.size()) + '\n';
  }
  return out;
}

std::string trajectory_csv(const Report& report) {
  std::string out = "seed,window,accuracy\n";
  for (const SeedResult& seed : report.seeds) {
    for (std::size_t w = 0; w < seed.trajectory.size(); ++w) {
      out += std::to_string(seed.seed) + ',' + std::to_string(w) + ',' +
             format_fixed(seed.trajectory[w]) + '\n';
    }
  }
  return out;
}

void write_event_log(std::span<const EngineEvent> events, std::ostream& out) {
  for (const EngineEvent& event : events) {
    const nlohmann::json line{{"t", event.t},
                              {"stream", event.stream},
                              {"event", event.event},
                              {"payload", event.payload}};
    out << line.dump() << '\n';
  }
}

}  // namespace obal
