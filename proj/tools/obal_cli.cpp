/// obal — experiment runner for online multistream classification.
///
/// Subcommands:
///   run       evaluate one configuration over a list of seeds and write
///             the per-seed report CSV
///   sweep     repeat an experiment for every value of one engine
///             parameter and write the sweep CSV
///   generate  materialize a synthetic scenario as CSV files on disk
///   inspect   summarize an NDJSON event log
///
/// Every scenario and engine flag has a JSON twin with the same name;
/// `--config file.json` is merged after the flags, so the file overrides
/// whatever was given on the command line.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "obal/core.hpp"
#include "obal/eval.hpp"
#include "obal/streams.hpp"

namespace {

using nlohmann::json;

/// Raw flag storage. Only values the parser actually saw (count() > 0)
/// are forwarded into the experiment config, so the library defaults
/// stay authoritative.
struct Options {
  // scenario
  std::string generator;
  int n_sources = 0;
  std::int64_t samples = 0;
  std::vector<std::int64_t> change_points;
  std::uint64_t scenario_seed = 0;
  int dimension = 0;
  std::vector<double> sea_thetas;
  double label_noise = 0.0;
  int noisy_source = -1;
  double noisy_source_rate = 0.0;
  double gain_spread = 0.0;
  int gain_shifts = 0;

  // engine
  int window_length = 0;
  int i_max = 0;
  int pool_capacity = 0;
  int k_max = 0;
  double z_alpha = 0.0;
  std::string learner;

  // experiment
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::string config_path;
  std::string out_path;
  std::string events_path;
  std::string trajectory_path;

  // sweep
  std::string parameter;
  std::vector<int> values;

  // inspect
  std::string log_path;
};

/// Registers the flags shared by run, sweep and generate. Presence is
/// later queried through cmd->count("--name").
void add_experiment_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--generator", opt.generator,
                  "synthetic generator: sea, tree, rbf or hyperplane");
  cmd->add_option("--sources", opt.n_sources, "number of source streams");
  cmd->add_option("--samples", opt.samples, "instances per stream");
  cmd->add_option("--change-points", opt.change_points,
                  "concept-change positions in the generated stream")
      ->delimiter(',');
  cmd->add_option("--dimension", opt.dimension,
                  "feature count (0 = generator default)");
  cmd->add_option("--thetas", opt.sea_thetas,
                  "SEA threshold schedule, one value per concept segment")
      ->delimiter(',');
  cmd->add_option("--label-noise", opt.label_noise,
                  "label flip probability for the whole stream");
  cmd->add_option("--noisy-source", opt.noisy_source,
                  "index of one source whose labels are corrupted");
  cmd->add_option("--noisy-source-rate", opt.noisy_source_rate,
                  "corruption rate for --noisy-source");
  cmd->add_flag("--noisy-source-flip",
                "flip the noisy source's labels deterministically");
  cmd->add_flag("--no-standardize",
                "skip z-scoring the generated stream before the split");
  cmd->add_option("--gain-spread", opt.gain_spread,
                  "per-stream sensor gain spread in [0, 1)");
  cmd->add_option("--gain-shifts", opt.gain_shifts,
                  "staggered mid-stream gain redraws per source");

  cmd->add_option("--window-length", opt.window_length,
                  "sliding window length L_n");
  cmd->add_option("--i-max", opt.i_max, "re-weighting iterations I_max");
  cmd->add_option("--pool-capacity", opt.pool_capacity,
                  "retired-classifier pool capacity |P|");
  cmd->add_option("--k-max", opt.k_max,
                  "largest mixture size tried by the BIC fit");
  cmd->add_option("--z-alpha", opt.z_alpha,
                  "target drift detector z threshold");
  cmd->add_option("--learner", opt.learner,
                  "base learner: hoeffding_tree or naive_bayes");
  cmd->add_option("--variant", opt.variant,
                  "ablation variant: full, v1, v2 or v3");
  cmd->add_option("--config", opt.config_path,
                  "JSON config merged over the flags (the file wins)");
}

/// Builds the JSON document equivalent to the flags the user set.
/// `seed_is_scenario` distinguishes generate (--seed names the scenario
/// seed) from run/sweep (--seed lists the evaluation seeds).
json flags_to_json(const CLI::App& cmd, const Options& opt,
                   bool seed_is_scenario) {
  json scenario = json::object();
  if (cmd.count("--generator") != 0U) scenario["kind"] = opt.generator;
  if (cmd.count("--sources") != 0U) scenario["n_sources"] = opt.n_sources;
  if (cmd.count("--samples") != 0U) {
    scenario["samples_per_stream"] = opt.samples;
  }
  if (cmd.count("--thetas") != 0U) {
    scenario["sea_thetas"] = opt.sea_thetas;
  }
  if (cmd.count("--change-points") != 0U) {
    scenario["change_points"] = opt.change_points;
  }
  if (cmd.count("--dimension") != 0U) scenario["dimension"] = opt.dimension;
  if (cmd.count("--label-noise") != 0U) {
    scenario["label_noise"] = opt.label_noise;
  }
  if (cmd.count("--noisy-source") != 0U) {
    scenario["noisy_source"] = opt.noisy_source;
  }
  if (cmd.count("--noisy-source-rate") != 0U) {
    scenario["noisy_source_rate"] = opt.noisy_source_rate;
  }
  if (cmd.count("--noisy-source-flip") != 0U) {
    scenario["noisy_source_flip"] = true;
  }
  if (cmd.count("--no-standardize") != 0U) scenario["standardize"] = false;
  if (cmd.count("--gain-spread") != 0U) {
    scenario["stream_gain_spread"] = opt.gain_spread;
  }
  if (cmd.count("--gain-shifts") != 0U) {
    scenario["source_gain_shifts"] = opt.gain_shifts;
  }
  if (seed_is_scenario && cmd.count("--seed") != 0U) {
    scenario["seed"] = opt.scenario_seed;
  }

  json engine = json::object();
  if (cmd.count("--window-length") != 0U) {
    engine["window_length"] = opt.window_length;
  }
  if (cmd.count("--i-max") != 0U) engine["i_max"] = opt.i_max;
  if (cmd.count("--pool-capacity") != 0U) {
    engine["pool_capacity"] = opt.pool_capacity;
  }
  if (cmd.count("--k-max") != 0U) engine["k_max"] = opt.k_max;
  if (cmd.count("--z-alpha") != 0U) engine["z_alpha"] = opt.z_alpha;
  if (cmd.count("--learner") != 0U) engine["learner"] = opt.learner;

  json doc = json::object();
  if (!scenario.empty()) doc["scenario"] = scenario;
  if (!engine.empty()) doc["engine"] = engine;
  if (cmd.count("--variant") != 0U) doc["variant"] = opt.variant;
  if (!seed_is_scenario && cmd.count("--seed") != 0U) {
    doc["seeds"] = opt.seeds;
  }
  return doc;
}

/// Defaults, then the flags, then the config file: the file overrides.
obal::ExperimentConfig build_config(const CLI::App& cmd, const Options& opt,
                                    bool seed_is_scenario = false) {
  obal::ExperimentConfig config;
  obal::merge_experiment_json(config, flags_to_json(cmd, opt, seed_is_scenario));
  if (cmd.count("--config") != 0U) {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) {
      throw std::runtime_error("cannot open config file " + opt.config_path);
    }
    obal::merge_experiment_json(config, json::parse(in));
  }
  return config;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

int run_command(const CLI::App& cmd, const Options& opt) {
  const obal::ExperimentConfig config = build_config(cmd, opt);
  std::vector<obal::EngineEvent> events;
  const bool want_events = cmd.count("--events") != 0U;
  const obal::Report report =
      obal::run_experiment(config, want_events ? &events : nullptr);
  write_text(opt.out_path, obal::report_csv(report));
  if (want_events) {
    std::ofstream out(opt.events_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + opt.events_path);
    obal::write_event_log(events, out);
  }
  if (cmd.count("--trajectory") != 0U) {
    write_text(opt.trajectory_path, obal::trajectory_csv(report));
  }

  std::size_t source_drifts = 0;
  std::size_t target_drifts = 0;
  for (const obal::SeedResult& seed : report.seeds) {
    source_drifts += seed.source_drifts;
    target_drifts += seed.target_drifts;
  }
  std::printf("%s %s: %zu seeds, accuracy %.2f +/- %.2f (live %.2f +/- %.2f)\n",
              obal::generator_kind_name(config.scenario.kind).c_str(),
              obal::variant_name(report.variant).c_str(), report.seeds.size(),
              report.mean_accuracy, report.std_accuracy,
              report.mean_accuracy_live, report.std_accuracy_live);
  std::printf("drift events: %zu source, %zu target\n", source_drifts,
              target_drifts);
  std::printf("wrote %s\n", opt.out_path.c_str());
  return 0;
}

int sweep_command(const CLI::App& cmd, const Options& opt) {
  const obal::ExperimentConfig config = build_config(cmd, opt);
  const obal::SweepParameter parameter =
      obal::parse_sweep_parameter(opt.parameter);
  const std::vector<obal::Report> reports =
      obal::parameter_sweep(config, parameter, opt.values);
  write_text(opt.out_path, obal::sweep_csv(parameter, opt.values, reports));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::printf("%s=%d: accuracy %.2f +/- %.2f\n",
                obal::sweep_parameter_name(parameter).c_str(), opt.values[i],
                reports[i].mean_accuracy, reports[i].std_accuracy);
  }
  std::printf("wrote %s\n", opt.out_path.c_str());
  return 0;
}

/// One stream as CSV: timestamp, features with full double precision and,
/// for sources, the label.
void write_stream_csv(const std::filesystem::path& path,
                      const std::vector<obal::Instance>& rows, int dimension,
                      bool with_label) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t";
  for (int k = 0; k < dimension; ++k) out << ",x" << k;
  if (with_label) out << ",label";
  out << "\n";
  char buffer[40];
  for (const obal::Instance& row : rows) {
    out << row.timestamp;
    for (double value : row.features) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", value);
      out << ',' << buffer;
    }
    if (with_label) out << ',' << *row.label;
    out << "\n";
  }
}

int generate_command(const CLI::App& cmd, const Options& opt) {
  const obal::ExperimentConfig config =
      build_config(cmd, opt, /*seed_is_scenario=*/true);
  const obal::Multistream stream = obal::build_scenario(config.scenario);

  const std::filesystem::path dir(opt.out_path);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < stream.sources.size(); ++i) {
    write_stream_csv(dir / ("source_" + std::to_string(i) + ".csv"),
                     stream.sources[i], stream.dimension, true);
  }
  write_stream_csv(dir / "target.csv", stream.target, stream.dimension, false);

  // Held-out target labels live in their own file; the evaluator is the
  // only consumer.
  {
    std::ofstream out(dir / "target_labels.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write target_labels.csv");
    out << "t,label\n";
    for (std::size_t i = 0; i < stream.target.size(); ++i) {
      out << stream.target[i].timestamp << ','
          << stream.held_out_target_labels[i] << "\n";
    }
  }
  write_text((dir / "scenario.json").string(),
             config.to_json().at("scenario").dump(2) + "\n");

  std::printf("%s scenario: %zu sources + target, d=%d, %d classes\n",
              obal::generator_kind_name(config.scenario.kind).c_str(),
              stream.sources.size(), stream.dimension, stream.class_count);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int inspect_command(const Options& opt) {
  std::ifstream in(opt.log_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + opt.log_path);

  std::map<std::string, std::size_t> by_event;
  std::map<std::string, std::size_t> by_stream;
  std::size_t records = 0;
  std::size_t stale = 0;
  std::int64_t t_min = std::numeric_limits<std::int64_t>::max();
  std::int64_t t_max = std::numeric_limits<std::int64_t>::min();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& error) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               error.what());
    }
    ++records;
    const std::string event = record.at("event").get<std::string>();
    by_event[event] += 1;
    by_stream[record.at("stream").get<std::string>()] += 1;
    const std::int64_t t = record.at("t").get<std::int64_t>();
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
    if (event == "prediction" &&
        record.at("payload").value("stale", false)) {
      ++stale;
    }
  }

  if (records == 0) {
    std::printf("%s: empty log\n", opt.log_path.c_str());
    return 0;
  }
  std::printf("%s: %zu records, t %lld..%lld\n", opt.log_path.c_str(), records,
              static_cast<long long>(t_min), static_cast<long long>(t_max));
  std::printf("by event:\n");
  for (const auto& [event, count] : by_event) {
    if (event == "prediction") {
      std::printf("  %-13s %8zu  (%zu stale)\n", event.c_str(), count, stale);
    } else {
      std::printf("  %-13s %8zu\n", event.c_str(), count);
    }
  }
  std::printf("by stream:\n");
  for (const auto& [stream, count] : by_stream) {
    std::printf("  %-13s %8zu\n", stream.c_str(), count);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online multistream classification with covariance alignment "
               "and asynchronous drift adaptation"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* run =
      app.add_subcommand("run", "evaluate one configuration over seeds");
  add_experiment_flags(run, opt);
  run->add_option("--seed", opt.seeds, "seeds to run (comma separated)")
      ->required()
      ->delimiter(',');
  run->add_option("--out", opt.out_path, "report CSV path")->required();
  run->add_option("--events", opt.events_path,
                  "also write the NDJSON event log here");
  run->add_option("--trajectory", opt.trajectory_path,
                  "also write the per-window accuracy CSV here");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "repeat the experiment across one parameter grid");
  add_experiment_flags(sweep, opt);
  sweep->add_option("--seed", opt.seeds, "seeds per grid point")
      ->delimiter(',');
  sweep
      ->add_option("--parameter", opt.parameter,
                   "window_length, i_max or pool_capacity")
      ->required();
  sweep->add_option("--values", opt.values, "grid values (comma separated)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out", opt.out_path, "sweep CSV path")->required();

  CLI::App* generate =
      app.add_subcommand("generate", "write a scenario to disk as CSV files");
  add_experiment_flags(generate, opt);
  generate->add_option("--seed", opt.scenario_seed, "scenario seed");
  generate->add_option("--out", opt.out_path, "output directory")->required();

  CLI::App* inspect =
      app.add_subcommand("inspect", "summarize an NDJSON event log");
  inspect->add_option("log", opt.log_path, "event log path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(*run, opt);
    if (sweep->parsed()) return sweep_command(*sweep, opt);
    if (generate->parsed()) return generate_command(*generate, opt);
    return inspect_command(opt);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
}
