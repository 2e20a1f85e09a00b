#pragma once

// Command-line front end: synth, run, sweep, theory, eval.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mc2g/harness.hpp"
#include "mc2g/io.hpp"
#include "mc2g/theory.hpp"

namespace mc2g {

namespace detail {

// Usage problems detected after CLI11 parsing (exit 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

inline double resolve_p(const ModelSpec& spec, std::optional<double> p, std::optional<double> ratio) {
  if (p && ratio) throw UsageError("--p and --ratio are mutually exclusive");
  if (p) {
    if (!(*p >= 0.0 && *p <= 1.0)) throw UsageError("--p must lie in [0, 1]");
    return *p;
  }
  if (!ratio) throw UsageError("one of --p or --ratio is required");
  const auto report = threshold_report(spec, 0.0);
  return p_for_ratio(*ratio, report.threshold_eps0, spec.n_users, spec.n_items);
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

inline ExperimentConfig load_config_or_usage(const std::string& path) {
  try {
    return load_config(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Matrix completion with two graphs: synthesis, recovery pipeline, sweeps and theory", "mc2g"};
  app.require_subcommand(1);

  std::string config_path, out_path, instance_dir, split_mode, ablation, labels_out, trials_out, truth_dir, est_dir;
  std::optional<double> p, ratio;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  int jobs = 0;
  double eps = 0.0;

  auto* synth = app.add_subcommand("synth", "Generate an instance and write it to a directory");
  synth->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--p", p, "Sample probability");
  synth->add_option("--ratio", ratio, "Normalized sample complexity (alternative to --p)");
  synth->add_option("--seed", seed, "Instance seed (default: config seed)");
  synth->add_option("--out", out_path, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run the pipeline on one instance");
  run->add_option("--config", config_path, "Experiment config JSON (model and pipeline options)")->check(CLI::ExistingFile);
  run->add_option("--instance", instance_dir, "Instance directory written by synth")->check(CLI::ExistingDirectory);
  run->add_option("--p", p, "Sample probability for a synthesized instance");
  run->add_option("--ratio", ratio, "Normalized sample complexity for a synthesized instance");
  run->add_option("--seed", seed, "Instance seed for a synthesized instance (default: config seed)");
  run->add_option("--split", split_mode, "Information split mode")->check(CLI::IsMember({"analyzed", "simplified"}));
  run->add_option("--ablation", ablation, "Graphs used")->check(CLI::IsMember({"both-graphs", "social-only", "item-only", "no-graph"}));
  run->add_option("--out", out_path, "TrialResult JSON path (default: stdout)");
  run->add_option("--labels-out", labels_out, "Directory for estimated labels and nominal matrix");

  auto* sw = app.add_subcommand("sweep", "Run a full experiment from a config file");
  sw->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--jobs", jobs, "Worker threads (default: MC2G_JOBS or hardware concurrency)")->check(CLI::NonNegativeNumber);
  sw->add_option("--out", out_path, "Results CSV path (default: config output.csv, else stdout)");
  sw->add_option("--trials-out", trials_out, "Per-trial CSV path");
  sw->add_option("--seed", seed, "Base seed override");
  sw->add_option("--trials", trials, "Trials per grid point override")->check(CLI::PositiveNumber);
  sw->add_option("--split", split_mode, "Information split mode")->check(CLI::IsMember({"analyzed", "simplified"}));
  sw->add_option("--ablation", ablation, "Graphs used")->check(CLI::IsMember({"both-graphs", "social-only", "item-only", "no-graph"}));

  auto* th = app.add_subcommand("theory", "Print the threshold report for a config");
  th->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  th->add_option("--p", p, "Sample probability (default 0)");
  th->add_option("--eps", eps, "Slack in the threshold brackets")->check(CLI::Range(0.0, 1.0));
  th->add_option("--out", out_path, "JSON path (default: stdout)");

  auto* ev = app.add_subcommand("eval", "Compare estimated labels and nominal matrix against the truth");
  ev->add_option("--truth", truth_dir, "Directory with user_labels.txt, item_labels.txt, nominal.json")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--est", est_dir, "Directory with the same files for the estimate")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", out_path, "JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run 'mc2g --help' for usage\n";
    return 2;
  }

  try {
    auto apply_modes = [&](PipelineOptions& o) {
      if (!split_mode.empty()) o.split = parse_split_mode(split_mode);
      if (!ablation.empty()) o.ablation = parse_ablation(ablation);
    };

    if (synth->parsed()) {
      const auto cfg = detail::load_config_or_usage(config_path);
      const auto spec = model_spec(cfg);
      const double prob = detail::resolve_p(spec, p, ratio);
      const auto inst = generate_instance(spec, prob, seed.value_or(cfg.seed));
      save_instance(out_path, inst);
      out << "wrote instance to " << out_path << " (p = " << format_number(prob) << ", " << inst.observation.size()
          << " ratings)\n";
      return 0;
    }

    if (run->parsed()) {
      if (config_path.empty() && instance_dir.empty()) throw detail::UsageError("run needs --config or --instance");
      std::optional<ExperimentConfig> cfg;
      if (!config_path.empty()) cfg = detail::load_config_or_usage(config_path);
      GeneratedInstance inst;
      if (!instance_dir.empty()) {
        if (p || ratio || seed) throw detail::UsageError("--p, --ratio and --seed apply to synthesized instances only");
        inst = load_instance(instance_dir);
      } else {
        const auto spec = model_spec(*cfg);
        inst = generate_instance(spec, detail::resolve_p(spec, p, ratio), seed.value_or(cfg->seed));
      }
      PipelineOptions opts = cfg ? cfg->pipeline : PipelineOptions{};
      apply_modes(opts);
      const auto result = run_pipeline(inst, opts);
      auto trial = evaluate_trial(inst, result);
      try {
        const auto report = threshold_report(inst.spec, inst.p);
        if (!std::isnan(report.normalized_complexity)) trial.ratio = report.normalized_complexity;
      } catch (const Error&) {
      }
      if (!labels_out.empty()) {
        std::filesystem::create_directories(labels_out);
        save_labels(std::filesystem::path(labels_out) / "user_labels.txt", result.users);
        save_labels(std::filesystem::path(labels_out) / "item_labels.txt", result.items);
        save_nominal(std::filesystem::path(labels_out) / "nominal.json", result.nominal, inst.spec.alphabet);
      }
      auto j = to_json(trial, true);
      j["ablation"] = std::string(to_string(opts.ablation));
      j["split"] = std::string(to_string(opts.split));
      j["refine_rounds_run"] = result.rounds_run;
      detail::write_text(out_path, j.dump(2) + "\n", out);
      return 0;
    }

    if (sw->parsed()) {
      auto cfg = detail::load_config_or_usage(config_path);
      if (seed) cfg.seed = *seed;
      if (trials) cfg.trials = *trials;
      apply_modes(cfg.pipeline);
      if (!out_path.empty()) cfg.csv_path = out_path;
      if (!trials_out.empty()) cfg.trials_csv_path = trials_out;
      const unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : default_jobs();
      std::ofstream csv_file, trials_file;
      SweepSinks sinks;
      if (cfg.csv_path.empty() || cfg.csv_path == "-") {
        sinks.csv = &out;
      } else {
        csv_file.open(cfg.csv_path);
        if (!csv_file) throw Error("cannot write " + cfg.csv_path);
        sinks.csv = &csv_file;
      }
      if (!cfg.trials_csv_path.empty()) {
        trials_file.open(cfg.trials_csv_path);
        if (!trials_file) throw Error("cannot write " + cfg.trials_csv_path);
        sinks.trials = &trials_file;
      }
      sweep(cfg, workers, sinks);
      return 0;
    }

    if (th->parsed()) {
      const auto cfg = detail::load_config_or_usage(config_path);
      const auto report = threshold_report(model_spec(cfg), p.value_or(0.0), eps);
      detail::write_text(out_path, to_json(report).dump(2) + "\n", out);
      return 0;
    }

    if (ev->parsed()) {
      const std::filesystem::path t(truth_dir), e(est_dir);
      const auto nt = load_nominal(t / "nominal.json");
      const auto ne = load_nominal(e / "nominal.json");
      if (!std::ranges::equal(nt.alphabet.values(), ne.alphabet.values())) throw Error("eval: alphabets differ");
      const auto ut = load_labels(t / "user_labels.txt", nt.k1), it = load_labels(t / "item_labels.txt", nt.k2);
      const auto ue = load_labels(e / "user_labels.txt", ne.k1), ie = load_labels(e / "item_labels.txt", ne.k2);
      const NominalMatrix truth(nt.blocks, ut, it, nt.alphabet.size());
      const NominalMatrix est(ne.blocks, ue, ie, ne.alphabet.size());
      nlohmann::json j{{"user_error", misclassification_proportion(ue, ut).proportion},
                       {"item_error", misclassification_proportion(ie, it).proportion},
                       {"mae", evaluate_mae(est, truth, nt.alphabet)}};
      detail::write_text(out_path, j.dump(2) + "\n", out);
      return 0;
    }
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << "\n";
    err << "run 'mc2g --help' for usage\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mc2g
