#pragma once

// End-to-end pipeline, trial evaluation and parameter sweeps.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mc2g/ablation.hpp"
#include "mc2g/core.hpp"
#include "mc2g/estimation.hpp"
#include "mc2g/genmodel.hpp"
#include "mc2g/io.hpp"
#include "mc2g/refinement.hpp"
#include "mc2g/spectral.hpp"
#include "mc2g/splitting.hpp"
#include "mc2g/theory.hpp"

namespace mc2g {

enum class Ablation { kBothGraphs, kSocialOnly, kItemOnly, kNoGraph };
enum class Reconstruction { kArgmax, kMajority };

inline Ablation parse_ablation(std::string_view s) {
  if (s == "both-graphs" || s == "both") return Ablation::kBothGraphs;
  if (s == "social-only") return Ablation::kSocialOnly;
  if (s == "item-only") return Ablation::kItemOnly;
  if (s == "no-graph") return Ablation::kNoGraph;
  throw Error("unknown ablation '" + std::string(s) + "' (expected both-graphs, social-only, item-only or no-graph)");
}

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kBothGraphs: return "both-graphs";
    case Ablation::kSocialOnly: return "social-only";
    case Ablation::kItemOnly: return "item-only";
    case Ablation::kNoGraph: return "no-graph";
  }
  return "both-graphs";
}

inline Reconstruction parse_reconstruction(std::string_view s) {
  if (s == "argmax") return Reconstruction::kArgmax;
  if (s == "majority") return Reconstruction::kMajority;
  throw Error("unknown reconstruction '" + std::string(s) + "' (expected argmax or majority)");
}

struct PipelineOptions {
  SplitMode split = SplitMode::kSimplified;
  std::optional<double> split_probability;  // default 1/sqrt(ln n) per graph
  // 1 is the single frozen-snapshot pass; more rounds feed refined labels back.
  int refine_rounds = 1;
  Ablation ablation = Ablation::kBothGraphs;
  Reconstruction reconstruction = Reconstruction::kArgmax;
  EstimationOptions estimation;
  SpectralConfig spectral;
};

struct StageTimes {
  double split = 0.0;
  double weak_recovery = 0.0;
  double estimation = 0.0;
  double refinement = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

struct PipelineOutput {
  ClusterLabels initial_users;
  ClusterLabels initial_items;
  ClusterLabels users;
  ClusterLabels items;
  NominalMatrix nominal;
  ModelEstimates estimates;
  int rounds_run = 0;
  StageTimes times;
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(double& slot) : slot_(slot), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() { slot_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& slot_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

/// Split, weak recovery, estimation, refinement and reconstruction on the
/// observable part of an instance. Hidden truth is never read.
inline PipelineOutput run_pipeline(const RatingObservation& obs, const SimpleGraph& user_graph, const SimpleGraph& item_graph,
                                   int k1, int k2, const RatingAlphabet& alphabet, const PipelineOptions& opts,
                                   std::uint64_t seed) {
  if (opts.refine_rounds < 1 || opts.refine_rounds > 5) throw Error("run_pipeline: refine_rounds must be in [1, 5]");
  const auto total_start = std::chrono::steady_clock::now();
  PipelineOutput out;
  const bool use_user_graph = opts.ablation == Ablation::kBothGraphs || opts.ablation == Ablation::kSocialOnly;
  const bool use_item_graph = opts.ablation == Ablation::kBothGraphs || opts.ablation == Ablation::kItemOnly;

  SplitGraphs su, si;
  {
    detail::StageTimer t(out.times.split);
    detail::in_stage("split", [&] {
      auto split = [&](const SimpleGraph& g, bool used, std::uint64_t tag) {
        if (!used) return identity_split(SimpleGraph::empty(g.num_nodes()));
        if (opts.split == SplitMode::kSimplified) return identity_split(g);
        return split_graph(g, opts.split_probability, derive_seed(seed, tag));
      };
      su = split(user_graph, use_user_graph, stream::kSplitUser);
      si = split(item_graph, use_item_graph, stream::kSplitItem);
      return 0;
    });
  }

  {
    detail::StageTimer t(out.times.weak_recovery);
    detail::in_stage("weak recovery", [&] {
      const KMeansOptions km{opts.spectral.kmeans_restarts, opts.spectral.kmeans_max_iter};
      std::optional<ClusterLabels> users, items;
      if (use_user_graph) {
        auto cfg = opts.spectral;
        cfg.seed = derive_seed(seed, stream::kSpectralUser);
        users = spectral_cluster(su.part_a, k1, cfg);
      }
      if (use_item_graph) {
        auto cfg = opts.spectral;
        cfg.seed = derive_seed(seed, stream::kSpectralItem);
        items = spectral_cluster(si.part_a, k2, cfg);
      }
      if (!users) users = profile_cluster(obs, Side::kUsers, k1, alphabet, items, km, derive_seed(seed, stream::kSpectralUser));
      if (!items) items = profile_cluster(obs, Side::kItems, k2, alphabet, users, km, derive_seed(seed, stream::kSpectralItem));
      out.initial_users = std::move(*users);
      out.initial_items = std::move(*items);
      return 0;
    });
  }

  ClusterLabels cur_users = out.initial_users;
  ClusterLabels cur_items = out.initial_items;
  for (int round = 0; round < opts.refine_rounds; ++round) {
    {
      detail::StageTimer t(out.times.estimation);
      out.estimates = detail::in_stage("estimation", [&] {
        return estimate_model(obs, su.part_b, si.part_b, cur_users, cur_items, alphabet.size(), opts.estimation);
      });
    }
    std::pair<ClusterLabels, ClusterLabels> refined;
    {
      detail::StageTimer t(out.times.refinement);
      refined = detail::in_stage("refinement", [&] {
        return refine_all(obs, su.part_b, si.part_b, cur_users, cur_items, out.estimates);
      });
    }
    out.rounds_run = round + 1;
    const bool stable = refined.first == cur_users && refined.second == cur_items;
    out.users = std::move(refined.first);
    out.items = std::move(refined.second);
    if (stable || round + 1 == opts.refine_rounds) break;
    cur_users = out.users;
    cur_items = out.items;
  }

  {
    detail::StageTimer t(out.times.reconstruction);
    out.nominal = detail::in_stage("reconstruction", [&] {
      return opts.reconstruction == Reconstruction::kArgmax
                 ? reconstruct_nominal_argmax(out.users, out.items, out.estimates)
                 : reconstruct_nominal_majority(out.users, out.items, obs, alphabet.size());
    });
  }
  out.times.total = std::chrono::duration<double>(std::chrono::steady_clock::now() - total_start).count();
  return out;
}

inline PipelineOutput run_pipeline(const GeneratedInstance& inst, const PipelineOptions& opts) {
  return run_pipeline(inst.observation, inst.user_graph, inst.item_graph, inst.spec.k1, inst.spec.k2, inst.spec.alphabet, opts,
                      derive_seed(inst.seed, stream::kPipeline));
}

/// Mean absolute difference of the expanded matrices on raw rating values.
/// Computed from block confusion counts in O(n + m + k^4).
inline double evaluate_mae(const NominalMatrix& est, const NominalMatrix& truth, const RatingAlphabet& alphabet) {
  if (est.n_users() != truth.n_users() || est.n_items() != truth.n_items()) throw Error("evaluate_mae: dimension mismatch");
  const std::size_t n = est.n_users(), m = est.n_items();
  if (n == 0 || m == 0) return 0.0;
  const auto k1e = static_cast<std::size_t>(est.k1()), k1t = static_cast<std::size_t>(truth.k1());
  const auto k2e = static_cast<std::size_t>(est.k2()), k2t = static_cast<std::size_t>(truth.k2());
  std::vector<double> cu(k1e * k1t, 0.0), ci(k2e * k2t, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cu[static_cast<std::size_t>(est.user_labels()[i]) * k1t + static_cast<std::size_t>(truth.user_labels()[i])] += 1.0;
  }
  for (std::size_t j = 0; j < m; ++j) {
    ci[static_cast<std::size_t>(est.item_labels()[j]) * k2t + static_cast<std::size_t>(truth.item_labels()[j])] += 1.0;
  }
  double total = 0.0;
  for (std::size_t ae = 0; ae < k1e; ++ae) {
    for (std::size_t at = 0; at < k1t; ++at) {
      const double nu = cu[ae * k1t + at];
      if (nu == 0.0) continue;
      for (std::size_t be = 0; be < k2e; ++be) {
        for (std::size_t bt = 0; bt < k2t; ++bt) {
          const double ni = ci[be * k2t + bt];
          if (ni == 0.0) continue;
          const int ve = alphabet.value(est.block(static_cast<int>(ae), static_cast<int>(be)));
          const int vt = alphabet.value(truth.block(static_cast<int>(at), static_cast<int>(bt)));
          total += nu * ni * std::abs(ve - vt);
        }
      }
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(m));
}

struct TrialResult {
  std::uint64_t seed = 0;
  double p = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double user_error = 0.0;
  double item_error = 0.0;
  bool success = false;  // both label sets and the nominal matrix exact
  double mae = 0.0;
  StageTimes times;
};

inline TrialResult evaluate_trial(const GeneratedInstance& inst, const PipelineOutput& out) {
  TrialResult r;
  r.seed = inst.seed;
  r.p = inst.p;
  r.user_error = misclassification_proportion(out.users, inst.user_labels).proportion;
  r.item_error = misclassification_proportion(out.items, inst.item_labels).proportion;
  r.mae = evaluate_mae(out.nominal, inst.nominal, inst.spec.alphabet);
  r.success = r.user_error == 0.0 && r.item_error == 0.0 && r.mae == 0.0;
  r.times = out.times;
  return r;
}

inline nlohmann::json to_json(const StageTimes& t) {
  return {{"split", t.split}, {"weak_recovery", t.weak_recovery}, {"estimation", t.estimation},
          {"refinement", t.refinement}, {"reconstruction", t.reconstruction}, {"total", t.total}};
}

inline nlohmann::json to_json(const TrialResult& r, bool with_times) {
  nlohmann::json j{{"seed", r.seed}, {"p", r.p}, {"user_error", r.user_error}, {"item_error", r.item_error},
                   {"success", r.success}, {"mae", r.mae}};
  j["ratio"] = std::isnan(r.ratio) ? nlohmann::json(nullptr) : nlohmann::json(r.ratio);
  if (with_times) j["times"] = to_json(r.times);
  return j;
}

// ---------------------------------------------------------------------------
// Experiment configuration. Every default lives in these initializers and is
// documented in docs/config.md.

struct GraphConfig {
  std::optional<double> quality;  // I; needs beta_coeff
  double beta_coeff = 0.25;
  std::optional<double> alpha;    // explicit two-valued probabilities
  std::optional<double> beta;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t n_users = 2000;
  std::size_t n_items = 1000;
  int k1 = 3;
  int k2 = 4;
  std::vector<int> alphabet{1, 2, 3, 4, 5};
  std::vector<std::vector<int>> nominal{{5, 1, 4, 2}, {2, 4, 5, 1}, {3, 2, 5, 5}};
  std::optional<double> personalization_keep = 0.6;
  std::optional<std::vector<std::vector<double>>> personalization_matrix;
  GraphConfig user_graph{2.0, 0.25, std::nullopt, std::nullopt};
  GraphConfig item_graph{2.0, 0.25, std::nullopt, std::nullopt};

  enum class Axis { kRatio, kP } axis = Axis::kRatio;
  std::vector<double> grid{0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  int trials = 50;
  std::uint64_t seed = 1;
  PipelineOptions pipeline;
  std::string csv_path;         // empty: stdout
  std::string trials_csv_path;  // optional per-trial rows
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw Error("config: unknown key '" + it.key() + "' in " + where);
  }
}

inline GraphConfig graph_config_from_json(const nlohmann::json& j, const GraphConfig& defaults, const std::string& where) {
  reject_unknown(j, {"quality", "beta_coeff", "alpha", "beta"}, where);
  GraphConfig g = defaults;
  if (j.contains("alpha") || j.contains("beta")) {
    g.quality.reset();
    g.alpha = j.at("alpha").get<double>();
    g.beta = j.at("beta").get<double>();
  }
  if (j.contains("quality")) {
    g.quality = j.at("quality").get<double>();
    g.alpha.reset();
    g.beta.reset();
  }
  if (j.contains("beta_coeff")) g.beta_coeff = j.at("beta_coeff").get<double>();
  return g;
}

inline nlohmann::json graph_config_to_json(const GraphConfig& g) {
  nlohmann::json j;
  if (g.quality) {
    j["quality"] = *g.quality;
    j["beta_coeff"] = g.beta_coeff;
  } else {
    j["alpha"] = g.alpha.value_or(0.0);
    j["beta"] = g.beta.value_or(0.0);
  }
  return j;
}

inline ConnectivityMatrix build_conn(const GraphConfig& g, std::size_t n, int k) {
  if (g.quality) return symmetric_conn_from_quality(n, k, *g.quality, g.beta_coeff);
  if (!g.alpha || !g.beta) throw Error("config: graph needs either quality or alpha and beta");
  return ConnectivityMatrix::two_valued(k, *g.alpha, *g.beta);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    detail::reject_unknown(j, {"name", "model", "sweep", "trials", "seed", "pipeline", "output"}, "top level");
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      detail::reject_unknown(m, {"n_users", "n_items", "k1", "k2", "alphabet", "nominal", "personalization", "user_graph", "item_graph"}, "model");
      if (m.contains("n_users")) c.n_users = m.at("n_users").get<std::size_t>();
      if (m.contains("n_items")) c.n_items = m.at("n_items").get<std::size_t>();
      if (m.contains("k1")) c.k1 = m.at("k1").get<int>();
      if (m.contains("k2")) c.k2 = m.at("k2").get<int>();
      if (m.contains("alphabet")) c.alphabet = m.at("alphabet").get<std::vector<int>>();
      if (m.contains("nominal")) c.nominal = m.at("nominal").get<std::vector<std::vector<int>>>();
      if (m.contains("personalization")) {
        const auto& p = m.at("personalization");
        detail::reject_unknown(p, {"keep", "matrix"}, "model.personalization");
        if (p.contains("matrix")) {
          c.personalization_matrix = p.at("matrix").get<std::vector<std::vector<double>>>();
          c.personalization_keep.reset();
        }
        if (p.contains("keep")) {
          c.personalization_keep = p.at("keep").get<double>();
          c.personalization_matrix.reset();
        }
      }
      if (m.contains("user_graph")) c.user_graph = detail::graph_config_from_json(m.at("user_graph"), c.user_graph, "model.user_graph");
      if (m.contains("item_graph")) c.item_graph = detail::graph_config_from_json(m.at("item_graph"), c.item_graph, "model.item_graph");
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      detail::reject_unknown(s, {"axis", "values"}, "sweep");
      if (s.contains("axis")) {
        const auto axis = s.at("axis").get<std::string>();
        if (axis == "ratio") c.axis = ExperimentConfig::Axis::kRatio;
        else if (axis == "p") c.axis = ExperimentConfig::Axis::kP;
        else throw Error("config: sweep.axis must be 'ratio' or 'p'");
      }
      if (s.contains("values")) c.grid = s.at("values").get<std::vector<double>>();
    }
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("pipeline")) {
      const auto& p = j.at("pipeline");
      detail::reject_unknown(p, {"split", "split_probability", "refine_rounds", "ablation", "reconstruction", "smoothing", "clamp", "spectral"}, "pipeline");
      auto& o = c.pipeline;
      if (p.contains("split")) o.split = parse_split_mode(p.at("split").get<std::string>());
      if (p.contains("split_probability") && !p.at("split_probability").is_null()) o.split_probability = p.at("split_probability").get<double>();
      if (p.contains("refine_rounds")) o.refine_rounds = p.at("refine_rounds").get<int>();
      if (p.contains("ablation")) o.ablation = parse_ablation(p.at("ablation").get<std::string>());
      if (p.contains("reconstruction")) o.reconstruction = parse_reconstruction(p.at("reconstruction").get<std::string>());
      if (p.contains("smoothing")) o.estimation.smoothing = p.at("smoothing").get<double>();
      if (p.contains("clamp")) o.estimation.clamp = p.at("clamp").get<bool>();
      if (p.contains("spectral")) {
        const auto& s = p.at("spectral");
        detail::reject_unknown(s, {"eig_tol", "eig_max_iter", "kmeans_restarts", "kmeans_max_iter", "trim", "trim_factor"}, "pipeline.spectral");
        if (s.contains("eig_tol")) o.spectral.eig_tol = s.at("eig_tol").get<double>();
        if (s.contains("eig_max_iter")) o.spectral.eig_max_iter = s.at("eig_max_iter").get<int>();
        if (s.contains("kmeans_restarts")) o.spectral.kmeans_restarts = s.at("kmeans_restarts").get<int>();
        if (s.contains("kmeans_max_iter")) o.spectral.kmeans_max_iter = s.at("kmeans_max_iter").get<int>();
        if (s.contains("trim")) o.spectral.trim = s.at("trim").get<bool>();
        if (s.contains("trim_factor")) o.spectral.trim_factor = s.at("trim_factor").get<double>();
      }
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      detail::reject_unknown(o, {"csv", "trials_csv"}, "output");
      if (o.contains("csv")) c.csv_path = o.at("csv").get<std::string>();
      if (o.contains("trials_csv")) c.trials_csv_path = o.at("trials_csv").get<std::string>();
    }
    if (c.grid.empty()) throw Error("config: sweep grid is empty");
    if (c.trials < 1) throw Error("config: trials must be at least 1");
    c.pipeline.spectral.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json personalization;
  if (c.personalization_matrix) personalization["matrix"] = *c.personalization_matrix;
  else personalization["keep"] = c.personalization_keep.value_or(0.0);
  const auto& o = c.pipeline;
  nlohmann::json pipeline{{"split", std::string(to_string(o.split))},
                          {"refine_rounds", o.refine_rounds},
                          {"ablation", std::string(to_string(o.ablation))},
                          {"reconstruction", o.reconstruction == Reconstruction::kArgmax ? "argmax" : "majority"},
                          {"smoothing", o.estimation.smoothing},
                          {"clamp", o.estimation.clamp},
                          {"spectral", {{"eig_tol", o.spectral.eig_tol}, {"eig_max_iter", o.spectral.eig_max_iter},
                                        {"kmeans_restarts", o.spectral.kmeans_restarts}, {"kmeans_max_iter", o.spectral.kmeans_max_iter},
                                        {"trim", o.spectral.trim}, {"trim_factor", o.spectral.trim_factor}}}};
  pipeline["split_probability"] = o.split_probability ? nlohmann::json(*o.split_probability) : nlohmann::json(nullptr);
  nlohmann::json output{{"csv", c.csv_path}};
  if (!c.trials_csv_path.empty()) output["trials_csv"] = c.trials_csv_path;
  return {{"name", c.name},
          {"model", {{"n_users", c.n_users}, {"n_items", c.n_items}, {"k1", c.k1}, {"k2", c.k2}, {"alphabet", c.alphabet},
                     {"nominal", c.nominal}, {"personalization", personalization},
                     {"user_graph", detail::graph_config_to_json(c.user_graph)},
                     {"item_graph", detail::graph_config_to_json(c.item_graph)}}},
          {"sweep", {{"axis", c.axis == ExperimentConfig::Axis::kRatio ? "ratio" : "p"}, {"values", c.grid}}},
          {"trials", c.trials},
          {"seed", c.seed},
          {"pipeline", pipeline},
          {"output", output}};
}

inline ModelSpec model_spec(const ExperimentConfig& c) {
  ModelSpec s;
  s.n_users = c.n_users;
  s.n_items = c.n_items;
  s.k1 = c.k1;
  s.k2 = c.k2;
  if (c.k1 < 2 || c.k2 < 2) throw Error("config: k1 and k2 must be at least 2");
  s.alphabet = RatingAlphabet(c.alphabet);
  nlohmann::json nominal = c.nominal;
  s.nominal_blocks = blocks_from_json(nominal, c.k1, c.k2, s.alphabet);
  if (c.personalization_matrix) {
    const auto& rows = *c.personalization_matrix;
    Eigen::MatrixXd q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw Error("config: personalization matrix must be square");
      for (std::size_t v = 0; v < rows.size(); ++v) q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) = rows[r][v];
    }
    s.personalization = PersonalizationModel(std::move(q));
  } else {
    s.personalization = PersonalizationModel::symmetric(s.alphabet.size(), c.personalization_keep.value_or(0.6));
  }
  if (s.personalization.alphabet_size() != s.alphabet.size()) throw Error("config: personalization size does not match alphabet");
  s.user_conn = detail::build_conn(c.user_graph, c.n_users, c.k1);
  s.item_conn = detail::build_conn(c.item_graph, c.n_items, c.k2);
  return s;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepPoint {
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double p = 0.0;
  double success_rate = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
  int trials = 0;
  std::vector<TrialResult> results;
};

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t point, std::size_t trial) {
  return derive_seed(base, (static_cast<std::uint64_t>(point) << 32) | static_cast<std::uint64_t>(trial));
}

inline unsigned default_jobs() {
  if (const char* env = std::getenv("MC2G_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs task(0..count-1) on `jobs` threads; results are stored by index so
/// scheduling never changes the output.
template <typename T>
std::vector<T> parallel_map(std::size_t count, unsigned jobs, const std::function<T(std::size_t)>& task) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline constexpr const char* kSweepCsvHeader = "ratio,p,success_rate,mae_mean,mae_std,trials";
inline constexpr const char* kTrialsCsvHeader = "point,trial,seed,ratio,p,user_error,item_error,success,mae";

inline std::string sweep_csv_row(const SweepPoint& pt) {
  return format_number(pt.ratio) + ',' + format_number(pt.p) + ',' + format_number(pt.success_rate) + ',' +
         format_number(pt.mae_mean) + ',' + format_number(pt.mae_std) + ',' + std::to_string(pt.trials);
}

struct SweepSinks {
  std::ostream* csv = nullptr;     // aggregated rows, written as each point completes
  std::ostream* trials = nullptr;  // optional per-trial rows
};

/// Runs every grid point with `trials` seeded trials each.
inline std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, unsigned jobs, SweepSinks sinks = {}) {
  const ModelSpec spec = model_spec(cfg);
  std::optional<double> threshold;
  {
    const auto report = threshold_report(spec, 0.0);
    if (report.threshold_eps0 > 0.0) threshold = report.threshold_eps0;
  }
  const double mn = static_cast<double>(spec.n_users) * static_cast<double>(spec.n_items);
  if (sinks.csv) *sinks.csv << kSweepCsvHeader << '\n' << std::flush;
  if (sinks.trials) *sinks.trials << kTrialsCsvHeader << '\n' << std::flush;

  std::vector<SweepPoint> points;
  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    SweepPoint pt;
    if (cfg.axis == ExperimentConfig::Axis::kRatio) {
      if (!threshold) throw Error("sweep: normalized complexity undefined because the threshold is zero; use a p axis");
      pt.ratio = cfg.grid[gi];
      pt.p = p_for_ratio(pt.ratio, *threshold, spec.n_users, spec.n_items);
    } else {
      pt.p = cfg.grid[gi];
      if (!(pt.p >= 0.0 && pt.p <= 1.0)) throw Error("sweep: p grid value outside [0, 1]");
      if (threshold) pt.ratio = normalized_complexity(pt.p * mn, *threshold);
    }
    pt.results = parallel_map<TrialResult>(static_cast<std::size_t>(cfg.trials), jobs, [&](std::size_t t) {
      const auto inst = generate_instance(spec, pt.p, trial_seed(cfg.seed, gi, t));
      auto r = evaluate_trial(inst, run_pipeline(inst, cfg.pipeline));
      r.ratio = pt.ratio;
      return r;
    });
    pt.trials = cfg.trials;
    double succ = 0.0, mae = 0.0;
    for (const auto& r : pt.results) {
      succ += r.success ? 1.0 : 0.0;
      mae += r.mae;
    }
    pt.success_rate = succ / cfg.trials;
    pt.mae_mean = mae / cfg.trials;
    double var = 0.0;
    for (const auto& r : pt.results) var += (r.mae - pt.mae_mean) * (r.mae - pt.mae_mean);
    pt.mae_std = cfg.trials > 1 ? std::sqrt(var / (cfg.trials - 1)) : 0.0;
    if (sinks.csv) *sinks.csv << sweep_csv_row(pt) << '\n' << std::flush;
    if (sinks.trials) {
      for (std::size_t t = 0; t < pt.results.size(); ++t) {
        const auto& r = pt.results[t];
        *sinks.trials << gi << ',' << t << ',' << r.seed << ',' << format_number(r.ratio) << ',' << format_number(r.p) << ','
                      << format_number(r.user_error) << ',' << format_number(r.item_error) << ',' << (r.success ? 1 : 0) << ','
                      << format_number(r.mae) << '\n';
      }
      *sinks.trials << std::flush;
    }
    if ((sinks.csv && !*sinks.csv) || (sinks.trials && !*sinks.trials)) throw Error("sweep: write failed; earlier rows are kept");
    points.push_back(std::move(pt));
  }
  return points;
}

}  // namespace mc2g
