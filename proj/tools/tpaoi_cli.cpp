// Command-line front end for the TPAoI experiment harness.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "tpaoi/errors.hpp"
#include "tpaoi/harness.hpp"

namespace fs = std::filesystem;
using namespace tpaoi;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string scale;
  std::optional<int> episodes;
  std::optional<int> replications;
  bool no_cache = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "JSON experiment config");
  cmd->add_option("-s,--seed", o.seed, "master seed");
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("--scale", o.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--episodes", o.episodes, "override training episodes");
  cmd->add_option("--replications", o.replications, "override replication count");
  cmd->add_flag("--no-cache", o.no_cache, "always retrain agents");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress output");
}

ExperimentSpec resolve(const CommonOptions& o) {
  std::optional<Scale> scale;
  if (!o.scale.empty()) scale = parse_scale(o.scale);
  ExperimentSpec spec = o.config.empty() ? default_spec(scale.value_or(Scale::Desk)) : load_spec(o.config, scale);
  if (o.seed) spec.seed = *o.seed;
  if (!o.out.empty()) spec.output_dir = o.out;
  if (o.episodes) spec.train.episodes = *o.episodes;
  if (o.replications) spec.replications = *o.replications;
  if (o.no_cache) spec.use_cache = false;
  spec.validate();
  return spec;
}

LogFn make_log(const CommonOptions& o) {
  if (o.quiet) return {};
  return [](const std::string& m) { std::cerr << "[tpaoi] " << m << '\n'; };
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw SetupError("cannot write " + p.string());
  return out;
}

void prepare_dir(const ExperimentSpec& spec) {
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec || !fs::is_directory(spec.output_dir)) throw SetupError("cannot create directory " + spec.output_dir);
}

GridPoint base_point(const ExperimentSpec& spec, std::optional<double> lambda) {
  return {lambda.value_or(spec.sim.access.lambda), spec.sim.omega, spec.sim.n_updates_max,
          fluctuation_tag(spec.sim.delay.fluctuation)};
}

nlohmann::json seed_entry(const ExperimentSpec& spec, int replication) {
  return nlohmann::json::array({{{"replication", replication}, {"train_seed", replication_seed(spec, replication)}}});
}

void print_summary(const std::vector<SummaryRow>& rows) {
  write_summary_csv(std::cout, rows);
}

int run_train(const CommonOptions& o, const std::string& policy, std::optional<double> lambda) {
  auto spec = resolve(o);
  prepare_dir(spec);
  const fs::path dir(spec.output_dir);
  const auto point = base_point(spec, lambda);
  const auto agent = obtain_agent(spec, point, policy, 0, make_log(o));
  { auto out = open_out(dir / "checkpoint.txt"); save_checkpoint(out, agent.result.params); }
  { auto out = open_out(dir / "history.csv"); write_history_csv(out, agent.result.history); }
  if (!agent.result.history.empty()) {
    auto out = open_out(dir / "curve.csv");
    emit_learning_curve(out, agent.result.history, spec.curve_window);
  }
  write_manifest(dir, "train", spec, seed_entry(spec, 0),
                 {{"checkpoint.txt", "checkpoint"}, {"history.csv", "history"}, {"curve.csv", "curve"}});
  if (agent.result.diverged) throw NumericError(agent.result.diagnostic);
  std::cout << "trained " << policy << " at lambda=" << point.lambda << " over " << agent.result.history.size()
            << " episodes\n";
  return 0;
}

int run_evaluate(const CommonOptions& o, const std::string& policy_name, const std::string& checkpoint,
                 const std::string& policy_csv, std::optional<double> lambda, bool trace) {
  auto spec = resolve(o);
  prepare_dir(spec);
  const fs::path dir(spec.output_dir);
  const auto point = base_point(spec, lambda);
  const SimConfig sim = sim_for(spec, point, 0);
  std::vector<ManifestFile> files;

  std::unique_ptr<Policy> policy;
  if (!policy_csv.empty()) {
    std::ifstream in(policy_csv);
    if (!in) throw ConfigError("cannot open policy CSV " + policy_csv);
    auto table = load_policy_csv(in);
    if (policy_name == kPolicyAdjustedQaoi)
      policy = std::make_unique<AdjustedQaoiPolicy>(std::move(table), spec.qaoi.offset);
    else
      policy = std::make_unique<TabularPolicy>(std::move(table));
  } else if (policy_name == kPolicyTpaoi || policy_name == kPolicyConAoi) {
    QNetworkParams params;
    if (!checkpoint.empty()) {
      std::ifstream in(checkpoint);
      if (!in) throw ConfigError("cannot open checkpoint " + checkpoint);
      params = load_checkpoint(in);
    } else {
      params = obtain_agent(spec, point, policy_name, 0, make_log(o)).result.params;
    }
    policy = std::make_unique<GreedyQPolicy>(std::move(params), spec.train.observation_scale,
                                             policy_name == kPolicyTpaoi);
  } else if (policy_name == kPolicyQaoi || policy_name == kPolicyAdjustedQaoi) {
    AccessModel access = sim.access;
    auto table = solve_qaoi(access, sim.omega, spec.qaoi.gamma, spec.qaoi.caps).policy;
    { auto out = open_out(dir / "policy.csv"); save_policy_csv(out, table); }
    files.push_back({"policy.csv", "tabular-policy"});
    if (policy_name == kPolicyQaoi)
      policy = std::make_unique<TabularPolicy>(std::move(table));
    else
      policy = std::make_unique<AdjustedQaoiPolicy>(std::move(table), spec.qaoi.offset);
  } else if (policy_name == "always" || policy_name == "never") {
    policy = std::make_unique<ConstantPolicy>(policy_name == "always" ? 1 : 0);
  } else {
    throw ArgumentError("unknown policy '" + policy_name + "'");
  }

  CellResult cell;
  cell.point = point;
  cell.policy = policy_name;
  cell.seed = sim.seed;
  const std::uint64_t eval_seed = derive_seed(sim.seed, 0xE7A1);
  cell.record = deploy_in_tpaoi_env(*policy, sim, spec.eval_episodes, eval_seed);
  { auto out = open_out(dir / "evaluation.csv"); write_cells_csv(out, {cell}); }
  { auto out = open_out(dir / "samples.csv"); write_samples_csv(out, {cell}); }
  { auto out = open_out(dir / "distribution.csv"); emit_interval_aoi_distribution(out, cell.record, spec.histogram_scaling); }
  files.push_back({"evaluation.csv", "cells"});
  files.push_back({"samples.csv", "samples"});
  files.push_back({"distribution.csv", "histogram"});
  if (trace) {
    auto out = open_out(dir / "events.log");
    write_trace(out, record_episode_trace(*policy, sim, eval_seed));
    files.push_back({"events.log", "event-log"});
  }
  write_manifest(dir, "evaluate", spec,
                 nlohmann::json::array({{{"replication", 0}, {"train_seed", sim.seed}, {"eval_seed", eval_seed}}}),
                 files);
  write_cells_csv(std::cout, {cell});
  return 0;
}

int run_curve(const CommonOptions& o) {
  auto spec = resolve(o);
  prepare_dir(spec);
  const fs::path dir(spec.output_dir);
  const auto agent = obtain_agent(spec, base_point(spec, spec.ablation_lambda), kPolicyTpaoi, 0, make_log(o));
  if (agent.result.diverged) throw NumericError(agent.result.diagnostic);
  { auto out = open_out(dir / "curve.csv"); emit_learning_curve(out, agent.result.history, spec.curve_window); }
  { auto out = open_out(dir / "history.csv"); write_history_csv(out, agent.result.history); }
  write_manifest(dir, "curve", spec, seed_entry(spec, 0), {{"curve.csv", "curve"}, {"history.csv", "history"}});
  std::cout << "wrote " << (dir / "curve.csv").string() << '\n';
  return 0;
}

int run_dist(const CommonOptions& o) {
  auto spec = resolve(o);
  prepare_dir(spec);
  const fs::path dir(spec.output_dir);
  std::vector<ManifestFile> files;
  for (double l : spec.dist_lambdas) {
    const auto point = base_point(spec, l);
    const auto agent = obtain_agent(spec, point, kPolicyTpaoi, 0, make_log(o));
    GreedyQPolicy policy(agent.result.params, spec.train.observation_scale, true);
    const SimConfig sim = sim_for(spec, point, 0);
    const auto record = deploy_in_tpaoi_env(policy, sim, spec.eval_episodes, derive_seed(sim.seed, 0xE7A1));
    std::ostringstream name;
    name << "dist_lambda_" << l << ".csv";
    auto out = open_out(dir / name.str());
    emit_interval_aoi_distribution(out, record, spec.histogram_scaling);
    files.push_back({name.str(), "histogram"});
    const auto cells = interval_aoi_histogram(record.interval_aoi_pairs, spec.histogram_scaling);
    std::cout << "lambda=" << l << " modal AoI at interval " << spec.sim.access.base_interval << ": "
              << modal_aoi_at_interval(cells, spec.sim.access.base_interval) << '\n';
  }
  write_manifest(dir, "dist", spec, seed_entry(spec, 0), files);
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TPAoI status-update laboratory"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string policy = kPolicyTpaoi;
  std::string checkpoint;
  std::string policy_csv;
  std::optional<double> lambda;
  bool trace = false;

  auto* train_cmd = app.add_subcommand("train", "train one agent and write its checkpoint");
  add_common(train_cmd, common);
  train_cmd->add_option("--policy", policy, "tpaoi or con_aoi")->check(CLI::IsMember({"tpaoi", "con_aoi"}));
  train_cmd->add_option("--lambda", lambda, "access-interval lambda");

  auto* eval_cmd = app.add_subcommand("evaluate", "roll a policy out in the three-phase environment");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--policy", policy, "tpaoi, con_aoi, qaoi, adjusted_qaoi, always or never");
  eval_cmd->add_option("--checkpoint", checkpoint, "network checkpoint for tpaoi/con_aoi");
  eval_cmd->add_option("--policy-csv", policy_csv, "tabular policy CSV (aoi,interval,action)");
  eval_cmd->add_option("--lambda", lambda, "access-interval lambda");
  eval_cmd->add_flag("--trace", trace, "also write the event log of one episode");

  auto* sweep_cmd = app.add_subcommand("sweep", "compare all policies over the lambda grid");
  add_common(sweep_cmd, common);
  auto* omega_cmd = app.add_subcommand("ablate-omega", "sweep the transmission cost");
  add_common(omega_cmd, common);
  auto* n_cmd = app.add_subcommand("ablate-n", "sweep the number of concurrent updates");
  add_common(n_cmd, common);
  auto* curve_cmd = app.add_subcommand("curve", "learning curve with a moving average");
  add_common(curve_cmd, common);
  auto* dist_cmd = app.add_subcommand("dist", "interval/AoI frequency tables");
  add_common(dist_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    const auto log = make_log(common);
    if (*train_cmd) return run_train(common, policy, lambda);
    if (*eval_cmd) return run_evaluate(common, policy, checkpoint, policy_csv, lambda, trace);
    if (*sweep_cmd) print_summary(summarize(run_experiment(resolve(common), log).cells));
    if (*omega_cmd) print_summary(summarize(run_ablation_omega(resolve(common), log).cells));
    if (*n_cmd) print_summary(summarize(run_ablation_concurrency(resolve(common), log).cells));
    if (*curve_cmd) return run_curve(common);
    if (*dist_cmd) return run_dist(common);
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return e.kind() == "config" || e.kind() == "argument" || e.kind() == "setup" ? 2 : 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
