#include "tpaoi/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "tpaoi/errors.hpp"

namespace tpaoi {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef TPAOI_VERSION
#define TPAOI_VERSION "0.0.0"
#endif

std::string code_version() { return TPAOI_VERSION; }

Scale parse_scale(const std::string& name) {
  if (name == "desk") return Scale::Desk;
  if (name == "full") return Scale::Full;
  throw ConfigError("scale must be 'desk' or 'full', got '" + name + "'");
}

std::string to_string(Scale scale) { return scale == Scale::Desk ? "desk" : "full"; }

namespace {

HistogramScaling parse_scaling(const std::string& name) {
  if (name == "global") return HistogramScaling::GlobalMax;
  if (name == "column") return HistogramScaling::ColumnMax;
  throw ConfigError("histogram_scaling must be 'global' or 'column', got '" + name + "'");
}

std::string scaling_name(HistogramScaling s) { return s == HistogramScaling::GlobalMax ? "global" : "column"; }

// Reads the keys of `j` through `handlers`; anything else is a config error.
using Handler = std::function<void(const json&)>;
void read_object(const json& j, const std::string& where, const std::map<std::string, Handler>& handlers) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown config key '" + where + "." + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
    }
  }
}

template <class T>
Handler into(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

void read_sim(const json& j, SimConfig& sim) {
  std::string tag = fluctuation_tag(sim.delay.fluctuation);
  double mean = std::visit([](const auto& f) { return f.mean; }, sim.delay.fluctuation);
  double variance = 1.0;
  if (const auto* n = std::get_if<NormalFluctuation>(&sim.delay.fluctuation)) variance = n->variance;
  read_object(j, "sim",
              {{"n_updates_max", into(sim.n_updates_max)},
               {"m_requests_max", into(sim.m_requests_max)},
               {"omega", into(sim.omega)},
               {"episode_slots", into(sim.episode_slots)},
               {"delay",
                [&](const json& d) {
                  read_object(d, "sim.delay",
                              {{"base_slots", into(sim.delay.base_slots)},
                               {"fluctuation", into(tag)},
                               {"mean", into(mean)},
                               {"variance", into(variance)}});
                }},
               {"access", [&](const json& a) {
                  read_object(a, "sim.access",
                              {{"base_interval", into(sim.access.base_interval)}, {"lambda", into(sim.access.lambda)}});
                }}});
  if (tag == "exp") {
    sim.delay.fluctuation = ExponentialFluctuation{mean};
  } else if (tag == "normal") {
    sim.delay.fluctuation = NormalFluctuation{mean, variance};
  } else {
    throw ConfigError("sim.delay.fluctuation must be 'exp' or 'normal', got '" + tag + "'");
  }
}

void read_train(const json& j, TrainConfig& cfg) {
  read_object(j, "train",
              {{"gamma", into(cfg.gamma)},
               {"eta", into(cfg.eta)},
               {"batch_size", into(cfg.batch_size)},
               {"train_interval", into(cfg.train_interval)},
               {"warmup", into(cfg.warmup)},
               {"tau", into(cfg.tau)},
               {"epsilon", into(cfg.epsilon)},
               {"epsilon_decay", into(cfg.epsilon_decay)},
               {"epsilon_min", into(cfg.epsilon_min)},
               {"episodes", into(cfg.episodes)},
               {"buffer_capacity", into(cfg.buffer_capacity)},
               {"observation_scale", into(cfg.observation_scale)},
               {"network", [&](const json& n) {
                  read_object(n, "train.network",
                              {{"trunk_hidden", into(cfg.network.trunk_hidden)},
                               {"head_hidden", into(cfg.network.head_hidden)},
                               {"shared_trunk", into(cfg.network.shared_trunk)}});
                }}});
}

void read_qaoi(const json& j, QaoiSettings& q) {
  read_object(j, "qaoi",
              {{"gamma", into(q.gamma)},
               {"offset", into(q.offset)},
               {"aoi_cap", into(q.caps.aoi_cap)},
               {"interval_cap", into(q.caps.interval_cap)}});
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(12) << v;
  return ss.str();
}

}  // namespace

Fluctuation make_fluctuation(const std::string& tag, const DelayModel& like) {
  const double mean = std::visit([](const auto& f) { return f.mean; }, like.fluctuation);
  if (tag == "exp") return ExponentialFluctuation{mean};
  if (tag == "normal") {
    const auto* n = std::get_if<NormalFluctuation>(&like.fluctuation);
    return NormalFluctuation{mean, n ? n->variance : 1.0};
  }
  throw ConfigError("delay fluctuation must be 'exp' or 'normal', got '" + tag + "'");
}

std::string fluctuation_tag(const Fluctuation& f) {
  return std::holds_alternative<ExponentialFluctuation>(f) ? "exp" : "normal";
}

ExperimentSpec default_spec(Scale scale) {
  ExperimentSpec s;
  s.scale = scale;
  s.fluctuations = {"exp"};
  s.dist_lambdas = {1.0, 0.1};
  if (scale == Scale::Desk) {
    s.lambdas = {0.1, 0.3, 0.5, 0.7, 1.0};
    s.omegas = {0.1, 0.4, 0.7, 1.0};
    s.n_values = {1, 2, 4};
    s.train.episodes = 1500;
    s.train.network.trunk_hidden = {64, 128, 64};
    s.train.network.head_hidden = {64};
  } else {
    s.lambdas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    s.fluctuations = {"exp", "normal"};
    s.omegas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    s.n_values = {1, 2, 3, 4};
    s.train.episodes = 5000;
    s.train.network.trunk_hidden = {128, 512, 256};
    s.train.network.head_hidden = {128};
  }
  return s;
}

void ExperimentSpec::validate() const {
  if (name.empty()) throw ConfigError("experiment name must not be empty");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (curve_window < 1) throw ConfigError("curve_window must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  sim.validate();
  train.validate();
  if (!(qaoi.gamma > 0.0 && qaoi.gamma < 1.0)) throw ConfigError("qaoi.gamma must lie in (0, 1)");
  if (qaoi.offset < 0) throw ConfigError("qaoi.offset must be >= 0");
  QaoiStateSpace{qaoi.caps};
  for (const auto& f : fluctuations) make_fluctuation(f, sim.delay);
  // Every grid point must resolve to a valid simulator configuration.
  for (const auto& p : experiment_points(*this)) sim_for(*this, p, 0).validate();
  for (const auto& p : omega_points(*this)) sim_for(*this, p, 0).validate();
  for (const auto& p : concurrency_points(*this)) sim_for(*this, p, 0).validate();
  for (double l : dist_lambdas) {
    GridPoint p{l, sim.omega, sim.n_updates_max, fluctuation_tag(sim.delay.fluctuation)};
    sim_for(*this, p, 0).validate();
  }
}

fs::path ExperimentSpec::cache_path() const {
  return cache_dir.empty() ? fs::path(output_dir) / "cache" : fs::path(cache_dir);
}

ExperimentSpec spec_from_json(const json& j, std::optional<Scale> scale_override) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  Scale scale = Scale::Desk;
  if (j.contains("scale")) {
    if (!j["scale"].is_string()) throw ConfigError("scale must be a string");
    scale = parse_scale(j["scale"].get<std::string>());
  }
  if (scale_override) scale = *scale_override;
  ExperimentSpec s = default_spec(scale);
  std::string scaling = scaling_name(s.histogram_scaling);
  read_object(j, "config",
              {{"name", into(s.name)},
               {"scale", [](const json&) {}},
               {"lambdas", into(s.lambdas)},
               {"fluctuations", into(s.fluctuations)},
               {"omegas", into(s.omegas)},
               {"n_values", into(s.n_values)},
               {"ablation_lambda", into(s.ablation_lambda)},
               {"ablation_n_omega", into(s.ablation_n_omega)},
               {"dist_lambdas", into(s.dist_lambdas)},
               {"replications", into(s.replications)},
               {"seed", into(s.seed)},
               {"eval_episodes", into(s.eval_episodes)},
               {"curve_window", into(s.curve_window)},
               {"histogram_scaling", into(scaling)},
               {"sim", [&](const json& v) { read_sim(v, s.sim); }},
               {"train", [&](const json& v) { read_train(v, s.train); }},
               {"qaoi", [&](const json& v) { read_qaoi(v, s.qaoi); }},
               {"output_dir", into(s.output_dir)},
               {"cache_dir", into(s.cache_dir)},
               {"use_cache", into(s.use_cache)}});
  s.histogram_scaling = parse_scaling(scaling);
  s.validate();
  return s;
}

ExperimentSpec load_spec(const fs::path& path, std::optional<Scale> scale_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return spec_from_json(j, scale_override);
}

json to_json(const SimConfig& sim) {
  json delay{{"base_slots", sim.delay.base_slots}, {"fluctuation", fluctuation_tag(sim.delay.fluctuation)}};
  std::visit(
      [&delay](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        delay["mean"] = f.mean;
        if constexpr (std::is_same_v<T, NormalFluctuation>) delay["variance"] = f.variance;
      },
      sim.delay.fluctuation);
  return {{"n_updates_max", sim.n_updates_max},
          {"m_requests_max", sim.m_requests_max},
          {"omega", sim.omega},
          {"episode_slots", sim.episode_slots},
          {"delay", delay},
          {"access", {{"base_interval", sim.access.base_interval}, {"lambda", sim.access.lambda}}}};
}

json to_json(const TrainConfig& cfg) {
  return {{"gamma", cfg.gamma},
          {"eta", cfg.eta},
          {"batch_size", cfg.batch_size},
          {"train_interval", cfg.train_interval},
          {"warmup", cfg.warmup},
          {"tau", cfg.tau},
          {"epsilon", cfg.epsilon},
          {"epsilon_decay", cfg.epsilon_decay},
          {"epsilon_min", cfg.epsilon_min},
          {"episodes", cfg.episodes},
          {"buffer_capacity", cfg.buffer_capacity},
          {"observation_scale", cfg.observation_scale},
          {"network",
           {{"trunk_hidden", cfg.network.trunk_hidden},
            {"head_hidden", cfg.network.head_hidden},
            {"shared_trunk", cfg.network.shared_trunk}}}};
}

json to_json(const ExperimentSpec& s) {
  return {{"name", s.name},
          {"scale", to_string(s.scale)},
          {"lambdas", s.lambdas},
          {"fluctuations", s.fluctuations},
          {"omegas", s.omegas},
          {"n_values", s.n_values},
          {"ablation_lambda", s.ablation_lambda},
          {"ablation_n_omega", s.ablation_n_omega},
          {"dist_lambdas", s.dist_lambdas},
          {"replications", s.replications},
          {"seed", s.seed},
          {"eval_episodes", s.eval_episodes},
          {"curve_window", s.curve_window},
          {"histogram_scaling", scaling_name(s.histogram_scaling)},
          {"sim", to_json(s.sim)},
          {"train", to_json(s.train)},
          {"qaoi",
           {{"gamma", s.qaoi.gamma},
            {"offset", s.qaoi.offset},
            {"aoi_cap", s.qaoi.caps.aoi_cap},
            {"interval_cap", s.qaoi.caps.interval_cap}}},
          {"output_dir", s.output_dir},
          {"cache_dir", s.cache_dir},
          {"use_cache", s.use_cache}};
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t replication_seed(const ExperimentSpec& spec, int replication) {
  return spec.seed + static_cast<std::uint64_t>(replication);
}

SimConfig sim_for(const ExperimentSpec& spec, const GridPoint& point, int replication) {
  SimConfig sim = spec.sim;
  sim.access.lambda = point.lambda;
  sim.omega = point.omega;
  sim.n_updates_max = point.n;
  sim.delay.fluctuation = make_fluctuation(point.fluctuation, spec.sim.delay);
  sim.seed = replication_seed(spec, replication);
  return sim;
}

std::vector<GridPoint> experiment_points(const ExperimentSpec& spec) {
  std::vector<GridPoint> pts;
  for (const auto& f : spec.fluctuations)
    for (double l : spec.lambdas) pts.push_back({l, spec.sim.omega, spec.sim.n_updates_max, f});
  return pts;
}

std::vector<GridPoint> omega_points(const ExperimentSpec& spec) {
  std::vector<GridPoint> pts;
  const auto tag = fluctuation_tag(spec.sim.delay.fluctuation);
  for (double w : spec.omegas) pts.push_back({spec.ablation_lambda, w, spec.sim.n_updates_max, tag});
  return pts;
}

std::vector<GridPoint> concurrency_points(const ExperimentSpec& spec) {
  std::vector<GridPoint> pts;
  const auto tag = fluctuation_tag(spec.sim.delay.fluctuation);
  for (int n : spec.n_values) pts.push_back({spec.ablation_lambda, spec.ablation_n_omega, n, tag});
  return pts;
}

namespace {

constexpr int kCacheFormat = 1;
constexpr std::uint64_t kEvalStream = 0xE7A1;

AgentVariant variant_of(const std::string& policy) {
  if (policy == kPolicyTpaoi) return AgentVariant::tpaoi();
  if (policy == kPolicyConAoi) return AgentVariant::conventional_aoi();
  throw ArgumentError("'" + policy + "' is not a learning agent");
}

bool is_agent(const std::string& policy) { return policy == kPolicyTpaoi || policy == kPolicyConAoi; }

std::string describe(const GridPoint& p) {
  std::ostringstream ss;
  ss << "lambda=" << p.lambda << " omega=" << p.omega << " n=" << p.n << " delay=" << p.fluctuation;
  return ss.str();
}

// Write to a sibling temp file, then rename, so concurrent readers never see
// a half-written cache entry.
template <class Fn>
void write_atomically(const fs::path& path, Fn&& body) {
  const fs::path tmp = path.string() + ".tmp" + std::to_string(omp_get_thread_num());
  {
    std::ofstream out(tmp);
    if (!out) throw SetupError("cannot write " + tmp.string());
    body(out);
    if (!out) throw SetupError("failed while writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw SetupError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw SetupError("cannot create directory " + dir.string());
}

}  // namespace

TrainedAgent obtain_agent(const ExperimentSpec& spec, const GridPoint& point, const std::string& policy,
                          int replication, const LogFn& log) {
  TrainedAgent agent;
  agent.point = point;
  agent.policy = policy;
  agent.replication = replication;
  const SimConfig sim = sim_for(spec, point, replication);
  agent.seed = sim.seed;
  const AgentVariant variant = variant_of(policy);

  const json key{{"format", kCacheFormat}, {"policy", policy}, {"sim", to_json(sim)},
                 {"seed", sim.seed},       {"train", to_json(spec.train)}};
  const std::string stem = policy + "-" + config_hash(key);
  const fs::path dir = spec.cache_path();
  const fs::path ckpt = dir / (stem + ".ckpt");
  const fs::path hist = dir / (stem + ".history.csv");

  if (spec.use_cache && fs::exists(ckpt) && fs::exists(hist)) {
    std::ifstream cin(ckpt);
    std::ifstream hin(hist);
    agent.result.params = load_checkpoint(cin);
    agent.result.history = read_history_csv(hin);
    agent.from_cache = true;
    if (log) log("cache hit " + policy + " " + describe(point) + " rep=" + std::to_string(replication));
    return agent;
  }

  const std::string label = policy + " " + describe(point) + " rep=" + std::to_string(replication);
  if (log) log("training " + label);
  const int every = std::max(1, spec.train.episodes / 10);
  agent.result = train(spec.train, sim, variant, [&](const EpisodeLog& e) {
    if (log && (e.episode + 1) % every == 0) {
      std::ostringstream ss;
      ss << "  " << label << " episode " << e.episode + 1 << "/" << spec.train.episodes << " reward "
         << e.total_reward << " epsilon " << e.epsilon;
      log(ss.str());
    }
  });
  if (agent.result.diverged) {
    if (log) log("diverged " + label + ": " + agent.result.diagnostic);
    return agent;
  }
  if (spec.use_cache) {
    ensure_dir(dir);
    write_atomically(ckpt, [&](std::ostream& o) { save_checkpoint(o, agent.result.params); });
    write_atomically(hist, [&](std::ostream& o) { write_history_csv(o, agent.result.history); });
  }
  return agent;
}

GridResult run_grid(const ExperimentSpec& spec, const std::vector<GridPoint>& points,
                    const std::vector<std::string>& policies, const LogFn& log) {
  spec.validate();
  for (const auto& p : policies) {
    if (!is_agent(p) && p != kPolicyQaoi && p != kPolicyAdjustedQaoi)
      throw ConfigError("unknown policy '" + p + "'");
  }
  GridResult out;
  out.points = points;

  struct Job {
    std::size_t point;
    std::string policy;
    int replication;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (const auto& p : policies)
      if (is_agent(p))
        for (int r = 0; r < spec.replications; ++r) jobs.push_back({i, p, r});

  std::mutex log_mutex;
  const LogFn safe_log = log ? LogFn([&](const std::string& m) {
    std::lock_guard lock(log_mutex);
    log(m);
  })
                             : LogFn{};

  std::vector<TrainedAgent> agents(jobs.size());
  std::vector<std::string> failures(jobs.size());
  const int n_jobs = static_cast<int>(jobs.size());
  // Cells are independent; nested GEMM parallelism stays off inside workers.
#pragma omp parallel for schedule(dynamic, 1) if (n_jobs > 1 && omp_get_max_threads() > 1)
  for (int j = 0; j < n_jobs; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    try {
      agents[static_cast<std::size_t>(j)] =
          obtain_agent(spec, points[job.point], job.policy, job.replication, safe_log);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(j)] = e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw SetupError("grid cell failed: " + f);

  // QAoI solutions depend only on the access model and omega.
  std::map<std::pair<double, double>, TabularPolicy> qaoi_cache;
  const auto qaoi_for = [&](const GridPoint& p) -> const TabularPolicy& {
    const auto key = std::make_pair(p.lambda, p.omega);
    auto it = qaoi_cache.find(key);
    if (it == qaoi_cache.end()) {
      AccessModel access = spec.sim.access;
      access.lambda = p.lambda;
      it = qaoi_cache.emplace(key, solve_qaoi(access, p.omega, spec.qaoi.gamma, spec.qaoi.caps).policy).first;
    }
    return it->second;
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& p : policies) {
      for (int r = 0; r < spec.replications; ++r) {
        CellResult cell;
        cell.point = points[i];
        cell.policy = p;
        cell.replication = r;
        const SimConfig sim = sim_for(spec, points[i], r);
        cell.seed = sim.seed;
        const std::uint64_t eval_seed = derive_seed(sim.seed, kEvalStream);
        if (is_agent(p)) {
          const auto it = std::find_if(agents.begin(), agents.end(), [&](const TrainedAgent& a) {
            return a.point == points[i] && a.policy == p && a.replication == r;
          });
          cell.diverged = it->result.diverged;
          cell.diagnostic = it->result.diagnostic;
          GreedyQPolicy policy(it->result.params, spec.train.observation_scale, variant_of(p).include_interval);
          cell.record = deploy_in_tpaoi_env(policy, sim, spec.eval_episodes, eval_seed);
        } else if (p == kPolicyQaoi) {
          TabularPolicy policy = qaoi_for(points[i]);
          cell.record = deploy_in_tpaoi_env(policy, sim, spec.eval_episodes, eval_seed);
        } else {
          AdjustedQaoiPolicy policy(qaoi_for(points[i]), spec.qaoi.offset);
          cell.record = deploy_in_tpaoi_env(policy, sim, spec.eval_episodes, eval_seed);
        }
        out.cells.push_back(std::move(cell));
      }
    }
  }
  out.agents = std::move(agents);
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  std::vector<int> counted;  // replications with at least one TPAoI sample
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const SummaryRow& r) { return r.point == c.point && r.policy == c.policy; });
    if (it == rows.end()) {
      rows.push_back({c.point, c.policy});
      counted.push_back(0);
      it = rows.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - rows.begin());
    it->replications += 1;
    it->update_count += c.record.update_count;
    it->access_count += c.record.access_count;
    if (c.diverged) it->diverged_runs += 1;
    if (!c.record.tpaoi_samples.empty()) {
      it->mean_tpaoi += mean_tpaoi(c.record);
      counted[idx] += 1;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& r = rows[i];
    r.mean_tpaoi = counted[i] > 0 ? r.mean_tpaoi / counted[i] : std::nan("");
    r.updates_per_access = r.access_count > 0 ? static_cast<double>(r.update_count) / r.access_count : 0.0;
  }
  return rows;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const GridPoint& point, const std::string& policy) {
  for (const auto& r : rows)
    if (r.point == point && r.policy == policy) return &r;
  return nullptr;
}

namespace {

void write_point(std::ostream& out, const GridPoint& p) {
  out << format_double(p.lambda) << ',' << format_double(p.omega) << ',' << p.n << ',' << p.fluctuation;
}

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "lambda,omega,n,fluctuation,policy,replications,mean_tpaoi,update_count,access_count,updates_per_access,"
         "diverged_runs\n";
  for (const auto& r : rows) {
    write_point(out, r.point);
    out << ',' << r.policy << ',' << r.replications << ',' << format_double(r.mean_tpaoi) << ',' << r.update_count
        << ',' << r.access_count << ',' << format_double(r.updates_per_access) << ',' << r.diverged_runs << '\n';
  }
}

void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  out << "lambda,omega,n,fluctuation,policy,replication,seed,samples,mean_tpaoi,update_count,suppressed_count,"
         "access_count,updates_per_access,mean_episode_reward,diverged\n";
  for (const auto& c : cells) {
    const auto& rec = c.record;
    double reward = 0.0;
    for (double x : rec.reward_per_episode) reward += x;
    if (!rec.reward_per_episode.empty()) reward /= static_cast<double>(rec.reward_per_episode.size());
    write_point(out, c.point);
    out << ',' << c.policy << ',' << c.replication << ',' << c.seed << ',' << rec.tpaoi_samples.size() << ','
        << format_double(rec.tpaoi_samples.empty() ? std::nan("") : mean_tpaoi(rec)) << ',' << rec.update_count
        << ',' << rec.suppressed_count << ',' << rec.access_count << ',' << format_double(rec.updates_per_access())
        << ',' << format_double(reward) << ',' << (c.diverged ? 1 : 0) << '\n';
  }
}

void write_samples_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  out << "lambda,omega,n,fluctuation,policy,replication,tpaoi\n";
  for (const auto& c : cells) {
    for (double v : c.record.tpaoi_samples) {
      write_point(out, c.point);
      out << ',' << c.policy << ',' << c.replication << ',' << format_double(v) << '\n';
    }
  }
}

void emit_learning_curve(std::ostream& out, const std::vector<EpisodeLog>& history, int window) {
  if (history.empty()) throw EmptyDataError("training history is empty");
  std::vector<double> raw;
  raw.reserve(history.size());
  for (const auto& h : history) raw.push_back(h.total_reward);
  const auto smooth = moving_average(raw, window);
  write_series_csv(out, raw, smooth);
}

void emit_interval_aoi_distribution(std::ostream& out, const RunRecord& record, HistogramScaling scaling) {
  if (record.interval_aoi_pairs.empty()) throw EmptyDataError("run record has no interval/AoI pairs");
  write_histogram_csv(out, interval_aoi_histogram(record.interval_aoi_pairs, scaling));
}

EventTrace record_episode_trace(Policy& policy, const SimConfig& sim, std::uint64_t seed) {
  Environment env(sim);
  env.set_trace_enabled(true);
  env.reset(seed);
  Rng rng(derive_seed(seed, kEvalStream));
  for (int k = 0; k < sim.episode_slots; ++k) env.step(policy.act(env.state(), rng));
  return env.trace();
}

void write_manifest(const fs::path& dir, const std::string& verb, const ExperimentSpec& spec, const json& seeds,
                    const std::vector<ManifestFile>& files) {
  const json config = to_json(spec);
  json listed = json::array();
  for (const auto& f : files) listed.push_back({{"name", f.name}, {"kind", f.kind}});
  const json manifest{{"verb", verb},
                      {"code_version", code_version()},
                      {"config", config},
                      {"config_hash", config_hash(config)},
                      {"seeds", seeds},
                      {"threads", omp_get_max_threads()},
                      {"files", listed}};
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

namespace {

GridResult run_and_write(const ExperimentSpec& spec, const std::string& verb, const std::vector<GridPoint>& points,
                         const std::vector<std::string>& policies, const LogFn& log) {
  spec.validate();
  const fs::path dir(spec.output_dir);
  ensure_dir(dir);
  GridResult res = run_grid(spec, points, policies, log);

  { auto o = open_output(dir / "summary.csv"); write_summary_csv(o, summarize(res.cells)); }
  { auto o = open_output(dir / "cells.csv"); write_cells_csv(o, res.cells); }
  { auto o = open_output(dir / "samples.csv"); write_samples_csv(o, res.cells); }

  json seeds = json::array();
  for (int r = 0; r < spec.replications; ++r)
    seeds.push_back({{"replication", r},
                     {"train_seed", replication_seed(spec, r)},
                     {"eval_seed", derive_seed(replication_seed(spec, r), kEvalStream)}});
  write_manifest(dir, verb, spec, seeds,
                 {{"summary.csv", "summary"}, {"cells.csv", "cells"}, {"samples.csv", "samples"}});
  return res;
}

}  // namespace

GridResult run_experiment(const ExperimentSpec& spec, const LogFn& log) {
  return run_and_write(spec, "sweep", experiment_points(spec),
                       {kPolicyTpaoi, kPolicyConAoi, kPolicyQaoi, kPolicyAdjustedQaoi}, log);
}

GridResult run_ablation_omega(const ExperimentSpec& spec, const LogFn& log) {
  return run_and_write(spec, "ablate-omega", omega_points(spec), {kPolicyTpaoi}, log);
}

GridResult run_ablation_concurrency(const ExperimentSpec& spec, const LogFn& log) {
  return run_and_write(spec, "ablate-n", concurrency_points(spec), {kPolicyTpaoi}, log);
}

}  // namespace tpaoi
