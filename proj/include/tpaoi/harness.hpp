#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpaoi/agent.hpp"
#include "tpaoi/baselines.hpp"
#include "tpaoi/metrics.hpp"
#include "tpaoi/sim_env.hpp"

namespace tpaoi {

enum class Scale { Desk, Full };

Scale parse_scale(const std::string& name);
std::string to_string(Scale scale);

struct QaoiSettings {
  double gamma = 0.995;
  int offset = kDefaultQaoiOffset;
  QaoiCaps caps;
};

// One experiment, fully resolved. Config files only need to name the fields
// they change; everything else comes from the scale defaults.
struct ExperimentSpec {
  std::string name = "tpaoi";
  Scale scale = Scale::Desk;
  std::vector<double> lambdas;
  std::vector<std::string> fluctuations;  // "exp" or "normal"
  std::vector<double> omegas;             // omega ablation grid
  std::vector<int> n_values;              // concurrency ablation grid
  double ablation_lambda = 1.0;
  double ablation_n_omega = 0.1;
  std::vector<double> dist_lambdas;
  int replications = 3;
  std::uint64_t seed = 1;
  int eval_episodes = 20;
  int curve_window = 100;
  HistogramScaling histogram_scaling = HistogramScaling::GlobalMax;
  SimConfig sim;
  TrainConfig train;
  QaoiSettings qaoi;
  std::string output_dir = "results";
  std::string cache_dir;  // empty: <output_dir>/cache
  bool use_cache = true;

  void validate() const;
  std::filesystem::path cache_path() const;
};

ExperimentSpec default_spec(Scale scale);

// Unknown keys are rejected so typos do not silently fall back to defaults.
ExperimentSpec spec_from_json(const nlohmann::json& j, std::optional<Scale> scale_override = std::nullopt);
ExperimentSpec load_spec(const std::filesystem::path& path, std::optional<Scale> scale_override = std::nullopt);
nlohmann::json to_json(const ExperimentSpec& spec);
nlohmann::json to_json(const SimConfig& sim);
nlohmann::json to_json(const TrainConfig& cfg);

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

Fluctuation make_fluctuation(const std::string& tag, const DelayModel& like);
std::string fluctuation_tag(const Fluctuation& f);

inline constexpr const char* kPolicyTpaoi = "tpaoi";
inline constexpr const char* kPolicyConAoi = "con_aoi";
inline constexpr const char* kPolicyQaoi = "qaoi";
inline constexpr const char* kPolicyAdjustedQaoi = "adjusted_qaoi";

struct GridPoint {
  double lambda = 1.0;
  double omega = 1.0;
  int n = 2;
  std::string fluctuation = "exp";

  bool operator==(const GridPoint&) const = default;
};

SimConfig sim_for(const ExperimentSpec& spec, const GridPoint& point, int replication);
std::uint64_t replication_seed(const ExperimentSpec& spec, int replication);

struct CellResult {
  GridPoint point;
  std::string policy;
  int replication = 0;
  std::uint64_t seed = 0;
  RunRecord record;
  bool diverged = false;
  std::string diagnostic;
};

struct TrainedAgent {
  GridPoint point;
  std::string policy;
  int replication = 0;
  std::uint64_t seed = 0;
  TrainResult result;
  bool from_cache = false;
};

struct SummaryRow {
  GridPoint point;
  std::string policy;
  int replications = 0;
  double mean_tpaoi = 0.0;  // mean of per-replication means
  std::int64_t update_count = 0;
  std::int64_t access_count = 0;
  double updates_per_access = 0.0;
  int diverged_runs = 0;
};

struct GridResult {
  std::vector<GridPoint> points;
  std::vector<CellResult> cells;
  std::vector<TrainedAgent> agents;
};

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells);
const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const GridPoint& point, const std::string& policy);

using LogFn = std::function<void(const std::string&)>;

// Trains (or loads from the cache) one learning agent.
TrainedAgent obtain_agent(const ExperimentSpec& spec, const GridPoint& point, const std::string& policy,
                          int replication, const LogFn& log = {});

// Trains/solves every requested policy at every point and replication, then
// deploys each in the three-phase environment. Agents train in parallel.
GridResult run_grid(const ExperimentSpec& spec, const std::vector<GridPoint>& points,
                    const std::vector<std::string>& policies, const LogFn& log = {});

std::vector<GridPoint> experiment_points(const ExperimentSpec& spec);
std::vector<GridPoint> omega_points(const ExperimentSpec& spec);
std::vector<GridPoint> concurrency_points(const ExperimentSpec& spec);

// Each writes summary.csv, cells.csv, samples.csv and manifest.json under output_dir.
GridResult run_experiment(const ExperimentSpec& spec, const LogFn& log = {});
GridResult run_ablation_omega(const ExperimentSpec& spec, const LogFn& log = {});
GridResult run_ablation_concurrency(const ExperimentSpec& spec, const LogFn& log = {});

void emit_learning_curve(std::ostream& out, const std::vector<EpisodeLog>& history, int window = 100);
void emit_interval_aoi_distribution(std::ostream& out, const RunRecord& record,
                                    HistogramScaling scaling = HistogramScaling::GlobalMax);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells);
void write_samples_csv(std::ostream& out, const std::vector<CellResult>& cells);

// One greedy episode with the event log switched on.
EventTrace record_episode_trace(Policy& policy, const SimConfig& sim, std::uint64_t seed);

struct ManifestFile {
  std::string name;
  std::string kind;
};

void write_manifest(const std::filesystem::path& dir, const std::string& verb, const ExperimentSpec& spec,
                    const nlohmann::json& seeds, const std::vector<ManifestFile>& files);

std::string code_version();

}  // namespace tpaoi
