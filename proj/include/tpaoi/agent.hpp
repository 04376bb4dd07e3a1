#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpaoi/approximator.hpp"
#include "tpaoi/metrics.hpp"
#include "tpaoi/rng.hpp"
#include "tpaoi/sim_env.hpp"

namespace tpaoi {

struct Experience {
  std::vector<double> state_obs;
  int action = 0;
  std::vector<double> next_state_obs;
  double reward = 0.0;

  bool operator==(const Experience&) const = default;
};

// Fixed-capacity circular store; once full the oldest entry is overwritten.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim);

  void push(std::span<const double> obs, int action, std::span<const double> next_obs, double reward);
  void push(const Experience& e) { push(e.state_obs, e.action, e.next_state_obs, e.reward); }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }

  // i = 0 is the oldest stored experience.
  Experience at(std::size_t i) const;

  // Storage-order accessors used by batch assembly.
  std::span<const double> obs_slot(std::size_t slot) const;
  std::span<const double> next_obs_slot(std::size_t slot) const;
  int action_slot(std::size_t slot) const { return actions_[slot]; }
  double reward_slot(std::size_t slot) const { return rewards_[slot]; }

 private:
  std::size_t capacity_;
  int obs_dim_;
  std::size_t size_ = 0;
  std::size_t write_cursor_ = 0;
  std::vector<double> obs_;
  std::vector<double> next_obs_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
};

enum class RewardMode {
  Tpaoi,           // -(omega * a + arrived request AoIs)
  ConventionalAoi  // -(omega * a + s2) every slot
};

struct TrainConfig {
  double gamma = 0.995;
  double eta = 0.0002;
  int batch_size = 128;
  int train_interval = 4;  // T0, environment steps between training ticks
  int warmup = 128;        // minimum buffer fill before the first tick
  double tau = 0.001;
  double epsilon = 1.0;
  double epsilon_decay = 0.98;
  double epsilon_min = 0.01;
  int episodes = 1500;
  std::size_t buffer_capacity = 50000;
  double observation_scale = kDefaultObservationScale;
  NetworkShape network;  // input_dim is derived from the simulator config

  void validate() const;
};

// What the learner observes and is rewarded for. The TPAoI agent sees the full
// state; the conventional-AoI baseline drops s3 and pays s2 every slot.
struct AgentVariant {
  bool include_interval = true;
  RewardMode reward_mode = RewardMode::Tpaoi;

  static AgentVariant tpaoi() { return {}; }
  static AgentVariant conventional_aoi() { return {false, RewardMode::ConventionalAoi}; }
};

double variant_reward(const StepOutcome& outcome, double omega, RewardMode mode);

int greedy_action(std::span<const double> q_values);
int select_action(const QNetworkParams& params, std::span<const double> obs, double epsilon, Rng& rng);

// r + gamma * Q_target(s', argmax_a Q_online(s', a))
double td_target(const QNetworkParams& target_params, const QNetworkParams& online_params,
                 const Experience& experience, double gamma);

double decay_epsilon(double epsilon, const TrainConfig& cfg);

class TrainStepper {
 public:
  explicit TrainStepper(const TrainConfig& cfg) : cfg_(cfg) {}

  // One training tick: sample a minibatch, SGD on the double-DQN target, soft target update. Returns nullopt while the buffer holds fewer
  // than batch_size experiences. The loss is measured before the SGD step.
  std::optional<double> step(QNetworkParams& online, QNetworkParams& target, const ReplayBuffer& buffer, Rng& rng);

  // Same as step() but on explicit experiences (no sampling).
  double step_on(QNetworkParams& online, QNetworkParams& target, std::span<const std::size_t> slots,
                 const ReplayBuffer& buffer);

 private:
  TrainConfig cfg_;
  Workspace ws_;
  Workspace target_ws_;
  QNetworkParams grad_;
  std::vector<double> obs_;
  std::vector<double> next_obs_;
  std::vector<int> actions_;
  std::vector<double> targets_;
  std::vector<std::size_t> slots_;
  std::vector<std::uint8_t> taken_;
};

struct EpisodeLog {
  int episode = 0;
  double total_reward = 0.0;
  double epsilon = 0.0;
  double mean_loss = 0.0;  // NaN when no training tick ran
  std::int64_t updates = 0;
  double mean_tpaoi = 0.0;  // NaN when no request completed
};

struct TrainResult {
  QNetworkParams params;
  std::vector<EpisodeLog> history;
  RunRecord record;  // training rollouts; interval/AoI pairs are not kept
  bool diverged = false;
  std::string diagnostic;

  std::vector<double> rewards() const;
};

using ProgressFn = std::function<void(const EpisodeLog&)>;

NetworkShape network_for(const TrainConfig& cfg, const SimConfig& sim, const AgentVariant& variant);

TrainResult train(const TrainConfig& cfg, const SimConfig& sim, const AgentVariant& variant = AgentVariant::tpaoi(),
                  const ProgressFn& progress = {});

// Deployment-time decision rule over the raw simulator state.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int act(const SystemState& state, Rng& rng) = 0;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(int action) : action_(action) {}
  int act(const SystemState&, Rng&) override { return action_; }

 private:
  int action_;
};

class GreedyQPolicy final : public Policy {
 public:
  GreedyQPolicy(QNetworkParams params, double observation_scale, bool include_interval, double epsilon = 0.0);
  int act(const SystemState& state, Rng& rng) override;

 private:
  QNetworkParams params_;
  double scale_;
  bool include_interval_;
  double epsilon_;
  Workspace ws_;
  std::vector<double> obs_;
};

// Greedy rollout in the three-phase environment. Episode e is reset with a
// seed derived from `seed` and e, so equal seeds give equal records.
RunRecord evaluate_policy(Policy& policy, const SimConfig& sim, int episodes, std::uint64_t seed);

void write_history_csv(std::ostream& out, std::span<const EpisodeLog> history);
std::vector<EpisodeLog> read_history_csv(std::istream& in);

}  // namespace tpaoi
