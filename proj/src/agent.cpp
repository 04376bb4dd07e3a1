#include "tpaoi/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "tpaoi/errors.hpp"

namespace tpaoi {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim) : capacity_(capacity), obs_dim_(obs_dim) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  if (obs_dim < 1) throw ConfigError("replay buffer observation length must be >= 1");
  const auto dim = static_cast<std::size_t>(obs_dim);
  obs_.resize(capacity * dim);
  next_obs_.resize(capacity * dim);
  actions_.resize(capacity);
  rewards_.resize(capacity);
}

void ReplayBuffer::push(std::span<const double> obs, int action, std::span<const double> next_obs, double reward) {
  const auto dim = static_cast<std::size_t>(obs_dim_);
  if (obs.size() != dim || next_obs.size() != dim) throw ShapeError("experience has the wrong observation length");
  std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(write_cursor_ * dim));
  std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(write_cursor_ * dim));
  actions_[write_cursor_] = action;
  rewards_[write_cursor_] = reward;
  write_cursor_ = (write_cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::span<const double> ReplayBuffer::obs_slot(std::size_t slot) const {
  const auto dim = static_cast<std::size_t>(obs_dim_);
  return {obs_.data() + slot * dim, dim};
}

std::span<const double> ReplayBuffer::next_obs_slot(std::size_t slot) const {
  const auto dim = static_cast<std::size_t>(obs_dim_);
  return {next_obs_.data() + slot * dim, dim};
}

Experience ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ArgumentError("replay index out of range");
  const std::size_t slot = size_ < capacity_ ? i : (write_cursor_ + i) % capacity_;
  const auto o = obs_slot(slot);
  const auto n = next_obs_slot(slot);
  return {{o.begin(), o.end()}, actions_[slot], {n.begin(), n.end()}, rewards_[slot]};
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train_interval < 1) throw ConfigError("train_interval must be >= 1");
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon && epsilon <= 1.0))
    throw ConfigError("need 0 <= epsilon_min <= epsilon <= 1");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw ConfigError("epsilon_decay must lie in (0, 1]");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (buffer_capacity < static_cast<std::size_t>(batch_size))
    throw ConfigError("buffer_capacity must hold at least one batch");
  if (!(observation_scale > 0.0)) throw ConfigError("observation_scale must be > 0");
}

double variant_reward(const StepOutcome& outcome, double omega, RewardMode mode) {
  if (mode == RewardMode::Tpaoi) return outcome.reward;
  const double cost = outcome.events.update_sent ? omega : 0.0;
  return -(cost + outcome.next_state.s2);
}

int greedy_action(std::span<const double> q_values) {
  int best = 0;
  for (std::size_t a = 1; a < q_values.size(); ++a)
    if (q_values[a] > q_values[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  return best;
}

int select_action(const QNetworkParams& params, std::span<const double> obs, double epsilon, Rng& rng) {
  if (uniform01(rng) < epsilon) {
    return std::uniform_int_distribution<int>(0, params.shape().num_actions - 1)(rng);
  }
  return greedy_action(forward(params, obs));
}

double td_target(const QNetworkParams& target_params, const QNetworkParams& online_params,
                 const Experience& experience, double gamma) {
  const int best = greedy_action(forward(online_params, experience.next_state_obs));
  const auto q_target = forward(target_params, experience.next_state_obs);
  return experience.reward + gamma * q_target[static_cast<std::size_t>(best)];
}

double decay_epsilon(double epsilon, const TrainConfig& cfg) {
  return std::max(epsilon * cfg.epsilon_decay, cfg.epsilon_min);
}

std::optional<double> TrainStepper::step(QNetworkParams& online, QNetworkParams& target, const ReplayBuffer& buffer,
                                         Rng& rng) {
  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  if (buffer.size() < batch) return std::nullopt;

  // Uniform without replacement inside the batch.
  taken_.assign(buffer.size(), 0);
  slots_.clear();
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  while (slots_.size() < batch) {
    const auto s = pick(rng);
    if (taken_[s]) continue;
    taken_[s] = 1;
    slots_.push_back(s);
  }
  return step_on(online, target, slots_, buffer);
}

double TrainStepper::step_on(QNetworkParams& online, QNetworkParams& target, std::span<const std::size_t> slots,
                             const ReplayBuffer& buffer) {
  const int rows = static_cast<int>(slots.size());
  const auto dim = static_cast<std::size_t>(buffer.obs_dim());
  obs_.resize(slots.size() * dim);
  next_obs_.resize(slots.size() * dim);
  actions_.resize(slots.size());
  targets_.resize(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto o = buffer.obs_slot(slots[i]);
    const auto n = buffer.next_obs_slot(slots[i]);
    std::copy(o.begin(), o.end(), obs_.begin() + static_cast<std::ptrdiff_t>(i * dim));
    std::copy(n.begin(), n.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(i * dim));
    actions_[i] = buffer.action_slot(slots[i]);
  }

  // Double-DQN targets: online network picks a', target network values it.
  const int num_actions = online.shape().num_actions;
  const auto q_online_next = forward_batch(online, next_obs_, rows, ws_);
  std::vector<int> best(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    best[i] = greedy_action(q_online_next.subspan(i * num_actions, static_cast<std::size_t>(num_actions)));
  const auto q_target_next = forward_batch(target, next_obs_, rows, target_ws_);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    targets_[i] = buffer.reward_slot(slots[i]) +
                  cfg_.gamma * q_target_next[i * num_actions + static_cast<std::size_t>(best[i])];
  }

  if (!grad_.same_layout(online)) grad_ = QNetworkParams(online.shape());
  const double loss = batch_gradient(online, obs_, rows, actions_, targets_, grad_, ws_);
  sgd_step(online, grad_, cfg_.eta);
  soft_update(target, online, cfg_.tau);
  return loss;
}

std::vector<double> TrainResult::rewards() const {
  std::vector<double> r;
  r.reserve(history.size());
  for (const auto& h : history) r.push_back(h.total_reward);
  return r;
}

NetworkShape network_for(const TrainConfig& cfg, const SimConfig& sim, const AgentVariant& variant) {
  NetworkShape shape = cfg.network;
  shape.input_dim = observation_length(sim, variant.include_interval);
  shape.num_actions = 2;
  return shape;
}

namespace {
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kActionStream = 2;
constexpr std::uint64_t kSampleStream = 3;
constexpr std::uint64_t kEpisodeStreamBase = 1000;
}  // namespace

TrainResult train(const TrainConfig& cfg, const SimConfig& sim, const AgentVariant& variant,
                  const ProgressFn& progress) {
  cfg.validate();
  sim.validate();
  const auto shape = network_for(cfg, sim, variant);
  Rng init_rng(derive_seed(sim.seed, kInitStream));
  Rng action_rng(derive_seed(sim.seed, kActionStream));
  Rng sample_rng(derive_seed(sim.seed, kSampleStream));

  TrainResult result;
  QNetworkParams online = init_params(shape, init_rng);
  QNetworkParams target = online;
  if (cfg.episodes == 0) {
    result.params = std::move(online);
    return result;
  }

  Environment env(sim);
  ReplayBuffer buffer(cfg.buffer_capacity, shape.input_dim);
  TrainStepper stepper(cfg);
  Workspace ws;
  std::vector<double> obs(static_cast<std::size_t>(shape.input_dim));
  std::vector<double> next_obs(obs.size());
  const auto ready = static_cast<std::size_t>(std::max(cfg.warmup, cfg.batch_size));
  double epsilon = cfg.epsilon;
  std::int64_t global_step = 0;

  try {
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      env.reset(derive_seed(sim.seed, kEpisodeStreamBase + static_cast<std::uint64_t>(ep)));
      encode_observation_into(env.state(), cfg.observation_scale, variant.include_interval, obs.data());
      EpisodeLog log;
      log.episode = ep;
      log.epsilon = epsilon;
      double loss_sum = 0.0;
      int ticks = 0;
      double tpaoi_sum = 0.0;
      int tpaoi_n = 0;

      for (int k = 0; k < sim.episode_slots; ++k) {
        int action = 0;
        if (uniform01(action_rng) < epsilon) {
          action = std::uniform_int_distribution<int>(0, 1)(action_rng);
        } else {
          action = greedy_action(forward_batch(online, obs, 1, ws));
        }
        const auto outcome = env.step(action);
        const double reward = variant_reward(outcome, sim.omega, variant.reward_mode);
        encode_observation_into(outcome.next_state, cfg.observation_scale, variant.include_interval,
                                next_obs.data());
        buffer.push(obs, action, next_obs, reward);
        ++global_step;

        log.total_reward += reward;
        const auto& ev = outcome.events;
        if (ev.update_sent) ++log.updates;
        if (ev.update_suppressed) ++result.record.suppressed_count;
        if (ev.user_accessed) ++result.record.access_count;
        for (const auto& r : ev.requests_arrived) {
          result.record.tpaoi_samples.push_back(r.tpaoi);
          tpaoi_sum += r.tpaoi;
          ++tpaoi_n;
        }

        if (global_step % cfg.train_interval == 0 && buffer.size() >= ready) {
          if (const auto loss = stepper.step(online, target, buffer, sample_rng)) {
            loss_sum += *loss;
            ++ticks;
          }
        }
        obs.swap(next_obs);
      }

      log.mean_loss = ticks > 0 ? loss_sum / ticks : std::numeric_limits<double>::quiet_NaN();
      log.mean_tpaoi = tpaoi_n > 0 ? tpaoi_sum / tpaoi_n : std::numeric_limits<double>::quiet_NaN();
      result.record.update_count += log.updates;
      result.record.slot_count += sim.episode_slots;
      result.record.reward_per_episode.push_back(log.total_reward);
      result.history.push_back(log);
      epsilon = decay_epsilon(epsilon, cfg);
      if (progress) progress(log);
    }
  } catch (const NumericError& e) {
    result.diverged = true;
    result.diagnostic = std::string("training diverged after ") + std::to_string(result.history.size()) +
                        " episodes: " + e.what();
  }
  result.params = std::move(online);
  return result;
}

GreedyQPolicy::GreedyQPolicy(QNetworkParams params, double observation_scale, bool include_interval, double epsilon)
    : params_(std::move(params)), scale_(observation_scale), include_interval_(include_interval), epsilon_(epsilon) {
  obs_.resize(static_cast<std::size_t>(params_.shape().input_dim));
}

int GreedyQPolicy::act(const SystemState& state, Rng& rng) {
  const auto expected = state.s1.size() + (include_interval_ ? 2 : 1) + 2 * state.s4.size();
  if (expected != obs_.size()) throw ShapeError("policy network does not match the simulator dimensions");
  encode_observation_into(state, scale_, include_interval_, obs_.data());
  if (epsilon_ > 0.0 && uniform01(rng) < epsilon_) return std::uniform_int_distribution<int>(0, 1)(rng);
  return greedy_action(forward_batch(params_, obs_, 1, ws_));
}

RunRecord evaluate_policy(Policy& policy, const SimConfig& sim, int episodes, std::uint64_t seed) {
  sim.validate();
  RunRecord record;
  Environment env(sim);
  Rng policy_rng(derive_seed(seed, 0x706f6c696379ULL));
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(seed, kEpisodeStreamBase + static_cast<std::uint64_t>(ep)));
    double total = 0.0;
    for (int k = 0; k < sim.episode_slots; ++k) {
      const auto& s = env.state();
      record.interval_aoi_pairs.push_back({s.s3, s.s2});
      const int action = policy.act(s, policy_rng);
      const auto outcome = env.step(action);
      total += outcome.reward;
      const auto& ev = outcome.events;
      if (ev.update_sent) ++record.update_count;
      if (ev.update_suppressed) ++record.suppressed_count;
      if (ev.user_accessed) ++record.access_count;
      for (const auto& r : ev.requests_arrived) record.tpaoi_samples.push_back(r.tpaoi);
    }
    record.slot_count += sim.episode_slots;
    record.reward_per_episode.push_back(total);
  }
  return record;
}

void write_history_csv(std::ostream& out, std::span<const EpisodeLog> history) {
  out << "episode,total_reward,epsilon,mean_loss,updates,mean_tpaoi\n" << std::setprecision(12);
  for (const auto& h : history) {
    out << h.episode + 1 << ',' << h.total_reward << ',' << h.epsilon << ',' << h.mean_loss << ',' << h.updates
        << ',' << h.mean_tpaoi << '\n';
  }
}

std::vector<EpisodeLog> read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "episode,total_reward,epsilon,mean_loss,updates,mean_tpaoi")
    throw ConfigError("history CSV has an unexpected header");
  std::vector<EpisodeLog> history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ConfigError("malformed history CSV row: " + line);
    try {
      EpisodeLog h;
      h.episode = std::stoi(f[0]) - 1;
      h.total_reward = std::stod(f[1]);
      h.epsilon = std::stod(f[2]);
      // stod rejects "nan" on some platforms; strtod does not.
      h.mean_loss = std::strtod(f[3].c_str(), nullptr);
      h.updates = std::stoll(f[4]);
      h.mean_tpaoi = std::strtod(f[5].c_str(), nullptr);
      history.push_back(h);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed history CSV row: " + line);
    }
  }
  return history;
}

}  // namespace tpaoi
