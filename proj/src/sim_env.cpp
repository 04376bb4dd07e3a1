#include "tpaoi/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tpaoi/errors.hpp"

namespace tpaoi {

void DelayModel::validate() const {
  if (base_slots < 0) throw ConfigError("delay base_slots must be >= 0");
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ExponentialFluctuation>) {
          if (!(f.mean >= 0.0) || !std::isfinite(f.mean))
            throw ConfigError("exponential fluctuation mean must be finite and >= 0");
        } else {
          if (!std::isfinite(f.mean)) throw ConfigError("normal fluctuation mean must be finite");
          if (!(f.variance >= 0.0) || !std::isfinite(f.variance))
            throw ConfigError("normal fluctuation variance must be finite and >= 0");
        }
      },
      fluctuation);
}

void AccessModel::validate() const {
  if (base_interval < 1) throw ConfigError("access base_interval must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError("access lambda must be finite and >= 0");
}

void SimConfig::validate() const {
  if (n_updates_max < 1) throw ConfigError("n_updates_max must be >= 1");
  if (m_requests_max < 1) throw ConfigError("m_requests_max must be >= 1");
  if (episode_slots < 1) throw ConfigError("episode_slots must be >= 1");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be finite and >= 0");
  delay.validate();
  access.validate();
}

int discretize_delay(int base_slots, double fluctuation_draw) {
  const double clamped = std::max(0.0, fluctuation_draw);
  const long total = static_cast<long>(base_slots) + std::lround(clamped);
  return static_cast<int>(std::max(1L, total));
}

int sample_update_delay(const DelayModel& model, Rng& rng) {
  const double draw = std::visit(
      [&rng](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ExponentialFluctuation>) {
          if (f.mean <= 0.0) return 0.0;
          return std::exponential_distribution<double>(1.0 / f.mean)(rng);
        } else {
          if (f.variance <= 0.0) return f.mean;
          return std::normal_distribution<double>(f.mean, std::sqrt(f.variance))(rng);
        }
      },
      model.fluctuation);
  return discretize_delay(model.base_slots, draw);
}

int sample_access_interval(const AccessModel& model, Rng& rng) {
  if (model.lambda <= 0.0) return model.base_interval;
  return model.base_interval + std::poisson_distribution<int>(model.lambda)(rng);
}

double reward_from_events(const StepEvents& events, double omega) {
  double penalty = events.update_sent ? omega : 0.0;
  for (const auto& r : events.requests_arrived) penalty += r.tpaoi;
  return -penalty;
}

void encode_observation_into(const SystemState& state, double scale, bool include_interval, double* out) {
  for (int v : state.s1) *out++ = v / scale;
  *out++ = state.s2 / scale;
  if (include_interval) *out++ = state.s3 / scale;
  for (int v : state.s4) *out++ = v / scale;
  for (int v : state.s5) *out++ = v / scale;
}

std::vector<double> encode_observation(const SystemState& state, double scale, bool include_interval) {
  if (!(scale > 0.0)) throw ArgumentError("observation scale must be > 0");
  std::vector<double> obs(state.s1.size() + (include_interval ? 2 : 1) + 2 * state.s4.size());
  encode_observation_into(state, scale, include_interval, obs.data());
  return obs;
}

int observation_length(const SimConfig& config, bool include_interval) {
  return config.n_updates_max + (include_interval ? 2 : 1) + 2 * config.m_requests_max;
}

Environment::Environment(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  reset(config_.seed);
}

const SystemState& Environment::reset(std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(config_.n_updates_max);
  const auto m = static_cast<std::size_t>(config_.m_requests_max);
  rng_.seed(seed);
  state_ = SystemState{std::vector<int>(n, 0), 0, 1, std::vector<int>(m, 0), std::vector<int>(m, 0)};
  updates_.assign(n, InFlight{});
  requests_.assign(m, InFlight{});
  slot_ = 1;
  // The initial state behaves as if the user accessed at slot 0.
  next_access_slot_ = sample_access_interval(config_.access, rng_);
  last_update_arrival_ = 0;
  last_request_arrival_ = 0;
  trace_.clear();
  return state_;
}

std::optional<int> Environment::random_free_index(const std::vector<int>& occupancy) {
  std::vector<int> free;
  for (std::size_t i = 0; i < occupancy.size(); ++i)
    if (occupancy[i] == 0) free.push_back(static_cast<int>(i));
  if (free.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  return free[pick(rng_)];
}

void Environment::record(std::int64_t slot, EventKind kind, std::vector<std::int64_t> payload) {
  if (trace_enabled_) trace_.push_back(Event{slot, kind, std::move(payload)});
}

StepOutcome Environment::step(int action) {
  const std::int64_t t = slot_;
  StepOutcome out;
  auto& ev = out.events;
  auto& s = state_;
  const auto n = s.s1.size();
  const auto m = s.s4.size();

  // (1) update arrivals
  bool update_arrived = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.s1[i] == 0) continue;
    const auto& f = updates_[i];
    if (f.arrival_slot < t)
      throw InvariantViolation("update in link slot " + std::to_string(i) + " missed its arrival");
    if (f.arrival_slot != t) continue;
    const int transit = static_cast<int>(t - f.send_slot);
    if (transit != s.s1[i]) throw InvariantViolation("update age disagrees with its transit time");
    ev.updates_arrived.push_back({f.send_slot, transit});
    record(t, EventKind::UpdateArrived, {f.send_slot, transit});
    s.s2 = transit;
    s.s1[i] = 0;
    update_arrived = true;
  }
  if (ev.updates_arrived.size() > 1) throw InvariantViolation("FCFS violated: two updates in one slot");
  if (!update_arrived) s.s2 += 1;

  // (2) request arrivals: the carried AoI becomes a TPAoI sample
  for (std::size_t i = 0; i < m; ++i) {
    if (s.s4[i] == 0) continue;
    const auto& f = requests_[i];
    if (f.arrival_slot < t)
      throw InvariantViolation("request in link slot " + std::to_string(i) + " missed its arrival");
    if (f.arrival_slot != t) continue;
    ev.requests_arrived.push_back({f.send_slot, s.s5[i]});
    record(t, EventKind::RequestArrived, {f.send_slot, s.s5[i]});
    s.s4[i] = 0;
    s.s5[i] = 0;
  }

  std::vector<bool> fresh_request(m, false);
  std::vector<bool> fresh_update(n, false);

  // (3) user access and request launch
  if (t == next_access_slot_) {
    ev.user_accessed = true;
    s.s3 = 1;
    next_access_slot_ = t + sample_access_interval(config_.access, rng_);
    if (const auto idx = random_free_index(s.s4)) {
      const auto i = static_cast<std::size_t>(*idx);
      s.s4[i] = 1;
      s.s5[i] = s.s2 + 1;
      const std::int64_t arrival =
          std::max<std::int64_t>(t + sample_update_delay(config_.delay, rng_), last_request_arrival_ + 1);
      requests_[i] = {t, arrival};
      last_request_arrival_ = arrival;
      fresh_request[i] = true;
      ev.request_launched = true;
    }
    record(t, EventKind::UserAccessed, {ev.request_launched ? 1 : 0, s.s2});
  } else {
    s.s3 += 1;
  }

  // (4) server action under wait-N
  if (action == 1) {
    if (const auto idx = random_free_index(s.s1)) {
      const auto i = static_cast<std::size_t>(*idx);
      s.s1[i] = 1;
      const std::int64_t arrival =
          std::max<std::int64_t>(t + sample_update_delay(config_.delay, rng_), last_update_arrival_ + 1);
      updates_[i] = {t, arrival};
      last_update_arrival_ = arrival;
      fresh_update[i] = true;
      ev.update_sent = true;
      record(t, EventKind::UpdateSent, {static_cast<std::int64_t>(i)});
    } else {
      ev.update_suppressed = true;
    }
  }

  // (5) ageing of everything still in flight
  for (std::size_t i = 0; i < n; ++i)
    if (s.s1[i] != 0 && !fresh_update[i]) ++s.s1[i];
  for (std::size_t i = 0; i < m; ++i) {
    if (s.s4[i] != 0 && !fresh_request[i]) {
      ++s.s4[i];
      ++s.s5[i];
    }
  }

  out.reward = reward_from_events(ev, config_.omega);
  out.next_state = s;
  ++slot_;
  return out;
}

}  // namespace tpaoi
