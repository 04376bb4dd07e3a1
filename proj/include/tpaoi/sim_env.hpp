#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "tpaoi/rng.hpp"
#include "tpaoi/trace.hpp"

namespace tpaoi {

struct ExponentialFluctuation {
  double mean = 1.0;
};

// variance == 0 degenerates to the constant `mean`.
struct NormalFluctuation {
  double mean = 1.0;
  double variance = 1.0;
};

using Fluctuation = std::variant<ExponentialFluctuation, NormalFluctuation>;

// One-way link delay: fixed propagation part plus a stochastic transmission part.
// Shared by the update link (server -> AP) and the request link (AP -> server).
struct DelayModel {
  int base_slots = 5;
  Fluctuation fluctuation = ExponentialFluctuation{};

  void validate() const;
};

// User access interval = base_interval + Poisson(lambda).
struct AccessModel {
  int base_interval = 20;
  double lambda = 1.0;

  void validate() const;
};

struct SimConfig {
  int n_updates_max = 2;
  int m_requests_max = 1;
  double omega = 1.0;
  DelayModel delay;
  AccessModel access;
  int episode_slots = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

// MDP observation. Entries of 0 in s1/s4/s5 mark idle link slots.
struct SystemState {
  std::vector<int> s1;  // ages of in-flight status updates
  int s2 = 0;           // conventional AoI at the AP
  int s3 = 1;           // slots since the last user access
  std::vector<int> s4;  // ages of in-flight requests
  std::vector<int> s5;  // AoI carried by each in-flight request

  bool operator==(const SystemState&) const = default;
};

struct UpdateArrival {
  std::int64_t send_slot = 0;
  int transit = 0;
};

struct RequestArrival {
  std::int64_t access_slot = 0;
  int tpaoi = 0;
};

struct StepEvents {
  bool update_sent = false;
  bool update_suppressed = false;
  std::vector<UpdateArrival> updates_arrived;
  bool user_accessed = false;
  bool request_launched = false;
  std::vector<RequestArrival> requests_arrived;
};

struct StepOutcome {
  SystemState next_state;
  double reward = 0.0;
  StepEvents events;
};

// round(fluctuation) with negative draws clamped to 0, plus base, floored at 1.
int discretize_delay(int base_slots, double fluctuation_draw);
int sample_update_delay(const DelayModel& model, Rng& rng);
int sample_access_interval(const AccessModel& model, Rng& rng);

// Reward recomputed from a step's events: -(omega * sent + sum of arrived TPAoI).
double reward_from_events(const StepEvents& events, double omega);

inline constexpr double kDefaultObservationScale = 50.0;

// [s1, s2, s3, s4, s5] / scale. Dropping s3 gives the conventional-AoI view.
std::vector<double> encode_observation(const SystemState& state, double scale = kDefaultObservationScale,
                                       bool include_interval = true);
void encode_observation_into(const SystemState& state, double scale, bool include_interval, double* out);
int observation_length(const SimConfig& config, bool include_interval = true);

class Environment {
 public:
  explicit Environment(SimConfig config);

  const SystemState& reset(std::uint64_t seed);
  const SystemState& reset() { return reset(config_.seed); }

  StepOutcome step(int action);

  const SystemState& state() const { return state_; }
  const SimConfig& config() const { return config_; }
  // Index of the slot the next call to step() will process (first slot is 1).
  std::int64_t slot() const { return slot_; }

  void set_trace_enabled(bool enabled) { trace_enabled_ = enabled; }
  const EventTrace& trace() const { return trace_; }

 private:
  struct InFlight {
    std::int64_t send_slot = 0;
    std::int64_t arrival_slot = 0;
  };

  std::optional<int> random_free_index(const std::vector<int>& occupancy);
  void record(std::int64_t slot, EventKind kind, std::vector<std::int64_t> payload);

  SimConfig config_;
  SystemState state_;
  Rng rng_;
  std::int64_t slot_ = 1;
  std::int64_t next_access_slot_ = 0;
  std::vector<InFlight> updates_;
  std::vector<InFlight> requests_;
  std::int64_t last_update_arrival_ = 0;
  std::int64_t last_request_arrival_ = 0;
  bool trace_enabled_ = false;
  EventTrace trace_;
};

}  // namespace tpaoi
