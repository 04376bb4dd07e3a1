#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tpaoi/agent.hpp"
#include "tpaoi/sim_env.hpp"

namespace tpaoi {

struct Transition {
  int next = 0;
  double prob = 0.0;
};

// Finite MDP with sparse transition rows. Row (s, a) lives at s * num_actions + a.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 2;
  std::vector<std::vector<Transition>> transitions;
  std::vector<double> rewards;

  int row(int s, int a) const { return s * num_actions + a; }
  void validate(double tol = 1e-9) const;
};

struct QaoiCaps {
  int aoi_cap = 100;
  int interval_cap = 60;
};

// QAoI state (a, k): a is the AoI observed at the start of the slot (0 when an
// update went out last slot, since it lands immediately), k is s3.
// Access in the slot happens with probability h(k); the AoI charged then is a + 1.
class QaoiStateSpace {
 public:
  explicit QaoiStateSpace(QaoiCaps caps = {});

  int index(int aoi, int interval) const;
  int aoi_of(int s) const { return s / interval_cap(); }
  int interval_of(int s) const { return s % interval_cap() + 1; }
  int size() const { return (caps_.aoi_cap + 1) * caps_.interval_cap; }
  int aoi_cap() const { return caps_.aoi_cap; }
  int interval_cap() const { return caps_.interval_cap; }
  const QaoiCaps& caps() const { return caps_; }

 private:
  QaoiCaps caps_;
};

// P(interval = k | interval >= k) for k = 1..cap, index 0 unused.
// Entries past the support (negligible survival) are 1.
std::vector<double> access_hazard(const AccessModel& model, int interval_cap);

TabularMdp build_qaoi_mdp(const AccessModel& access, double omega, QaoiCaps caps = {});

struct PolicyIterationResult {
  std::vector<int> policy;
  std::vector<double> values;
  int rounds = 0;
};

struct PolicyIterationOptions {
  double tol = 1e-9;
  int max_sweeps = 1'000'000;
  int max_rounds = 10'000;
  // Q-values within this margin count as tied; ties go to the highest action.
  double tie_margin = 1e-7;
};

// Iterative evaluation to `tol` alternated with greedy improvement.
PolicyIterationResult policy_iteration(const TabularMdp& mdp, double gamma, std::vector<int> initial = {},
                                       const PolicyIterationOptions& opts = {});

// Value of a fixed deterministic policy, iterated to tol.
std::vector<double> evaluate_tabular(const TabularMdp& mdp, double gamma, const std::vector<int>& policy,
                                     const PolicyIterationOptions& opts = {});

class TabularPolicy final : public Policy {
 public:
  TabularPolicy(QaoiStateSpace space, std::vector<int> actions);

  int action_at(int aoi, int interval) const;
  // Maps (s2, s3) onto the table, saturating at the caps.
  int act(const SystemState& state, Rng& rng) override;

  const QaoiStateSpace& space() const { return space_; }
  const std::vector<int>& actions() const { return actions_; }

 private:
  QaoiStateSpace space_;
  std::vector<int> actions_;
};

// The base policy sees an interval coordinate `offset` slots further along, so
// sends fire roughly `offset` slots earlier than QAoI would.
class AdjustedQaoiPolicy final : public Policy {
 public:
  AdjustedQaoiPolicy(TabularPolicy base, int offset);
  int act(const SystemState& state, Rng& rng) override;
  int offset() const { return offset_; }

 private:
  TabularPolicy base_;
  int offset_;
};

inline constexpr int kDefaultQaoiOffset = 12;

struct QaoiSolution {
  TabularPolicy policy;
  std::vector<double> values;
  int rounds = 0;
};

QaoiSolution solve_qaoi(const AccessModel& access, double omega, double gamma = 0.995, QaoiCaps caps = {});

TrainResult train_conventional_aoi_agent(const TrainConfig& cfg, const SimConfig& sim,
                                         const ProgressFn& progress = {});

RunRecord deploy_in_tpaoi_env(Policy& policy, const SimConfig& sim, int episodes, std::uint64_t seed);

// CSV with header aoi,interval,action over the full grid.
void save_policy_csv(std::ostream& out, const TabularPolicy& policy);
TabularPolicy load_policy_csv(std::istream& in);

}  // namespace tpaoi
