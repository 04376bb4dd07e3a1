#include "tpaoi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tpaoi/errors.hpp"

namespace tpaoi {

void TabularMdp::validate(double tol) const {
  if (num_states < 1 || num_actions < 1) throw ShapeError("tabular MDP needs states and actions");
  const auto rows = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions);
  if (transitions.size() != rows || rewards.size() != rows) throw ShapeError("tabular MDP tables have the wrong size");
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (const auto& t : transitions[r]) {
      if (t.next < 0 || t.next >= num_states) throw ShapeError("transition points outside the state space");
      if (!(t.prob >= 0.0)) throw NumericError("negative transition probability");
      sum += t.prob;
    }
    if (std::abs(sum - 1.0) > tol) throw NumericError("transition row does not sum to 1");
    if (!std::isfinite(rewards[r])) throw NumericError("non-finite reward");
  }
}

QaoiStateSpace::QaoiStateSpace(QaoiCaps caps) : caps_(caps) {
  if (caps_.aoi_cap < 1 || caps_.interval_cap < 1) throw ConfigError("QAoI caps must be >= 1");
}

int QaoiStateSpace::index(int aoi, int interval) const {
  if (aoi < 0 || aoi > caps_.aoi_cap || interval < 1 || interval > caps_.interval_cap)
    throw ArgumentError("QAoI state out of range");
  return aoi * caps_.interval_cap + (interval - 1);
}

std::vector<double> access_hazard(const AccessModel& model, int interval_cap) {
  model.validate();
  if (interval_cap < 1) throw ConfigError("interval cap must be >= 1");
  std::vector<double> pmf(static_cast<std::size_t>(interval_cap) + 1, 0.0);
  double below_cap = 0.0;
  for (int k = model.base_interval; k <= interval_cap; ++k) {
    const int j = k - model.base_interval;
    double p = 0.0;
    if (model.lambda == 0.0) {
      p = j == 0 ? 1.0 : 0.0;
    } else {
      p = std::exp(j * std::log(model.lambda) - model.lambda - std::lgamma(j + 1.0));
    }
    pmf[static_cast<std::size_t>(k)] = p;
    below_cap += p;
  }
  if (below_cap <= 0.0) throw ConfigError("access model puts no mass below the interval cap");

  std::vector<double> h(pmf.size(), 1.0);
  h[0] = 0.0;
  double survival = 1.0;
  for (int k = 1; k <= interval_cap; ++k) {
    const double p = pmf[static_cast<std::size_t>(k)];
    if (survival > 1e-300) h[static_cast<std::size_t>(k)] = std::clamp(p / survival, 0.0, 1.0);
    survival = std::max(0.0, survival - p);
  }
  // The cap absorbs the remaining tail.
  h[static_cast<std::size_t>(interval_cap)] = 1.0;
  return h;
}

TabularMdp build_qaoi_mdp(const AccessModel& access, double omega, QaoiCaps caps) {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be finite and >= 0");
  const QaoiStateSpace space(caps);
  const auto h = access_hazard(access, caps.interval_cap);

  TabularMdp mdp;
  mdp.num_states = space.size();
  mdp.num_actions = 2;
  mdp.transitions.resize(static_cast<std::size_t>(mdp.num_states) * 2);
  mdp.rewards.resize(mdp.transitions.size());
  for (int s = 0; s < mdp.num_states; ++s) {
    const int a = space.aoi_of(s);
    const int k = space.interval_of(s);
    const double hk = h[static_cast<std::size_t>(k)];
    const int k_stay = std::min(k + 1, caps.interval_cap);
    for (int x = 0; x < 2; ++x) {
      const int a_next = x == 1 ? 0 : std::min(a + 1, caps.aoi_cap);
      auto& row = mdp.transitions[static_cast<std::size_t>(mdp.row(s, x))];
      if (hk > 0.0) row.push_back({space.index(a_next, 1), hk});
      if (hk < 1.0) row.push_back({space.index(a_next, k_stay), 1.0 - hk});
      mdp.rewards[static_cast<std::size_t>(mdp.row(s, x))] = -(omega * x + hk * (a + 1));
    }
  }
  return mdp;
}

namespace {

double q_value(const TabularMdp& mdp, double gamma, const std::vector<double>& v, int s, int a) {
  const auto r = static_cast<std::size_t>(mdp.row(s, a));
  double q = mdp.rewards[r];
  for (const auto& t : mdp.transitions[r]) q += gamma * t.prob * v[static_cast<std::size_t>(t.next)];
  return q;
}

void check_policy(const TabularMdp& mdp, const std::vector<int>& policy) {
  if (policy.size() != static_cast<std::size_t>(mdp.num_states)) throw ShapeError("policy has the wrong length");
  for (int a : policy)
    if (a < 0 || a >= mdp.num_actions) throw ArgumentError("policy action out of range");
}

// Gauss-Seidel sweeps starting from v.
void evaluate_into(const TabularMdp& mdp, double gamma, const std::vector<int>& policy, std::vector<double>& v,
                   const PolicyIterationOptions& opts) {
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double change = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      const double nv = q_value(mdp, gamma, v, s, policy[static_cast<std::size_t>(s)]);
      change = std::max(change, std::abs(nv - v[static_cast<std::size_t>(s)]));
      v[static_cast<std::size_t>(s)] = nv;
    }
    if (!std::isfinite(change)) throw NumericError("policy evaluation produced non-finite values");
    // Sup-norm error bound for a gamma-contraction.
    if (change * gamma / (1.0 - gamma) <= opts.tol) return;
  }
  throw NumericError("policy evaluation did not reach tolerance within " + std::to_string(opts.max_sweeps) +
                     " sweeps");
}

}  // namespace

std::vector<double> evaluate_tabular(const TabularMdp& mdp, double gamma, const std::vector<int>& policy,
                                     const PolicyIterationOptions& opts) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  mdp.validate();
  check_policy(mdp, policy);
  std::vector<double> v(static_cast<std::size_t>(mdp.num_states), 0.0);
  evaluate_into(mdp, gamma, policy, v, opts);
  return v;
}

PolicyIterationResult policy_iteration(const TabularMdp& mdp, double gamma, std::vector<int> initial,
                                       const PolicyIterationOptions& opts) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  mdp.validate();
  PolicyIterationResult res;
  res.policy = initial.empty() ? std::vector<int>(static_cast<std::size_t>(mdp.num_states), 0) : std::move(initial);
  check_policy(mdp, res.policy);
  res.values.assign(static_cast<std::size_t>(mdp.num_states), 0.0);

  for (res.rounds = 1; res.rounds <= opts.max_rounds; ++res.rounds) {
    evaluate_into(mdp, gamma, res.policy, res.values, opts);
    bool stable = true;
    for (int s = 0; s < mdp.num_states; ++s) {
      int best = 0;
      double best_q = q_value(mdp, gamma, res.values, s, 0);
      for (int a = 1; a < mdp.num_actions; ++a) {
        const double q = q_value(mdp, gamma, res.values, s, a);
        if (q >= best_q - opts.tie_margin) {
          best = a;
          best_q = std::max(q, best_q);
        }
      }
      if (best != res.policy[static_cast<std::size_t>(s)]) {
        res.policy[static_cast<std::size_t>(s)] = best;
        stable = false;
      }
    }
    if (stable) return res;
  }
  throw NumericError("policy iteration did not stabilise within " + std::to_string(opts.max_rounds) + " rounds");
}

TabularPolicy::TabularPolicy(QaoiStateSpace space, std::vector<int> actions)
    : space_(space), actions_(std::move(actions)) {
  if (actions_.size() != static_cast<std::size_t>(space_.size())) throw ShapeError("policy table has the wrong size");
}

int TabularPolicy::action_at(int aoi, int interval) const {
  return actions_[static_cast<std::size_t>(space_.index(aoi, interval))];
}

int TabularPolicy::act(const SystemState& state, Rng&) {
  const int a = std::clamp(state.s2, 0, space_.aoi_cap());
  const int k = std::clamp(state.s3, 1, space_.interval_cap());
  return action_at(a, k);
}

AdjustedQaoiPolicy::AdjustedQaoiPolicy(TabularPolicy base, int offset) : base_(std::move(base)), offset_(offset) {
  if (offset < 0) throw ConfigError("adjusted QAoI offset must be >= 0");
}

int AdjustedQaoiPolicy::act(const SystemState& state, Rng& rng) {
  SystemState shifted = state;
  shifted.s3 = std::min(state.s3 + offset_, base_.space().interval_cap());
  return base_.act(shifted, rng);
}

QaoiSolution solve_qaoi(const AccessModel& access, double omega, double gamma, QaoiCaps caps) {
  const auto mdp = build_qaoi_mdp(access, omega, caps);
  auto pi = policy_iteration(mdp, gamma);
  return {TabularPolicy(QaoiStateSpace(caps), std::move(pi.policy)), std::move(pi.values), pi.rounds};
}

TrainResult train_conventional_aoi_agent(const TrainConfig& cfg, const SimConfig& sim, const ProgressFn& progress) {
  return train(cfg, sim, AgentVariant::conventional_aoi(), progress);
}

RunRecord deploy_in_tpaoi_env(Policy& policy, const SimConfig& sim, int episodes, std::uint64_t seed) {
  return evaluate_policy(policy, sim, episodes, seed);
}

void save_policy_csv(std::ostream& out, const TabularPolicy& policy) {
  const auto& space = policy.space();
  out << "aoi,interval,action\n";
  for (int a = 0; a <= space.aoi_cap(); ++a)
    for (int k = 1; k <= space.interval_cap(); ++k) out << a << ',' << k << ',' << policy.action_at(a, k) << '\n';
}

TabularPolicy load_policy_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "aoi,interval,action") throw ConfigError("policy CSV header must be aoi,interval,action");
  struct Row {
    int aoi, interval, action;
  };
  std::vector<Row> rows;
  int max_aoi = -1;
  int max_interval = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row r{};
    char c1 = 0, c2 = 0;
    if (!(ss >> r.aoi >> c1 >> r.interval >> c2 >> r.action) || c1 != ',' || c2 != ',')
      throw ConfigError("malformed policy CSV row: " + line);
    if (r.aoi < 0 || r.interval < 1 || (r.action != 0 && r.action != 1))
      throw ConfigError("policy CSV row out of range: " + line);
    max_aoi = std::max(max_aoi, r.aoi);
    max_interval = std::max(max_interval, r.interval);
    rows.push_back(r);
  }
  if (rows.empty()) throw EmptyDataError("policy CSV has no rows");
  const QaoiStateSpace space({max_aoi, max_interval});
  std::vector<int> actions(static_cast<std::size_t>(space.size()), -1);
  for (const auto& r : rows) {
    auto& slot = actions[static_cast<std::size_t>(space.index(r.aoi, r.interval))];
    if (slot != -1) throw ConfigError("duplicate policy CSV state");
    slot = r.action;
  }
  if (std::find(actions.begin(), actions.end(), -1) != actions.end())
    throw ConfigError("policy CSV does not cover the full state grid");
  return TabularPolicy(space, std::move(actions));
}

}  // namespace tpaoi
