#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tpaoi/baselines.hpp"
#include "tpaoi/errors.hpp"

using namespace tpaoi;

namespace {

// Exact value of a deterministic policy on a 2-state MDP by solving
// (I - gamma P) v = r with Cramer's rule.
std::array<double, 2> exact_value(const TabularMdp& mdp, double gamma, int a0, int a1) {
  double p[2][2] = {{0, 0}, {0, 0}};
  const int acts[2] = {a0, a1};
  double r[2];
  for (int s = 0; s < 2; ++s) {
    const int row = mdp.row(s, acts[s]);
    r[s] = mdp.rewards[static_cast<std::size_t>(row)];
    for (const auto& t : mdp.transitions[static_cast<std::size_t>(row)]) p[s][t.next] += t.prob;
  }
  const double m00 = 1 - gamma * p[0][0], m01 = -gamma * p[0][1];
  const double m10 = -gamma * p[1][0], m11 = 1 - gamma * p[1][1];
  const double det = m00 * m11 - m01 * m10;
  return {(r[0] * m11 - m01 * r[1]) / det, (m00 * r[1] - m10 * r[0]) / det};
}

TabularMdp toy_mdp() {
  TabularMdp m;
  m.num_states = 2;
  m.transitions = {
      {{0, 0.9}, {1, 0.1}},  // s0, stay
      {{1, 1.0}},            // s0, move
      {{1, 0.8}, {0, 0.2}},  // s1, stay
      {{0, 1.0}},            // s1, move
  };
  m.rewards = {1.0, 0.0, 3.0, -2.0};
  return m;
}

// Position of each interval's first send, counting the access slot as 1.
double mean_first_send_interval(Policy& policy, const SimConfig& sim) {
  Environment env(sim);
  env.reset(sim.seed);
  Rng rng(0);
  std::int64_t access_slot = -1;
  bool sent_this_interval = false;
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < sim.episode_slots; ++k) {
    const std::int64_t t = env.slot();
    const auto out = env.step(policy.act(env.state(), rng));
    if (out.events.user_accessed) {
      access_slot = t;
      sent_this_interval = false;
    }
    if (out.events.update_sent && !sent_this_interval && access_slot >= 0) {
      sum += static_cast<double>(t - access_slot + 1);
      ++n;
      sent_this_interval = true;
    }
  }
  return n == 0 ? 1e9 : sum / n;
}

SimConfig deterministic_sim() {
  SimConfig sim;
  sim.delay = {6, NormalFluctuation{0.0, 0.0}};
  sim.access = {20, 0.0};
  sim.episode_slots = 2000;
  return sim;
}

}  // namespace

TEST_CASE("access hazard") {
  const auto det = access_hazard({20, 0.0}, 60);
  for (int k = 1; k < 20; ++k) CHECK(det[static_cast<std::size_t>(k)] == 0.0);
  CHECK(det[20] == 1.0);

  const auto h = access_hazard({20, 0.1}, 60);
  CHECK(h[20] == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
  CHECK(h[60] == 1.0);
  // Second step: P(X = 1) / P(X >= 1).
  const double p1 = 0.1 * std::exp(-0.1);
  CHECK(h[21] == doctest::Approx(p1 / (1 - std::exp(-0.1))).epsilon(1e-9));
  for (double x : h) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  CHECK_THROWS_AS(access_hazard({70, 0.0}, 60), ConfigError);
}

TEST_CASE("QAoI MDP rows are stochastic") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const double lambda = 3.0 * uniform01(rng);
    const auto mdp = build_qaoi_mdp({20, lambda}, uniform01(rng), {40, 40});
    CHECK_NOTHROW(mdp.validate());
    for (const auto& row : mdp.transitions) {
      double sum = 0.0;
      for (const auto& t : row) sum += t.prob;
      REQUIRE(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("state space indexing") {
  QaoiStateSpace sp;
  CHECK(sp.size() == 101 * 60);
  CHECK(sp.index(0, 1) == 0);
  CHECK(sp.index(3, 7) == 3 * 60 + 6);
  CHECK(sp.aoi_of(sp.index(42, 17)) == 42);
  CHECK(sp.interval_of(sp.index(42, 17)) == 17);
  CHECK_THROWS_AS(sp.index(101, 1), ArgumentError);
  CHECK_THROWS_AS(sp.index(0, 0), ArgumentError);
}

TEST_CASE("policy iteration matches brute force on a toy MDP") {
  const auto mdp = toy_mdp();
  for (double gamma : {0.5, 0.9, 0.99}) {
    std::array<double, 2> best{-1e18, -1e18};
    for (int a0 = 0; a0 < 2; ++a0)
      for (int a1 = 0; a1 < 2; ++a1) {
        const auto v = exact_value(mdp, gamma, a0, a1);
        best[0] = std::max(best[0], v[0]);
        best[1] = std::max(best[1], v[1]);
      }
    const auto r = policy_iteration(mdp, gamma);
    CHECK(r.values[0] == doctest::Approx(best[0]).epsilon(1e-6));
    CHECK(r.values[1] == doctest::Approx(best[1]).epsilon(1e-6));
    const auto v = exact_value(mdp, gamma, r.policy[0], r.policy[1]);
    CHECK(v[0] == doctest::Approx(best[0]).epsilon(1e-6));
    CHECK(v[1] == doctest::Approx(best[1]).epsilon(1e-6));
    const auto fixed = evaluate_tabular(mdp, gamma, r.policy);
    CHECK(fixed[0] == doctest::Approx(v[0]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(policy_iteration(mdp, 1.0), ConfigError);
  PolicyIterationOptions tight;
  tight.max_sweeps = 1;
  CHECK_THROWS_AS(policy_iteration(mdp, 0.99, {}, tight), NumericError);
}

TEST_CASE("free updates make sending optimal everywhere") {
  const auto mdp = build_qaoi_mdp({20, 0.5}, 0.0, {30, 30});
  const auto r = policy_iteration(mdp, 0.95);
  for (int a : r.policy) REQUIRE(a == 1);
}

TEST_CASE("policy iteration ignores its starting policy") {
  const auto mdp = build_qaoi_mdp({20, 0.5}, 1.0, {40, 40});
  const auto never = policy_iteration(mdp, 0.99, std::vector<int>(static_cast<std::size_t>(mdp.num_states), 0));
  const auto always = policy_iteration(mdp, 0.99, std::vector<int>(static_cast<std::size_t>(mdp.num_states), 1));
  CHECK(never.policy == always.policy);
}

TEST_CASE("adjusted QAoI") {
  const auto sol = solve_qaoi({20, 0.0}, 1.0);
  const auto sim = deterministic_sim();
  Rng rng(0);

  AdjustedQaoiPolicy same(sol.policy, 0);
  auto base = sol.policy;
  for (int a = 0; a <= 100; a += 3)
    for (int k = 1; k <= 60; ++k) {
      SystemState s{{0, 0}, a, k, {0}, {0}};
      REQUIRE(same.act(s, rng) == base.act(s, rng));
    }

  // Deterministic access at 20, one-way delay 6: the first send lands at
  // interval slot 8, so the update reaches the AP well ahead of the access.
  AdjustedQaoiPolicy twelve(sol.policy, 12);
  const double at = mean_first_send_interval(twelve, sim);
  CHECK(at >= 8.0);
  CHECK(at <= 9.0);

  double prev = 1e18;
  for (int offset = 0; offset <= 16; offset += 2) {
    AdjustedQaoiPolicy p(sol.policy, offset);
    const double first = mean_first_send_interval(p, sim);
    CHECK(first <= prev);
    prev = first;
  }
  CHECK_THROWS_AS(AdjustedQaoiPolicy(sol.policy, -1), ConfigError);
}

TEST_CASE("policy CSV round-trips") {
  const auto sol = solve_qaoi({20, 1.0}, 1.0, 0.995, {30, 30});
  std::stringstream ss;
  save_policy_csv(ss, sol.policy);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "aoi,interval,action");
  const auto back = load_policy_csv(ss);
  CHECK(back.actions() == sol.policy.actions());
  CHECK(back.space().aoi_cap() == 30);

  std::stringstream partial("aoi,interval,action\n0,1,1\n1,2,0\n");
  CHECK_THROWS_AS(load_policy_csv(partial), ConfigError);
  std::stringstream empty("aoi,interval,action\n");
  CHECK_THROWS_AS(load_policy_csv(empty), EmptyDataError);
}

TEST_CASE("deployment of baselines") {
  SimConfig sim;
  sim.episode_slots = 2000;
  sim.access.lambda = 1.0;

  ConstantPolicy never(0);
  CHECK(deploy_in_tpaoi_env(never, sim, 2, 3).update_count == 0);

  auto sol = solve_qaoi(sim.access, sim.omega);
  const auto q1 = deploy_in_tpaoi_env(sol.policy, sim, 2, 3);
  const auto q2 = deploy_in_tpaoi_env(sol.policy, sim, 2, 3);
  CHECK(q1 == q2);
  CHECK(q1.update_count > 0);
  CHECK(mean_tpaoi(q1) < mean_tpaoi(deploy_in_tpaoi_env(never, sim, 2, 3)));

  TrainConfig cfg;
  cfg.episodes = 0;
  CHECK(network_for(cfg, sim, AgentVariant::conventional_aoi()).input_dim == 5);
  const auto r = train_conventional_aoi_agent(cfg, sim);
  CHECK(r.params.shape().input_dim == 5);
}
