// Acceptance gate: one PASS/FAIL line per criterion. Trained agents are cached
// by configuration hash, so criteria that share a grid point train it once.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "properties.hpp"
#include "tpaoi/agent.hpp"
#include "tpaoi/baselines.hpp"
#include "tpaoi/errors.hpp"
#include "tpaoi/harness.hpp"
#include "tpaoi/metrics.hpp"

using namespace tpaoi;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Verdict equation_oracles() {
  Rng rng(2024);
  std::ostringstream why;
  int bad = 0;

  for (int i = 0; i < 1000; ++i) {
    const auto trace = oracle::random_update_trace(rng, 150);
    if (conventional_aoi_series(trace, 150) != oracle::aoi_by_definition(trace, 150)) ++bad;
  }
  if (bad) why << bad << " AoI traces disagree; ";
  const int aoi_bad = bad;

  std::uniform_int_distribution<int> gap(0, 40);
  int tuple_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t u = gap(rng), ua = u + gap(rng), q = ua + gap(rng), qa = q + gap(rng);
    if (tpaoi_of_request(u, ua, q, qa) != qa - u) ++tuple_bad;
  }
  if (tuple_bad) why << tuple_bad << " request tuples disagree; ";

  NetworkShape shape;
  shape.trunk_hidden = {16, 32};
  shape.head_hidden = {8};
  double worst_dueling = 0.0, worst_target = 0.0;
  int convex_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto on = oracle::random_network(shape, rng);
    const auto tg = oracle::random_network(shape, rng);
    std::vector<double> s(6), s2(6);
    for (auto& x : s) x = uniform01(rng);
    for (auto& x : s2) x = uniform01(rng);
    const auto h = forward_heads(on, s);
    worst_dueling = std::max(worst_dueling, std::abs(0.5 * (h.q[0] + h.q[1]) - h.value));

    const Experience e{s, i % 2, s2, -10.0 * uniform01(rng)};
    const auto qn = oracle::forward(on, s2).q;
    const auto qt = oracle::forward(tg, s2).q;
    const double y = e.reward + 0.995 * qt[qn[1] > qn[0] ? 1 : 0];
    worst_target = std::max(worst_target, std::abs(td_target(tg, on, e, 0.995) - y));

    auto mixed = tg;
    const double tau = uniform01(rng);
    soft_update(mixed, on, tau);
    for (std::size_t k = 0; k < mixed.size(); ++k) {
      const double want = tau * on.values()[k] + (1 - tau) * tg.values()[k];
      if (std::abs(mixed.values()[k] - want) > 1e-12) {
        ++convex_bad;
        break;
      }
    }
  }
  if (worst_dueling > 1e-10) why << "dueling mean Q - V = " << worst_dueling << "; ";
  if (worst_target > 1e-9) why << "TD target off by " << worst_target << "; ";
  if (convex_bad) why << convex_bad << " soft updates not convex; ";

  TrainConfig cfg;
  double eps = cfg.epsilon;
  bool floor_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const double next = decay_epsilon(eps, cfg);
    if (next > eps || next < cfg.epsilon_min) floor_ok = false;
    eps = next;
  }
  if (!floor_ok || eps != cfg.epsilon_min) why << "epsilon decay not a monotone floor; ";

  const bool pass = aoi_bad == 0 && tuple_bad == 0 && worst_dueling <= 1e-10 && worst_target <= 1e-9 &&
                    convex_bad == 0 && floor_ok && eps == cfg.epsilon_min;
  if (pass) why << "1000 traces, 1000 tuples, 200 networks; max |meanQ - V| = " << worst_dueling;
  return {pass, why.str()};
}

Verdict gradient_check() {
  Rng rng(99);
  NetworkShape shape;
  shape.input_dim = 2;
  shape.trunk_hidden = {4};
  shape.head_hidden = {};
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_network(shape, rng);
    const std::vector<double> obs{uniform01(rng) * 2 - 1, uniform01(rng) * 2 - 1};
    const double target = uniform01(rng) * 4 - 2;
    const auto g = gradient(p, obs, i % 2, target);
    worst = std::max(worst, oracle::max_relative_error(g.values(), oracle::finite_difference_gradient(p, obs, i % 2, target)));
  }
  return {worst < 1e-4, "20 networks, max relative error " + fmt("%.3g", worst)};
}

Verdict simulator_invariants() {
  const auto f = props::run_suite(1000, 31337);
  return {!f, f ? f.what : "1000 random configurations and action sequences"};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

struct PolicyStats {
  double tpaoi = 0.0;
  double updates = 0.0;
};

PolicyStats stats_at(const std::vector<SummaryRow>& rows, const GridPoint& p, const std::string& policy) {
  const auto* r = find_row(rows, p, policy);
  if (!r) throw SetupError("missing summary row for " + policy);
  return {r->mean_tpaoi, static_cast<double>(r->update_count)};
}

void write_rows(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  write_summary_csv(out, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate"};
  std::string cache = "acceptance_cache";
  std::string out_dir = "acceptance_out";
  app.add_option("--cache", cache, "trained-agent cache directory");
  app.add_option("--out", out_dir, "directory for summary CSVs");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(out_dir);
  int failures = 0;
  const auto report = [&](int id, const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " C" << id << " " << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
  };
  const auto log = [](const std::string& m) { std::cerr << m << std::endl; };
  const auto t0 = std::chrono::steady_clock::now();

  report(1, "equation oracles", equation_oracles());
  report(2, "gradient correctness", gradient_check());
  report(3, "simulator invariants", simulator_invariants());

  auto spec = default_spec(Scale::Desk);
  spec.lambdas = {0.1, 0.5, 1.0};
  spec.fluctuations = {"exp"};
  spec.omegas = {0.1, 0.4, 0.7, 1.0};
  spec.n_values = {1, 2, 4};
  spec.ablation_lambda = 1.0;
  spec.ablation_n_omega = 0.1;
  spec.replications = 3;
  spec.output_dir = out_dir;
  spec.cache_dir = cache;

  try {
    const auto grid = run_grid(spec, experiment_points(spec),
                               {kPolicyTpaoi, kPolicyConAoi, kPolicyQaoi, kPolicyAdjustedQaoi}, log);
    const auto rows = summarize(grid.cells);
    write_rows(fs::path(out_dir) / "grid_summary.csv", rows);

    std::vector<double> agent, qaoi, con, agent_upd, con_upd;
    std::ostringstream per_point;
    for (const auto& p : grid.points) {
      const auto a = stats_at(rows, p, kPolicyTpaoi);
      const auto q = stats_at(rows, p, kPolicyQaoi);
      const auto c = stats_at(rows, p, kPolicyConAoi);
      agent.push_back(a.tpaoi);
      qaoi.push_back(q.tpaoi);
      con.push_back(c.tpaoi);
      agent_upd.push_back(a.updates);
      con_upd.push_back(c.updates);
      per_point << " l=" << p.lambda << ":" << fmt("%.2f", a.tpaoi) << "/" << fmt("%.2f", q.tpaoi) << "/"
                << fmt("%.2f", c.tpaoi);
    }

    const double reduction = 1.0 - mean_of(agent) / mean_of(qaoi);
    report(4, "TPAoI vs QAoI",
           {reduction >= 0.25, "TPAoI reduction " + fmt("%.1f%%", 100 * reduction) + " (need >= 25%); agent/qaoi/con_aoi" +
                                   per_point.str()});

    const double fewer = 1.0 - mean_of(agent_upd) / mean_of(con_upd);
    const double excess = mean_of(agent) / mean_of(con) - 1.0;
    report(5, "TPAoI vs Con. AoI",
           {fewer >= 0.25 && excess <= 0.10, "updates " + fmt("%.1f%%", 100 * fewer) + " fewer (need >= 25%), TPAoI " +
                                                 fmt("%+.1f%%", 100 * excess) + " vs Con. AoI (need <= +10%)"});

    std::vector<double> gaps;
    std::ostringstream gap_detail;
    for (const auto& p : grid.points) {
      if (p.lambda != 0.5 && p.lambda != 1.0) continue;
      const double g = std::abs(stats_at(rows, p, kPolicyTpaoi).tpaoi - stats_at(rows, p, kPolicyAdjustedQaoi).tpaoi);
      gaps.push_back(g);
      gap_detail << " l=" << p.lambda << ":" << fmt("%.2f", g);
    }
    const double gap = mean_of(gaps);
    report(6, "adjusted QAoI alignment",
           {gap <= 2.0, "mean |agent - adjusted QAoI| " + fmt("%.2f", gap) + " slots (need <= 2.0);" + gap_detail.str()});

    const auto w = run_grid(spec, omega_points(spec), {kPolicyTpaoi}, log);
    const auto w_rows = summarize(w.cells);
    write_rows(fs::path(out_dir) / "omega_summary.csv", w_rows);
    std::vector<double> omegas, w_upa, w_aoi;
    for (const auto& r : w_rows) {
      omegas.push_back(r.point.omega);
      w_upa.push_back(r.updates_per_access);
      w_aoi.push_back(r.mean_tpaoi);
    }
    const auto n = run_grid(spec, concurrency_points(spec), {kPolicyTpaoi}, log);
    const auto n_rows = summarize(n.cells);
    write_rows(fs::path(out_dir) / "n_summary.csv", n_rows);
    std::vector<double> ns, n_aoi;
    for (const auto& r : n_rows) {
      ns.push_back(r.point.n);
      n_aoi.push_back(r.mean_tpaoi);
    }
    const double rho_upa = spearman_rho(omegas, w_upa);
    const double rho_aoi = spearman_rho(omegas, w_aoi);
    const double rho_n = spearman_rho(ns, n_aoi);
    report(7, "ablation trends",
           {rho_upa <= -0.8 && rho_aoi >= 0.8 && rho_n <= -0.8,
            "rho(omega, updates/access) " + fmt("%.2f", rho_upa) + " (need <= -0.8), rho(omega, TPAoI) " +
                fmt("%.2f", rho_aoi) + " (need >= 0.8), rho(N, TPAoI) " + fmt("%.2f", rho_n) + " (need <= -0.8)"});

    // Every lambda = 1 replication must settle, not just the luckiest one.
    double worst_ratio = 0.0;
    std::ostringstream conv;
    for (const auto& a : grid.agents) {
      if (a.policy != kPolicyTpaoi || a.point.lambda != 1.0) continue;
      const auto ma = moving_average(a.result.rewards(), spec.curve_window);
      const std::size_t start = ma.size() - ma.size() / 3;
      const std::vector<double> tail(ma.begin() + static_cast<std::ptrdiff_t>(start), ma.end());
      const double m = mean_of(tail);
      double var = 0.0;
      for (double x : tail) var += (x - m) * (x - m);
      const double sd = std::sqrt(var / static_cast<double>(tail.size()));
      const double ratio = sd / std::abs(m);
      worst_ratio = std::max(worst_ratio, ratio);
      conv << " seed " << a.seed << ":" << fmt("%.3f", ratio);
    }
    report(8, "convergence", {worst_ratio <= 0.15, "final-third sd/|mean| of MA-100 reward, worst " +
                                                       fmt("%.3f", worst_ratio) + " (need <= 0.15);" + conv.str()});

    RunRecord pooled;
    for (const auto& c : grid.cells)
      if (c.policy == kPolicyTpaoi && c.point.lambda == 1.0) pooled.append(c.record);
    const auto cells = interval_aoi_histogram(pooled.interval_aoi_pairs, spec.histogram_scaling);
    const int mode = modal_aoi_at_interval(cells, spec.sim.access.base_interval);
    {
      std::ofstream hist(fs::path(out_dir) / "dist_lambda_1.csv");
      write_histogram_csv(hist, cells);
    }
    report(9, "access-distribution shape",
           {mode >= 6 && mode <= 11, "modal AoI at interval " + std::to_string(spec.sim.access.base_interval) +
                                         " is " + std::to_string(mode) + " (need 6..11)"});
  } catch (const std::exception& e) {
    for (int id = 4; id <= 9; ++id) report(id, "learning criteria", {false, std::string("harness error: ") + e.what()});
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "acceptance: " << (9 - failures) << "/9 criteria passed in " << fmt("%.0f", secs) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
