#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "tpaoi/approximator.hpp"
#include "tpaoi/errors.hpp"

using namespace tpaoi;

namespace {

NetworkShape tiny_shape() {
  NetworkShape s;
  s.input_dim = 2;
  s.trunk_hidden = {4};
  s.head_hidden = {};
  s.num_actions = 2;
  return s;
}

std::vector<double> random_obs(Rng& rng, int n) {
  std::vector<double> o(static_cast<std::size_t>(n));
  for (auto& x : o) x = uniform01(rng) * 2.0 - 1.0;
  return o;
}

// Hand-set 1-input network: trunk passes x through, V = 2x, A = [x, 3x].
QNetworkParams contrived() {
  NetworkShape s;
  s.input_dim = 1;
  s.trunk_hidden = {1};
  s.head_hidden = {};
  QNetworkParams p(s);
  for (const auto& l : p.layers()) {
    auto w = p.weights(l);
    if (l.stack == Stack::Trunk) w[0] = 1.0;
    if (l.stack == Stack::Value) w[0] = 2.0;
    if (l.stack == Stack::Advantage) {
      w[0] = 1.0;
      w[1] = 3.0;
    }
  }
  return p;
}

}  // namespace

TEST_CASE("dueling aggregation on hand-set parameters") {
  const auto p = contrived();
  const auto h = forward_heads(p, std::vector<double>{1.0});
  CHECK(h.value == 2.0);
  CHECK(h.advantage == std::vector<double>{1.0, 3.0});
  CHECK(h.q == std::vector<double>{1.0, 3.0});
}

TEST_CASE("equal advantages give Q = V and constant shifts cancel") {
  auto p = contrived();
  for (const auto& l : p.layers()) {
    if (l.stack == Stack::Advantage) {
      p.weights(l)[0] = 1.5;
      p.weights(l)[1] = 1.5;
    }
  }
  const auto h = forward_heads(p, std::vector<double>{1.0});
  CHECK(h.q[0] == h.value);
  CHECK(h.q[1] == h.value);

  auto shifted = contrived();
  const auto before = forward(shifted, std::vector<double>{0.7});
  for (const auto& l : shifted.layers())
    if (l.stack == Stack::Advantage)
      for (auto& b : shifted.bias(l)) b += 11.0;
  const auto after = forward(shifted, std::vector<double>{0.7});
  CHECK(after[0] == doctest::Approx(before[0]).epsilon(1e-14));
  CHECK(after[1] == doctest::Approx(before[1]).epsilon(1e-14));
}

TEST_CASE("mean of Q equals V on random networks") {
  Rng rng(1);
  NetworkShape s;
  s.trunk_hidden = {16, 32};
  s.head_hidden = {8};
  for (int i = 0; i < 50; ++i) {
    const auto p = oracle::random_network(s, rng);
    const auto obs = random_obs(rng, s.input_dim);
    const auto h = forward_heads(p, obs);
    CHECK(std::abs(0.5 * (h.q[0] + h.q[1]) - h.value) <= 1e-10);
  }
}

TEST_CASE("batched forward matches the per-layer oracle") {
  Rng rng(2);
  for (bool shared : {true, false}) {
    NetworkShape s;
    s.trunk_hidden = {12, 9};
    s.head_hidden = {5};
    s.shared_trunk = shared;
    const auto p = oracle::random_network(s, rng);
    const int rows = 37;
    const auto obs = random_obs(rng, rows * s.input_dim);
    Workspace ws;
    const auto q = forward_batch(p, obs, rows, ws);
    for (int r = 0; r < rows; ++r) {
      std::vector<double> one(obs.begin() + r * s.input_dim, obs.begin() + (r + 1) * s.input_dim);
      const auto ref = oracle::forward(p, one).q;
      CHECK(q[static_cast<std::size_t>(r) * 2] == doctest::Approx(ref[0]).epsilon(1e-12));
      CHECK(q[static_cast<std::size_t>(r) * 2 + 1] == doctest::Approx(ref[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("shape errors") {
  const auto p = contrived();
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(gradient(p, std::vector<double>{1.0}, 2, 0.0), ShapeError);
  QNetworkParams other(tiny_shape());
  auto q = p;
  CHECK_THROWS_AS(sgd_step(q, other, 0.1), ShapeError);
  CHECK_THROWS_AS(soft_update(q, other, 0.1), ShapeError);
  CHECK_THROWS_AS(gradient(p, std::vector<double>{1.0}, 0, std::nan("")), NumericError);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_network(tiny_shape(), rng);
    const auto obs = random_obs(rng, 2);
    const int action = i % 2;
    const double target = uniform01(rng) * 4.0 - 2.0;
    const auto g = gradient(p, obs, action, target);
    const auto fd = oracle::finite_difference_gradient(p, obs, action, target);
    CHECK(oracle::max_relative_error(g.values(), fd) < 1e-4);
  }
}

TEST_CASE("gradient is zero at the target and linear in the residual") {
  Rng rng(4);
  const auto p = oracle::random_network(tiny_shape(), rng);
  const auto obs = random_obs(rng, 2);
  const double q1 = forward(p, obs)[1];
  const auto zero = gradient(p, obs, 1, q1);
  for (double g : zero.values()) CHECK(g == 0.0);

  const auto g1 = gradient(p, obs, 1, q1 - 1.0);
  const auto g3 = gradient(p, obs, 1, q1 - 3.0);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3.values()[i] == doctest::Approx(3.0 * g1.values()[i]));
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  Rng rng(5);
  NetworkShape s;
  s.trunk_hidden = {7, 5};
  s.head_hidden = {3};
  const auto p = oracle::random_network(s, rng);
  const int rows = 9;
  const auto obs = random_obs(rng, rows * s.input_dim);
  std::vector<int> actions(rows);
  std::vector<double> targets(rows);
  for (int i = 0; i < rows; ++i) {
    actions[static_cast<std::size_t>(i)] = i % 2;
    targets[static_cast<std::size_t>(i)] = uniform01(rng);
  }
  QNetworkParams grad(s);
  Workspace ws;
  const double loss = batch_gradient(p, obs, rows, actions, targets, grad, ws);

  QNetworkParams mean(s);
  double loss_ref = 0.0;
  for (int i = 0; i < rows; ++i) {
    std::vector<double> one(obs.begin() + i * s.input_dim, obs.begin() + (i + 1) * s.input_dim);
    const auto g = gradient(p, one, actions[static_cast<std::size_t>(i)], targets[static_cast<std::size_t>(i)]);
    for (std::size_t k = 0; k < g.size(); ++k) mean.values()[k] += g.values()[k] / rows;
    const double r = oracle::forward(p, one).q[static_cast<std::size_t>(actions[static_cast<std::size_t>(i)])] -
                     targets[static_cast<std::size_t>(i)];
    loss_ref += r * r / rows;
  }
  CHECK(loss == doctest::Approx(loss_ref).epsilon(1e-12));
  for (std::size_t k = 0; k < mean.size(); ++k)
    CHECK(grad.values()[k] == doctest::Approx(mean.values()[k]).epsilon(1e-10));
}

TEST_CASE("sgd step") {
  Rng rng(6);
  const auto p0 = oracle::random_network(tiny_shape(), rng);
  QNetworkParams g(tiny_shape());
  auto p = p0;
  sgd_step(p, g, 0.5);
  CHECK(p == p0);

  for (auto& x : g.values()) x = 1.0;
  p = p0;
  sgd_step(p, g, 0.0002);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.values()[i] == doctest::Approx(p0.values()[i] - 0.0002));

  for (auto& x : g.values()) x = uniform01(rng);
  auto half = p0;
  sgd_step(half, g, 0.05);
  sgd_step(half, g, 0.05);
  auto full = p0;
  sgd_step(full, g, 0.1);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(half.values()[i] == doctest::Approx(full.values()[i]));
}

TEST_CASE("soft update") {
  Rng rng(7);
  const auto online = oracle::random_network(tiny_shape(), rng);
  const auto target0 = oracle::random_network(tiny_shape(), rng);

  auto t = target0;
  soft_update(t, online, 1.0);
  CHECK(t == online);
  t = target0;
  soft_update(t, online, 0.0);
  CHECK(t == target0);

  QNetworkParams ones(tiny_shape()), zeros(tiny_shape());
  for (auto& x : ones.values()) x = 1.0;
  soft_update(zeros, ones, 0.001);
  for (double x : zeros.values()) CHECK(x == doctest::Approx(0.001).epsilon(1e-15));

  for (int i = 0; i < 100; ++i) {
    t = target0;
    const double tau = uniform01(rng);
    soft_update(t, online, tau);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double lo = std::min(online.values()[k], target0.values()[k]);
      const double hi = std::max(online.values()[k], target0.values()[k]);
      REQUIRE(t.values()[k] >= lo - 1e-15);
      REQUIRE(t.values()[k] <= hi + 1e-15);
    }
  }
  CHECK_THROWS_AS(soft_update(t, online, 1.5), ArgumentError);
}

TEST_CASE("initialisation") {
  NetworkShape full;
  full.input_dim = 6;
  const std::size_t closed_form = (6 * 128 + 128) + (128 * 512 + 512) + (512 * 256 + 256) + (256 * 128 + 128) +
                                  (128 * 1 + 1) + (256 * 128 + 128) + (128 * 2 + 2);
  CHECK(parameter_count(full) == closed_form);

  Rng a(9), b(9);
  const auto pa = init_params(full, a);
  const auto pb = init_params(full, b);
  CHECK(pa == pb);
  CHECK(pa.size() == closed_form);
  for (const auto& l : pa.layers()) {
    for (double x : pa.bias(l)) CHECK(x == 0.0);
    const double bound = std::sqrt(6.0 / l.in);
    for (double w : pa.weights(l)) REQUIRE(std::abs(w) <= bound);
  }
  CHECK(pa.stack(Stack::Value).back()->out == 1);
  CHECK(pa.stack(Stack::Advantage).back()->out == 2);

  NetworkShape split = full;
  split.shared_trunk = false;
  CHECK(parameter_count(split) == QNetworkParams(split).size());

  NetworkShape bad;
  bad.trunk_hidden = {0};
  CHECK_THROWS_AS(QNetworkParams{bad}, ConfigError);
}

TEST_CASE("checkpoints reload bit for bit") {
  Rng rng(10);
  NetworkShape s;
  s.trunk_hidden = {8, 16};
  s.head_hidden = {4};
  const auto p = oracle::random_network(s, rng);
  std::stringstream ss;
  save_checkpoint(ss, p);
  const auto back = load_checkpoint(ss);
  CHECK(back == p);

  std::stringstream junk("not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(junk), ConfigError);
  std::stringstream truncated(ss.str().substr(0, ss.str().size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), ConfigError);
}
