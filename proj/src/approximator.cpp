#include "tpaoi/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tpaoi/errors.hpp"
#include "tpaoi/kernels.hpp"

namespace tpaoi {

void NetworkShape::validate() const {
  if (input_dim < 1) throw ConfigError("network input_dim must be >= 1");
  if (num_actions < 1) throw ConfigError("network num_actions must be >= 1");
  for (int h : trunk_hidden)
    if (h < 1) throw ConfigError("trunk layer widths must be >= 1");
  for (int h : head_hidden)
    if (h < 1) throw ConfigError("head layer widths must be >= 1");
}

QNetworkParams::QNetworkParams(NetworkShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  std::size_t offset = 0;
  auto add = [&](Stack stack, int in, int out, bool relu, int input_layer) {
    LayerSlot l{stack, in, out, relu, input_layer, offset, 0};
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    l.bias_offset = offset;
    offset += static_cast<std::size_t>(out);
    layers_.push_back(l);
    return static_cast<int>(layers_.size()) - 1;
  };

  int trunk_top = -1;
  int trunk_width = shape_.input_dim;
  if (shape_.shared_trunk) {
    for (int h : shape_.trunk_hidden) {
      trunk_top = add(Stack::Trunk, trunk_width, h, true, trunk_top);
      trunk_width = h;
    }
  }
  auto build_head = [&](Stack stack, int outputs) {
    int prev = trunk_top;
    int width = trunk_width;
    if (!shape_.shared_trunk) {
      for (int h : shape_.trunk_hidden) {
        prev = add(stack, width, h, true, prev);
        width = h;
      }
    }
    for (int h : shape_.head_hidden) {
      prev = add(stack, width, h, true, prev);
      width = h;
    }
    add(stack, width, outputs, false, prev);
  };
  build_head(Stack::Value, 1);
  build_head(Stack::Advantage, shape_.num_actions);
  values_.assign(offset, 0.0);
}

std::vector<const LayerSlot*> QNetworkParams::stack(Stack which) const {
  std::vector<const LayerSlot*> out;
  for (const auto& l : layers_)
    if (l.stack == which) out.push_back(&l);
  return out;
}

void QNetworkParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

std::size_t parameter_count(const NetworkShape& shape) {
  std::size_t total = 0;
  auto chain = [&](int from, const std::vector<int>& widths) {
    int in = from;
    for (int w : widths) {
      total += static_cast<std::size_t>(in) * w + w;
      in = w;
    }
    return in;
  };
  if (shape.shared_trunk) {
    const int top = chain(shape.input_dim, shape.trunk_hidden);
    for (int outputs : {1, shape.num_actions}) {
      auto widths = shape.head_hidden;
      widths.push_back(outputs);
      chain(top, widths);
    }
  } else {
    for (int outputs : {1, shape.num_actions}) {
      auto widths = shape.trunk_hidden;
      widths.insert(widths.end(), shape.head_hidden.begin(), shape.head_hidden.end());
      widths.push_back(outputs);
      chain(shape.input_dim, widths);
    }
  }
  return total;
}

QNetworkParams init_params(const NetworkShape& shape, Rng& rng) {
  QNetworkParams params(shape);
  for (const auto& l : params.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : params.weights(l)) w = dist(rng);
  }
  return params;
}

namespace {

const double* layer_input(const LayerSlot& l, std::span<const double> obs, const Workspace& ws) {
  return l.input_layer < 0 ? obs.data() : ws.activations[static_cast<std::size_t>(l.input_layer)].data();
}

int last_layer_of(const QNetworkParams& params, Stack which) {
  int idx = -1;
  const auto layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].stack == which) idx = static_cast<int>(i);
  return idx;
}

}  // namespace

std::span<const double> forward_batch(const QNetworkParams& params, std::span<const double> obs, int rows,
                                      Workspace& ws) {
  const auto& shape = params.shape();
  if (rows < 1 || obs.size() != static_cast<std::size_t>(rows) * shape.input_dim)
    throw ShapeError("observation batch has " + std::to_string(obs.size()) + " values, expected " +
                     std::to_string(rows) + " x " + std::to_string(shape.input_dim));
  const auto layers = params.layers();
  ws.rows = rows;
  ws.activations.resize(layers.size());

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    auto& y = ws.activations[li];
    y.resize(static_cast<std::size_t>(rows) * l.out);
    kernels::broadcast_rows(params.bias(l), rows, y);
    kernels::gemm_accumulate({rows, l.out, l.in, layer_input(l, obs, ws), l.in,
                              params.weights(l).data(), l.out, y.data(), l.out});
    if (l.relu) kernels::relu_inplace(y);
  }

  const int actions = shape.num_actions;
  const auto& v = ws.activations[static_cast<std::size_t>(last_layer_of(params, Stack::Value))];
  const auto& a = ws.activations[static_cast<std::size_t>(last_layer_of(params, Stack::Advantage))];
  ws.value.assign(v.begin(), v.end());
  ws.advantage.assign(a.begin(), a.end());
  ws.q.resize(static_cast<std::size_t>(rows) * actions);
  for (int i = 0; i < rows; ++i) {
    const double* ai = a.data() + static_cast<std::size_t>(i) * actions;
    double mean_a = 0.0;
    for (int j = 0; j < actions; ++j) mean_a += ai[j];
    mean_a /= actions;
    for (int j = 0; j < actions; ++j) ws.q[static_cast<std::size_t>(i) * actions + j] = v[i] + ai[j] - mean_a;
  }
  return ws.q;
}

std::vector<double> forward(const QNetworkParams& params, std::span<const double> obs) {
  Workspace ws;
  const auto q = forward_batch(params, obs, 1, ws);
  return {q.begin(), q.end()};
}

HeadOutputs forward_heads(const QNetworkParams& params, std::span<const double> obs) {
  Workspace ws;
  forward_batch(params, obs, 1, ws);
  return {ws.value.at(0), ws.advantage, ws.q};
}

void backward_batch(const QNetworkParams& params, std::span<const double> obs, std::span<const double> dq,
                    Workspace& ws, QNetworkParams& grad) {
  if (!grad.same_layout(params)) throw ShapeError("gradient layout does not match parameters");
  const int rows = ws.rows;
  const int actions = params.shape().num_actions;
  if (dq.size() != static_cast<std::size_t>(rows) * actions) throw ShapeError("dQ has the wrong size");
  const auto layers = params.layers();
  ws.deltas.resize(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li)
    ws.deltas[li].assign(static_cast<std::size_t>(rows) * layers[li].out, 0.0);

  // Dueling aggregation: Q_j = V + A_j - mean(A).
  auto& dv = ws.deltas[static_cast<std::size_t>(last_layer_of(params, Stack::Value))];
  auto& da = ws.deltas[static_cast<std::size_t>(last_layer_of(params, Stack::Advantage))];
  for (int i = 0; i < rows; ++i) {
    const double* dqi = dq.data() + static_cast<std::size_t>(i) * actions;
    double total = 0.0;
    for (int j = 0; j < actions; ++j) total += dqi[j];
    dv[static_cast<std::size_t>(i)] = total;
    for (int j = 0; j < actions; ++j) da[static_cast<std::size_t>(i) * actions + j] = dqi[j] - total / actions;
  }

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    auto& dy = ws.deltas[li];
    if (l.relu) kernels::relu_backward_inplace(ws.activations[li], dy);
    const double* x = layer_input(l, obs, ws);

    // dW += X^T dY
    ws.scratch_a.resize(static_cast<std::size_t>(l.in) * rows);
    kernels::transpose({x, static_cast<std::size_t>(rows) * l.in}, rows, l.in, ws.scratch_a);
    kernels::gemm_accumulate({l.in, l.out, rows, ws.scratch_a.data(), rows, dy.data(), l.out,
                              grad.weights(l).data(), l.out});
    kernels::column_sums_accumulate(dy, rows, l.out, grad.bias(l));

    // dX += dY W^T
    if (l.input_layer >= 0) {
      ws.scratch_b.resize(static_cast<std::size_t>(l.out) * l.in);
      kernels::transpose(params.weights(l), l.in, l.out, ws.scratch_b);
      auto& dx = ws.deltas[static_cast<std::size_t>(l.input_layer)];
      kernels::gemm_accumulate({rows, l.in, l.out, dy.data(), l.out, ws.scratch_b.data(), l.in, dx.data(), l.in});
    }
  }
}

QNetworkParams gradient(const QNetworkParams& params, std::span<const double> obs, int action, double target) {
  const int actions = params.shape().num_actions;
  if (action < 0 || action >= actions) throw ShapeError("action index out of range");
  if (!std::isfinite(target)) throw NumericError("non-finite regression target");
  Workspace ws;
  const auto q = forward_batch(params, obs, 1, ws);
  const double residual = q[static_cast<std::size_t>(action)] - target;
  if (!std::isfinite(residual)) throw NumericError("non-finite Q value");
  std::vector<double> dq(static_cast<std::size_t>(actions), 0.0);
  dq[static_cast<std::size_t>(action)] = residual;
  QNetworkParams grad(params.shape());
  backward_batch(params, obs, dq, ws, grad);
  return grad;
}

double batch_gradient(const QNetworkParams& params, std::span<const double> obs, int rows,
                      std::span<const int> actions, std::span<const double> targets, QNetworkParams& grad,
                      Workspace& ws) {
  if (actions.size() != static_cast<std::size_t>(rows) || targets.size() != static_cast<std::size_t>(rows))
    throw ShapeError("batch actions/targets do not match the row count");
  const int num_actions = params.shape().num_actions;
  const auto q = forward_batch(params, obs, rows, ws);
  std::vector<double> dq(static_cast<std::size_t>(rows) * num_actions, 0.0);
  double loss = 0.0;
  for (int i = 0; i < rows; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= num_actions) throw ShapeError("action index out of range");
    const double residual = q[static_cast<std::size_t>(i) * num_actions + a] - targets[static_cast<std::size_t>(i)];
    loss += residual * residual;
    dq[static_cast<std::size_t>(i) * num_actions + a] = residual / rows;
  }
  loss /= rows;
  if (!std::isfinite(loss)) throw NumericError("non-finite TD loss");
  if (!grad.same_layout(params)) grad = QNetworkParams(params.shape());
  grad.set_zero();
  backward_batch(params, obs, dq, ws, grad);
  return loss;
}

void sgd_step(QNetworkParams& params, const QNetworkParams& grad, double eta) {
  if (!params.same_layout(grad)) throw ShapeError("sgd_step: gradient layout does not match parameters");
  auto p = params.values();
  const auto g = grad.values();
#pragma omp simd
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * g[i];
}

void soft_update(QNetworkParams& target, const QNetworkParams& online, double tau) {
  if (!target.same_layout(online)) throw ShapeError("soft_update: layouts differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("soft_update: tau must lie in [0, 1]");
  auto t = target.values();
  const auto o = online.values();
#pragma omp simd
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * o[i] + (1.0 - tau) * t[i];
}

namespace {
constexpr const char* kCheckpointMagic = "tpaoi-qnetwork";
constexpr int kCheckpointVersion = 1;

void write_widths(std::ostream& out, const char* key, const std::vector<int>& widths) {
  out << key << ' ' << widths.size();
  for (int w : widths) out << ' ' << w;
  out << '\n';
}

std::vector<int> read_widths(std::istream& in, const std::string& key) {
  std::string got;
  std::size_t n = 0;
  if (!(in >> got >> n) || got != key) throw ConfigError("checkpoint: expected '" + key + "'");
  std::vector<int> widths(n);
  for (auto& w : widths)
    if (!(in >> w)) throw ConfigError("checkpoint: truncated '" + key + "'");
  return widths;
}

template <typename T>
T read_field(std::istream& in, const std::string& key) {
  std::string got;
  T value{};
  if (!(in >> got >> value) || got != key) throw ConfigError("checkpoint: expected '" + key + "'");
  return value;
}
}  // namespace

void save_checkpoint(std::ostream& out, const QNetworkParams& params) {
  const auto& s = params.shape();
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "input_dim " << s.input_dim << '\n';
  out << "num_actions " << s.num_actions << '\n';
  out << "shared_trunk " << (s.shared_trunk ? 1 : 0) << '\n';
  write_widths(out, "trunk_hidden", s.trunk_hidden);
  write_widths(out, "head_hidden", s.head_hidden);
  out << "parameters " << params.size() << '\n';
  char buf[64];
  for (double v : params.values()) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out << buf;
  }
}

QNetworkParams load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) throw ConfigError("not a Q-network checkpoint");
  if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  NetworkShape shape;
  shape.input_dim = read_field<int>(in, "input_dim");
  shape.num_actions = read_field<int>(in, "num_actions");
  shape.shared_trunk = read_field<int>(in, "shared_trunk") != 0;
  shape.trunk_hidden = read_widths(in, "trunk_hidden");
  shape.head_hidden = read_widths(in, "head_hidden");
  const auto count = read_field<std::size_t>(in, "parameters");
  QNetworkParams params(shape);
  if (count != params.size()) throw ConfigError("checkpoint parameter count does not match its shape");
  std::string token;
  for (auto& v : params.values()) {
    if (!(in >> token)) throw ConfigError("checkpoint truncated");
    char* end = nullptr;
    v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ConfigError("checkpoint: bad value '" + token + "'");
  }
  return params;
}

}  // namespace tpaoi
