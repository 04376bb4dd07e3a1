#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "tpaoi/rng.hpp"

namespace tpaoi {

// Dueling Q-network layout. With a shared trunk the value and advantage heads
// both read the trunk output; otherwise each head owns a copy of the trunk stack.
struct NetworkShape {
  int input_dim = 6;
  std::vector<int> trunk_hidden{128, 512, 256};
  std::vector<int> head_hidden{128};
  int num_actions = 2;
  bool shared_trunk = true;

  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

enum class Stack { Trunk, Value, Advantage };

struct LayerSlot {
  Stack stack = Stack::Trunk;
  int in = 0;
  int out = 0;
  bool relu = true;
  int input_layer = -1;  // index of the layer feeding this one; -1 = observation
  std::size_t weight_offset = 0;  // in x out, row-major
  std::size_t bias_offset = 0;
};

// Flat parameter vector plus the layer table that indexes into it. The same
// type doubles as the gradient structure.
class QNetworkParams {
 public:
  QNetworkParams() = default;
  explicit QNetworkParams(NetworkShape shape);

  const NetworkShape& shape() const { return shape_; }
  std::span<const LayerSlot> layers() const { return layers_; }
  std::vector<const LayerSlot*> stack(Stack which) const;

  std::span<double> weights(const LayerSlot& l) { return {values_.data() + l.weight_offset, weight_count(l)}; }
  std::span<const double> weights(const LayerSlot& l) const {
    return {values_.data() + l.weight_offset, weight_count(l)};
  }
  std::span<double> bias(const LayerSlot& l) { return {values_.data() + l.bias_offset, static_cast<std::size_t>(l.out)}; }
  std::span<const double> bias(const LayerSlot& l) const {
    return {values_.data() + l.bias_offset, static_cast<std::size_t>(l.out)};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  void set_zero();
  bool same_layout(const QNetworkParams& other) const { return shape_ == other.shape_; }
  bool operator==(const QNetworkParams& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  static std::size_t weight_count(const LayerSlot& l) {
    return static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out);
  }

  NetworkShape shape_;
  std::vector<LayerSlot> layers_;
  std::vector<double> values_;
};

std::size_t parameter_count(const NetworkShape& shape);

// Fan-in scaled uniform weights (bound sqrt(6 / fan_in)), zero biases.
QNetworkParams init_params(const NetworkShape& shape, Rng& rng);

// Reusable activation buffers for batched passes.
class Workspace {
 public:
  std::vector<std::vector<double>> activations;  // per layer output, rows x out
  std::vector<std::vector<double>> deltas;       // per layer output gradient
  std::vector<double> scratch_a;
  std::vector<double> scratch_b;
  std::vector<double> value;       // rows
  std::vector<double> advantage;   // rows x A
  std::vector<double> q;           // rows x A
  int rows = 0;
};

// Batched forward pass: obs is rows x input_dim. Returns Q (rows x A) as a
// view into the workspace.
std::span<const double> forward_batch(const QNetworkParams& params, std::span<const double> obs, int rows,
                                      Workspace& ws);

std::vector<double> forward(const QNetworkParams& params, std::span<const double> obs);

struct HeadOutputs {
  double value = 0.0;
  std::vector<double> advantage;
  std::vector<double> q;
};
HeadOutputs forward_heads(const QNetworkParams& params, std::span<const double> obs);

// Back-propagates dQ (rows x A, already scaled) through the most recent
// forward_batch held in `ws`, accumulating into grad.
void backward_batch(const QNetworkParams& params, std::span<const double> obs, std::span<const double> dq,
                    Workspace& ws, QNetworkParams& grad);

// d/dtheta of 0.5 * (Q(obs, action) - target)^2.
QNetworkParams gradient(const QNetworkParams& params, std::span<const double> obs, int action, double target);

// Mean over the batch of per-sample gradients of 0.5 * (Q - y)^2; returns the
// mean squared TD error measured before any update.
double batch_gradient(const QNetworkParams& params, std::span<const double> obs, int rows,
                      std::span<const int> actions, std::span<const double> targets, QNetworkParams& grad,
                      Workspace& ws);

// theta <- theta - eta * grad
void sgd_step(QNetworkParams& params, const QNetworkParams& grad, double eta);

// target <- tau * online + (1 - tau) * target
void soft_update(QNetworkParams& target, const QNetworkParams& online, double tau);

void save_checkpoint(std::ostream& out, const QNetworkParams& params);
QNetworkParams load_checkpoint(std::istream& in);

}  // namespace tpaoi
