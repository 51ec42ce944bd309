// Copyright 2026 The g2pstudio Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef G2P_AUTODIFF_H_
#define G2P_AUTODIFF_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace g2p {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float64 array.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);  // throws ShapeError

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int axis) const {
    return shape[axis < 0 ? shape.size() + axis : axis];
  }
  double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// A trainable tensor owned by a model. `grad` has the value's shape and is
// accumulated into by Tape::backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v);
  void zero_grad();
};

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::int64_t dim(int axis) const { return value().dim(axis); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so recording
// order is a topological order and backward walks it in reverse.
class Tape {
 public:
  // Receives the node's own output gradient.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  Var leaf(Tensor t);  // requires grad when the tape has grad enabled
  // Binds a parameter without copying; backward adds into p.grad.
  Var param(Parameter& p);
  // Read-only view of a tensor that outlives the tape. Never requires grad.
  Var constant_ref(const Tensor& t);

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, allocated as zeros on first use. Returns
  // nullptr for nodes that do not require grad.
  Tensor* grad_sink(int id);
  // Accumulated gradient of a node after backward; nullptr when none flowed.
  const Tensor* grad(Var v) const;

  // Seeds d loss / d loss = 1 and propagates. Throws ShapeError for a
  // non-scalar loss.
  void backward(Var loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

// Elementwise and structural primitives. All inputs of one call must live
// on the same tape.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var relu(Var a);
Var reshape(Var a, Shape shape);
Var concat_last(Var a, Var b);

// Affine map over the last axis: [..., d_in] x [d_in, d_out] + [d_out].
Var dense(Var input, Var weight, Var bias);

enum class Padding { kSameZero, kCausal };

// input [batch, time, ch_in], kernel [k, ch_in, ch_out], bias [ch_out].
// same_zero centres an odd kernel; causal reads only positions <= t.
Var conv1d(Var input, Var kernel, Var bias, Padding padding);

Var layer_norm(Var input, Var gain, Var shift, double eps = 1e-5);

// Blocked (query, key) pairs. batch == 0 means one [tq, tk] mask shared by
// every batch element; otherwise the layout is [batch, tq, tk].
struct AttentionMask {
  std::int64_t batch = 0;
  std::int64_t tq = 0;
  std::int64_t tk = 0;
  std::vector<std::uint8_t> blocked;

  static AttentionMask causal(std::int64_t t);
  // Blocks keys whose flag in key_padding[b * tk + j] is set.
  static AttentionMask key_padding(std::int64_t batch, std::int64_t tq,
                                   std::int64_t tk,
                                   const std::vector<std::uint8_t>& key_padding);
  // Union of two masks over the same (tq, tk).
  static AttentionMask merge(const AttentionMask& a, const AttentionMask& b);

  bool is_blocked(std::int64_t b, std::int64_t i, std::int64_t j) const {
    return blocked[(batch == 0 ? 0 : b * tq * tk) + i * tk + j] != 0;
  }
  // Repeats each batch element's mask `heads` times (batch b -> b*heads+h).
  AttentionMask repeat_heads(int heads) const;
};

// softmax(Q K^T / sqrt(d) + penalty) V. Throws MaskError when a query row
// has every key blocked.
Var scaled_dot_product_attention(Var q, Var k, Var v,
                                 const AttentionMask* mask = nullptr);

// [B, T, H*dh] <-> [B*H, T, dh].
Var split_heads(Var x, int heads);
Var merge_heads(Var x, int heads);

struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

// Projected attention over `heads` heads, concatenated and projected back.
// Throws ConfigError when d_model % heads != 0.
Var multi_head_attention(Var x_q, Var x_kv, int heads, int d_model,
                         const AttentionParams& params,
                         const AttentionMask* mask = nullptr);

// Mean negative log-softmax over rows whose target != pad_id. logits is
// [..., classes] with one target per leading row. Throws LossError when
// every target is padding.
Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                          int pad_id);

// Row lookup: table [vocab, d], ids laid out as ids_shape.
Var embedding(Var table, std::span<const int> ids, const Shape& ids_shape);

// Inverted dropout; identity when !training or rate == 0.
Var dropout(Var x, double rate, std::mt19937_64& rng, bool training);

enum class OptimizerKind { kAdam, kRmsprop };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct OptimizerState {
  std::vector<double> first;   // Adam m
  std::vector<double> second;  // Adam v / RMSprop mean square
  long steps = 0;
};

struct OptimizerHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double eps = 1e-8;
};

// One in-place update of `params`. Throws NumericalError on a NaN gradient.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, OptimizerKind kind, double lr,
                    const OptimizerHyper& hyper = {});

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  // Applies one step to every parameter using its accumulated grad.
  void step(std::vector<Parameter>& params);
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<OptimizerState> states_;
};

}  // namespace g2p

#endif  // G2P_AUTODIFF_H_
