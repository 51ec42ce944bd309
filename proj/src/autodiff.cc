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

#include "g2p/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Dense>

#include "g2p/errors.h"

namespace g2p {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap cmat(const Tensor& t, std::int64_t rows, std::int64_t cols) {
  return ConstMatMap(t.data.data(), rows, cols);
}
MatMap mmat(Tensor& t, std::int64_t rows, std::int64_t cols) {
  return MatMap(t.data.data(), rows, cols);
}
ConstMatMap cmat(const double* p, std::int64_t rows, std::int64_t cols) {
  return ConstMatMap(p, rows, cols);
}
MatMap mmat(double* p, std::int64_t rows, std::int64_t cols) {
  return MatMap(p, rows, cols);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    require(v.valid(), "operation on an unset Var");
    if (tape == nullptr) tape = v.tape();
    require(v.tape() == tape, "operands recorded on different tapes");
  }
  return *tape;
}

Shape with_last(Shape s, std::int64_t last) {
  s.back() = last;
  return s;
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill)
    : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), fill) {
  for (auto d : shape) require(d >= 0, "negative dimension");
}

Tensor::Tensor(Shape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  require(numel(shape) == static_cast<std::int64_t>(data.size()),
          "tensor data does not match shape " + shape_string(shape));
}

double Tensor::item() const {
  require(data.size() == 1, "item() on a non-scalar tensor");
  return data[0];
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

void Parameter::zero_grad() {
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
#ifndef NDEBUG
  const Tensor& v = node.external ? *node.external : node.owned;
  for (double x : v.data) {
    if (!std::isfinite(x)) throw NumericalError("non-finite value recorded");
  }
#endif
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor t) {
  Node n;
  n.owned = std::move(t);
  return push(std::move(n));
}

Var Tape::leaf(Tensor t) {
  Node n;
  n.owned = std::move(t);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = grad_enabled_;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& t) {
  Node n;
  n.external = &t;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) {
      if (nodes_[v.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor* Tape::grad_sink(int id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape);
    n.has_grad = true;
  }
  return &n.grad;
}

const Tensor* Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(Var loss) {
  require(loss.tape() == this, "loss recorded on another tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " +
                     shape_string(value(loss.id()).shape));
  }
  Tensor* seed = grad_sink(loss.id());
  if (seed == nullptr) return;
  seed->data[0] += 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto& dst = n.param->grad.data;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad.data[j];
    }
  }
}

Var add(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  require(a.shape() == b.shape(), "add: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += b.value().data[i];
  }
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    for (int id : {ia, ib}) {
      if (Tensor* s = t.grad_sink(id)) {
        for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += g.data[i];
      }
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  require(a.shape() == b.shape(), "mul: shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] *= b.value().data[i];
  }
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const auto& va = t.value(ia).data;
    const auto& vb = t.value(ib).data;
    if (Tensor* s = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += g.data[i] * vb[i];
    }
    if (Tensor* s = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += g.data[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = same_tape({a});
  Tensor out = a.value();
  for (double& x : out.data) x *= factor;
  int ia = a.id();
  return tape.record(std::move(out), {a}, [ia, factor](Tape& t, const Tensor& g) {
    if (Tensor* s = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += factor * g.data[i];
    }
  });
}

Var sum(Var a) {
  Tape& tape = same_tape({a});
  double total = 0.0;
  for (double x : a.value().data) total += x;
  int ia = a.id();
  return tape.record(Tensor::scalar(total), {a}, [ia](Tape& t, const Tensor& g) {
    if (Tensor* s = t.grad_sink(ia)) {
      for (double& x : s->data) x += g.data[0];
    }
  });
}

Var relu(Var a) {
  Tape& tape = same_tape({a});
  Tensor out = a.value();
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  int ia = a.id();
  return tape.record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    if (Tensor* s = t.grad_sink(ia)) {
      const auto& x = t.value(ia).data;
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (x[i] > 0.0) s->data[i] += g.data[i];
      }
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = same_tape({a});
  require(numel(shape) == a.value().size(),
          "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  Tensor out(std::move(shape), a.value().data);
  int ia = a.id();
  return tape.record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    if (Tensor* s = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += g.data[i];
    }
  });
}

Var concat_last(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(!sa.empty() && sa.size() == sb.size() &&
              std::equal(sa.begin(), sa.end() - 1, sb.begin()),
          "concat_last: leading dims differ");
  const std::int64_t da = sa.back(), db = sb.back();
  const std::int64_t rows = numel(sa) / std::max<std::int64_t>(da, 1);
  Tensor out(with_last(sa, da + db));
  auto o = mmat(out, rows, da + db);
  o.leftCols(da) = cmat(a.value(), rows, da);
  o.rightCols(db) = cmat(b.value(), rows, db);
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib, rows, da, db](Tape& t, const Tensor& g) {
                       auto gm = cmat(g, rows, da + db);
                       if (Tensor* s = t.grad_sink(ia)) mmat(*s, rows, da) += gm.leftCols(da);
                       if (Tensor* s = t.grad_sink(ib)) mmat(*s, rows, db) += gm.rightCols(db);
                     });
}

Var dense(Var input, Var weight, Var bias) {
  Tape& tape = same_tape({input, weight, bias});
  const Shape& xs = input.shape();
  require(!xs.empty() && weight.value().rank() == 2 &&
              weight.dim(0) == xs.back() && bias.value().rank() == 1 &&
              bias.dim(0) == weight.dim(1),
          "dense: input " + shape_string(xs) + ", weight " +
              shape_string(weight.shape()) + ", bias " +
              shape_string(bias.shape()));
  const std::int64_t din = weight.dim(0), dout = weight.dim(1);
  const std::int64_t rows = numel(xs) / std::max<std::int64_t>(din, 1);
  Tensor out(with_last(xs, dout));
  auto y = mmat(out, rows, dout);
  y.noalias() = cmat(input.value(), rows, din) * cmat(weight.value(), din, dout);
  y.rowwise() += ConstVecMap(bias.value().data.data(), dout);
  int ix = input.id(), iw = weight.id(), ib = bias.id();
  return tape.record(
      std::move(out), {input, weight, bias},
      [ix, iw, ib, rows, din, dout](Tape& t, const Tensor& g) {
        auto gm = cmat(g, rows, dout);
        if (Tensor* s = t.grad_sink(ix)) {
          mmat(*s, rows, din).noalias() +=
              gm * cmat(t.value(iw), din, dout).transpose();
        }
        if (Tensor* s = t.grad_sink(iw)) {
          mmat(*s, din, dout).noalias() +=
              cmat(t.value(ix), rows, din).transpose() * gm;
        }
        if (Tensor* s = t.grad_sink(ib)) {
          VecMap(s->data.data(), dout) += gm.colwise().sum();
        }
      });
}

Var conv1d(Var input, Var kernel, Var bias, Padding padding) {
  Tape& tape = same_tape({input, kernel, bias});
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  require(xs.size() == 3 && ks.size() == 3 && ks[1] == xs[2] &&
              bias.value().rank() == 1 && bias.dim(0) == ks[2],
          "conv1d: input " + shape_string(xs) + ", kernel " +
              shape_string(ks) + ", bias " + shape_string(bias.shape()));
  const std::int64_t batch = xs[0], time = xs[1], cin = xs[2];
  const std::int64_t width = ks[0], cout = ks[2];
  require(width >= 1, "conv1d: empty kernel");
  if (padding == Padding::kSameZero) {
    require(width % 2 == 1, "conv1d: same_zero padding needs an odd kernel");
  }
  const std::int64_t offset =
      padding == Padding::kSameZero ? (width - 1) / 2 : width - 1;
  const std::int64_t rows = batch * time;
  const std::int64_t patch = width * cin;

  // im2col: row (b, t) holds input[b, t + j - offset, :] for each tap j.
  auto cols = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(rows * patch), 0.0);
  const double* x = input.value().data.data();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < time; ++t) {
      double* row = cols->data() + (b * time + t) * patch;
      for (std::int64_t j = 0; j < width; ++j) {
        const std::int64_t src = t + j - offset;
        if (src < 0 || src >= time) continue;
        std::copy_n(x + (b * time + src) * cin, cin, row + j * cin);
      }
    }
  }
  Tensor out(Shape{batch, time, cout});
  auto y = mmat(out, rows, cout);
  y.noalias() = cmat(cols->data(), rows, patch) *
                cmat(kernel.value(), patch, cout);
  y.rowwise() += ConstVecMap(bias.value().data.data(), cout);

  int ix = input.id(), ik = kernel.id(), ib = bias.id();
  return tape.record(
      std::move(out), {input, kernel, bias},
      [=](Tape& t, const Tensor& g) {
        auto gm = cmat(g, rows, cout);
        if (Tensor* s = t.grad_sink(ik)) {
          mmat(*s, patch, cout).noalias() +=
              cmat(cols->data(), rows, patch).transpose() * gm;
        }
        if (Tensor* s = t.grad_sink(ib)) {
          VecMap(s->data.data(), cout) += gm.colwise().sum();
        }
        if (Tensor* s = t.grad_sink(ix)) {
          RowMatrix gcols = gm * cmat(t.value(ik), patch, cout).transpose();
          for (std::int64_t b = 0; b < batch; ++b) {
            for (std::int64_t tt = 0; tt < time; ++tt) {
              const double* row = gcols.data() + (b * time + tt) * patch;
              for (std::int64_t j = 0; j < width; ++j) {
                const std::int64_t src = tt + j - offset;
                if (src < 0 || src >= time) continue;
                double* dst = s->data.data() + (b * time + src) * cin;
                for (std::int64_t c = 0; c < cin; ++c) dst[c] += row[j * cin + c];
              }
            }
          }
        }
      });
}

Var layer_norm(Var input, Var gain, Var shift, double eps) {
  Tape& tape = same_tape({input, gain, shift});
  const Shape& xs = input.shape();
  require(!xs.empty() && xs.back() >= 1, "layer_norm: empty last axis");
  const std::int64_t d = xs.back();
  require(gain.value().rank() == 1 && gain.dim(0) == d &&
              shift.value().rank() == 1 && shift.dim(0) == d,
          "layer_norm: gain/shift must be [" + std::to_string(d) + "]");
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be > 0");
  const std::int64_t rows = numel(xs) / d;

  auto xhat = std::make_shared<std::vector<double>>(input.value().data.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xs);
  const double* x = input.value().data.data();
  const double* gn = gain.value().data.data();
  const double* sh = shift.value().data.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double mean = 0.0;
    for (std::int64_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::int64_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mean) * is;
      (*xhat)[r * d + i] = h;
      out.data[r * d + i] = gn[i] * h + sh[i];
    }
  }
  int ix = input.id(), ig = gain.id(), is = shift.id();
  return tape.record(
      std::move(out), {input, gain, shift},
      [=](Tape& t, const Tensor& g) {
        const double* gn = t.value(ig).data.data();
        Tensor* sx = t.grad_sink(ix);
        Tensor* sg = t.grad_sink(ig);
        Tensor* ss = t.grad_sink(is);
        std::vector<double> dh(d);
        for (std::int64_t r = 0; r < rows; ++r) {
          const double* gr = g.data.data() + r * d;
          const double* hr = xhat->data() + r * d;
          if (sg) for (std::int64_t i = 0; i < d; ++i) sg->data[i] += gr[i] * hr[i];
          if (ss) for (std::int64_t i = 0; i < d; ++i) ss->data[i] += gr[i];
          if (!sx) continue;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::int64_t i = 0; i < d; ++i) {
            dh[i] = gr[i] * gn[i];
            mean_dh += dh[i];
            mean_dh_h += dh[i] * hr[i];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          double* dst = sx->data.data() + r * d;
          for (std::int64_t i = 0; i < d; ++i) {
            dst[i] += (*inv_std)[r] * (dh[i] - mean_dh - hr[i] * mean_dh_h);
          }
        }
      });
}

AttentionMask AttentionMask::causal(std::int64_t t) {
  AttentionMask m;
  m.tq = m.tk = t;
  m.blocked.assign(static_cast<std::size_t>(t * t), 0);
  for (std::int64_t i = 0; i < t; ++i) {
    for (std::int64_t j = i + 1; j < t; ++j) m.blocked[i * t + j] = 1;
  }
  return m;
}

AttentionMask AttentionMask::key_padding(
    std::int64_t batch, std::int64_t tq, std::int64_t tk,
    const std::vector<std::uint8_t>& key_padding) {
  require(static_cast<std::int64_t>(key_padding.size()) == batch * tk,
          "key_padding: flag count must be batch * tk");
  AttentionMask m;
  m.batch = batch;
  m.tq = tq;
  m.tk = tk;
  m.blocked.resize(static_cast<std::size_t>(batch * tq * tk));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t i = 0; i < tq; ++i) {
      std::copy_n(key_padding.begin() + b * tk, tk,
                  m.blocked.begin() + (b * tq + i) * tk);
    }
  }
  return m;
}

AttentionMask AttentionMask::merge(const AttentionMask& a,
                                   const AttentionMask& b) {
  require(a.tq == b.tq && a.tk == b.tk, "mask merge: (tq, tk) differ");
  require(a.batch == 0 || b.batch == 0 || a.batch == b.batch,
          "mask merge: batch differs");
  AttentionMask m;
  m.batch = std::max(a.batch, b.batch);
  m.tq = a.tq;
  m.tk = a.tk;
  const std::int64_t n = std::max<std::int64_t>(m.batch, 1);
  m.blocked.resize(static_cast<std::size_t>(n * m.tq * m.tk));
  for (std::int64_t bb = 0; bb < n; ++bb) {
    for (std::int64_t i = 0; i < m.tq; ++i) {
      for (std::int64_t j = 0; j < m.tk; ++j) {
        m.blocked[(bb * m.tq + i) * m.tk + j] =
            a.is_blocked(bb, i, j) || b.is_blocked(bb, i, j);
      }
    }
  }
  return m;
}

AttentionMask AttentionMask::repeat_heads(int heads) const {
  if (batch == 0) return *this;
  AttentionMask m = *this;
  m.batch = batch * heads;
  const std::int64_t block = tq * tk;
  m.blocked.resize(static_cast<std::size_t>(m.batch * block));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      std::copy_n(blocked.begin() + b * block, block,
                  m.blocked.begin() + (b * heads + h) * block);
    }
  }
  return m;
}

Var scaled_dot_product_attention(Var q, Var k, Var v,
                                 const AttentionMask* mask) {
  Tape& tape = same_tape({q, k, v});
  const Shape& qs = q.shape();
  const Shape& ks = k.shape();
  const Shape& vs = v.shape();
  require(qs.size() == 3 && ks.size() == 3 && vs.size() == 3 &&
              qs[0] == ks[0] && ks[0] == vs[0] && qs[2] == ks[2] &&
              ks[1] == vs[1],
          "attention: Q " + shape_string(qs) + ", K " + shape_string(ks) +
              ", V " + shape_string(vs));
  const std::int64_t batch = qs[0], tq = qs[1], tk = ks[1], d = qs[2],
                     dv = vs[2];
  if (mask) {
    require(mask->tq == tq && mask->tk == tk &&
                (mask->batch == 0 || mask->batch == batch),
            "attention: mask shape does not match scores");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(batch * tq * tk));
  Tensor out(Shape{batch, tq, dv});
  for (std::int64_t b = 0; b < batch; ++b) {
    auto qb = cmat(q.value().data.data() + b * tq * d, tq, d);
    auto kb = cmat(k.value().data.data() + b * tk * d, tk, d);
    auto vb = cmat(v.value().data.data() + b * tk * dv, tk, dv);
    auto pb = mmat(probs->data() + b * tq * tk, tq, tk);
    pb.noalias() = (qb * kb.transpose()) * inv_sqrt_d;
    for (std::int64_t i = 0; i < tq; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      bool open = false;
      for (std::int64_t j = 0; j < tk; ++j) {
        if (mask && mask->is_blocked(b, i, j)) continue;
        if (!std::isfinite(pb(i, j))) {
          throw NumericalError("attention: non-finite score");
        }
        open = true;
        mx = std::max(mx, pb(i, j));
      }
      if (!open) {
        throw MaskError("attention query row " + std::to_string(i) +
                        " has every key masked");
      }
      double z = 0.0;
      for (std::int64_t j = 0; j < tk; ++j) {
        if (mask && mask->is_blocked(b, i, j)) {
          pb(i, j) = 0.0;
        } else {
          pb(i, j) = std::exp(pb(i, j) - mx);
          z += pb(i, j);
        }
      }
      pb.row(i) /= z;
    }
    mmat(out.data.data() + b * tq * dv, tq, dv).noalias() = pb * vb;
  }
  int iq = q.id(), ik = k.id(), iv = v.id();
  return tape.record(
      std::move(out), {q, k, v}, [=](Tape& t, const Tensor& g) {
        Tensor* sq = t.grad_sink(iq);
        Tensor* sk = t.grad_sink(ik);
        Tensor* sv = t.grad_sink(iv);
        RowMatrix dp, ds;
        for (std::int64_t b = 0; b < batch; ++b) {
          auto gb = cmat(g.data.data() + b * tq * dv, tq, dv);
          auto pb = cmat(probs->data() + b * tq * tk, tq, tk);
          auto qb = cmat(t.value(iq).data.data() + b * tq * d, tq, d);
          auto kb = cmat(t.value(ik).data.data() + b * tk * d, tk, d);
          auto vb = cmat(t.value(iv).data.data() + b * tk * dv, tk, dv);
          if (sv) mmat(sv->data.data() + b * tk * dv, tk, dv).noalias() += pb.transpose() * gb;
          if (!sq && !sk) continue;
          dp.noalias() = gb * vb.transpose();
          ds = pb.cwiseProduct(dp);
          Eigen::VectorXd rowdot = ds.rowwise().sum();
          ds -= pb.cwiseProduct(rowdot.replicate(1, tk));
          ds *= inv_sqrt_d;
          if (sq) mmat(sq->data.data() + b * tq * d, tq, d).noalias() += ds * kb;
          if (sk) mmat(sk->data.data() + b * tk * d, tk, d).noalias() += ds.transpose() * qb;
        }
      });
}

Var split_heads(Var x, int heads) {
  Tape& tape = same_tape({x});
  const Shape& s = x.shape();
  require(s.size() == 3 && heads >= 1 && s[2] % heads == 0,
          "split_heads: bad shape " + shape_string(s));
  const std::int64_t batch = s[0], time = s[1], dh = s[2] / heads;
  Tensor out(Shape{batch * heads, time, dh});
  const double* src = x.value().data.data();
  for (std::int64_t b = 0; b < batch; ++b)
    for (int h = 0; h < heads; ++h)
      for (std::int64_t t = 0; t < time; ++t)
        std::copy_n(src + (b * time + t) * s[2] + h * dh, dh,
                    out.data.data() + ((b * heads + h) * time + t) * dh);
  int ix = x.id();
  const std::int64_t width = s[2];
  return tape.record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    Tensor* sx = t.grad_sink(ix);
    if (!sx) return;
    for (std::int64_t b = 0; b < batch; ++b)
      for (int h = 0; h < heads; ++h)
        for (std::int64_t tt = 0; tt < time; ++tt) {
          const double* gs = g.data.data() + ((b * heads + h) * time + tt) * dh;
          double* dst = sx->data.data() + (b * time + tt) * width + h * dh;
          for (std::int64_t e = 0; e < dh; ++e) dst[e] += gs[e];
        }
  });
}

Var merge_heads(Var x, int heads) {
  Tape& tape = same_tape({x});
  const Shape& s = x.shape();
  require(s.size() == 3 && heads >= 1 && s[0] % heads == 0,
          "merge_heads: bad shape " + shape_string(s));
  const std::int64_t batch = s[0] / heads, time = s[1], dh = s[2];
  const std::int64_t width = dh * heads;
  Tensor out(Shape{batch, time, width});
  const double* src = x.value().data.data();
  for (std::int64_t b = 0; b < batch; ++b)
    for (int h = 0; h < heads; ++h)
      for (std::int64_t t = 0; t < time; ++t)
        std::copy_n(src + ((b * heads + h) * time + t) * dh, dh,
                    out.data.data() + (b * time + t) * width + h * dh);
  int ix = x.id();
  return tape.record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    Tensor* sx = t.grad_sink(ix);
    if (!sx) return;
    for (std::int64_t b = 0; b < batch; ++b)
      for (int h = 0; h < heads; ++h)
        for (std::int64_t tt = 0; tt < time; ++tt) {
          const double* gs = g.data.data() + (b * time + tt) * width + h * dh;
          double* dst = sx->data.data() + ((b * heads + h) * time + tt) * dh;
          for (std::int64_t e = 0; e < dh; ++e) dst[e] += gs[e];
        }
  });
}

Var multi_head_attention(Var x_q, Var x_kv, int heads, int d_model,
                         const AttentionParams& p, const AttentionMask* mask) {
  if (heads < 1 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  Var q = split_heads(dense(x_q, p.wq, p.bq), heads);
  Var k = split_heads(dense(x_kv, p.wk, p.bk), heads);
  Var v = split_heads(dense(x_kv, p.wv, p.bv), heads);
  Var ctx;
  if (mask && mask->batch != 0) {
    AttentionMask expanded = mask->repeat_heads(heads);
    ctx = scaled_dot_product_attention(q, k, v, &expanded);
  } else {
    ctx = scaled_dot_product_attention(q, k, v, mask);
  }
  return dense(merge_heads(ctx, heads), p.wo, p.bo);
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                          int pad_id) {
  Tape& tape = same_tape({logits});
  const Shape& s = logits.shape();
  require(!s.empty() && s.back() >= 1, "cross entropy: empty class axis");
  const std::int64_t classes = s.back();
  const std::int64_t rows = numel(s) / classes;
  require(static_cast<std::int64_t>(targets.size()) == rows,
          "cross entropy: " + std::to_string(targets.size()) +
              " targets for " + std::to_string(rows) + " rows");
  auto probs = std::make_shared<std::vector<double>>(logits.value().data.size());
  auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  long active = 0;
  double total = 0.0;
  const double* x = logits.value().data.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const int y = targets[r];
    require(y >= 0 && y < classes, "cross entropy: target out of range");
    const double* xr = x + r * classes;
    double* pr = probs->data() + r * classes;
    const double mx = *std::max_element(xr, xr + classes);
    double z = 0.0;
    for (std::int64_t c = 0; c < classes; ++c) {
      pr[c] = std::exp(xr[c] - mx);
      z += pr[c];
    }
    for (std::int64_t c = 0; c < classes; ++c) pr[c] /= z;
    if (y == pad_id) continue;
    ++active;
    total += std::log(z) + mx - xr[y];
  }
  if (active == 0) throw LossError("every target is padding");
  int il = logits.id();
  const double inv = 1.0 / static_cast<double>(active);
  return tape.record(
      Tensor::scalar(total * inv), {logits}, [=](Tape& t, const Tensor& g) {
        Tensor* sl = t.grad_sink(il);
        if (!sl) return;
        const double scale = g.data[0] * inv;
        for (std::int64_t r = 0; r < rows; ++r) {
          const int y = (*tgt)[r];
          if (y == pad_id) continue;
          const double* pr = probs->data() + r * classes;
          double* dst = sl->data.data() + r * classes;
          for (std::int64_t c = 0; c < classes; ++c) dst[c] += scale * pr[c];
          dst[y] -= scale;
        }
      });
}

Var embedding(Var table, std::span<const int> ids, const Shape& ids_shape) {
  Tape& tape = same_tape({table});
  require(table.value().rank() == 2, "embedding: table must be 2-D");
  require(numel(ids_shape) == static_cast<std::int64_t>(ids.size()),
          "embedding: ids do not match ids_shape");
  const std::int64_t vocab = table.dim(0), d = table.dim(1);
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < vocab, "embedding: id out of range");
    std::copy_n(table.value().data.data() + ids[i] * d, d,
                out.data.data() + i * d);
  }
  auto idv = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  int it = table.id();
  return tape.record(std::move(out), {table}, [=](Tape& t, const Tensor& g) {
    Tensor* st = t.grad_sink(it);
    if (!st) return;
    for (std::size_t i = 0; i < idv->size(); ++i) {
      double* dst = st->data.data() + (*idv)[i] * d;
      const double* src = g.data.data() + i * d;
      for (std::int64_t e = 0; e < d; ++e) dst[e] += src[e];
    }
  });
}

Var dropout(Var x, double rate, std::mt19937_64& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  Tape& tape = same_tape({x});
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.value().data.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    (*mask)[i] = u(rng) < rate ? 0.0 : keep_scale;
    out.data[i] *= (*mask)[i];
  }
  int ix = x.id();
  return tape.record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (Tensor* s = t.grad_sink(ix)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) s->data[i] += g.data[i] * (*mask)[i];
    }
  });
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "Adam" : "RMSprop";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "Adam" || name == "adam") return OptimizerKind::kAdam;
  if (name == "RMSprop" || name == "rmsprop" || name == "RMSp") {
    return OptimizerKind::kRmsprop;
  }
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, OptimizerKind kind, double lr,
                    const OptimizerHyper& h) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: parameter and gradient sizes differ");
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  for (double g : grads) {
    if (std::isnan(g)) throw NumericalError("NaN gradient");
  }
  if (state.second.size() != params.size()) {
    state.first.assign(params.size(), 0.0);
    state.second.assign(params.size(), 0.0);
    state.steps = 0;
  }
  ++state.steps;
  if (kind == OptimizerKind::kAdam) {
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.steps));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      state.first[i] = h.beta1 * state.first[i] + (1.0 - h.beta1) * g;
      state.second[i] = h.beta2 * state.second[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = state.first[i] / c1;
      const double v_hat = state.second[i] / c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      state.second[i] = h.rho * state.second[i] + (1.0 - h.rho) * g * g;
      params[i] -= lr * g / (std::sqrt(state.second[i]) + h.eps);
    }
  }
}

void Optimizer::step(std::vector<Parameter>& params) {
  if (states_.size() != params.size()) states_.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    optimizer_step(params[i].value.data, params[i].grad.data, states_[i],
                   kind_, lr_);
  }
}

}  // namespace g2p
