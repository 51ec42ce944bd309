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

#include "gradcheck.h"

#include <algorithm>
#include <cmath>

namespace g2p::testing {
namespace {

constexpr double kStep = 1e-5;

double loss_value(const GradCase& c, const std::vector<Tensor>& inputs,
                  const Tensor& r) {
  Tape tape(false);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const Tensor& out = c.fn(tape, vars).value();
  double total = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) total += out.data[i] * r.data[i];
  return total;
}

// Values bounded away from zero so relu kinks are never straddled.
Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.data) {
    do {
      x = u(rng);
    } while (std::abs(x) < 0.05);
  }
  return t;
}

std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

using CaseMaker = std::function<GradCase(std::mt19937_64&)>;

std::vector<std::pair<std::string, CaseMaker>> primitives() {
  std::vector<std::pair<std::string, CaseMaker>> p;
  p.emplace_back("add", [](auto& rng) {
    Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    return GradCase{{random_tensor(s, rng), random_tensor(s, rng)},
                    [](Tape&, const auto& v) { return add(v[0], v[1]); }};
  });
  p.emplace_back("mul", [](auto& rng) {
    Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    return GradCase{{random_tensor(s, rng), random_tensor(s, rng)},
                    [](Tape&, const auto& v) { return mul(v[0], v[1]); }};
  });
  p.emplace_back("scale", [](auto& rng) {
    Shape s{pick(rng, 1, 6)};
    const double f = std::uniform_real_distribution<double>(-3, 3)(rng);
    return GradCase{{random_tensor(s, rng)},
                    [f](Tape&, const auto& v) { return scale(v[0], f); }};
  });
  p.emplace_back("sum", [](auto& rng) {
    Shape s{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 3)};
    return GradCase{{random_tensor(s, rng)},
                    [](Tape&, const auto& v) { return sum(v[0]); }};
  });
  p.emplace_back("relu", [](auto& rng) {
    Shape s{pick(rng, 1, 4), pick(rng, 1, 6)};
    return GradCase{{random_tensor(s, rng)},
                    [](Tape&, const auto& v) { return relu(v[0]); }};
  });
  p.emplace_back("reshape", [](auto& rng) {
    const auto a = pick(rng, 1, 4), b = pick(rng, 1, 4), c = pick(rng, 1, 3);
    return GradCase{{random_tensor({a, b, c}, rng)}, [a, b, c](Tape&, const auto& v) {
                      return reshape(v[0], {a * c, b});
                    }};
  });
  p.emplace_back("concat_last", [](auto& rng) {
    const auto a = pick(rng, 1, 3), t = pick(rng, 1, 4);
    return GradCase{{random_tensor({a, t, pick(rng, 1, 4)}, rng),
                     random_tensor({a, t, pick(rng, 1, 4)}, rng)},
                    [](Tape&, const auto& v) { return concat_last(v[0], v[1]); }};
  });
  p.emplace_back("dense", [](auto& rng) {
    const auto b = pick(rng, 1, 3), t = pick(rng, 1, 4);
    const auto din = pick(rng, 1, 5), dout = pick(rng, 1, 5);
    return GradCase{{random_tensor({b, t, din}, rng), random_tensor({din, dout}, rng),
                     random_tensor({dout}, rng)},
                    [](Tape&, const auto& v) { return dense(v[0], v[1], v[2]); }};
  });
  for (Padding pad : {Padding::kSameZero, Padding::kCausal}) {
    p.emplace_back(pad == Padding::kSameZero ? "conv1d_same" : "conv1d_causal",
                   [pad](auto& rng) {
                     const auto b = pick(rng, 1, 2), t = pick(rng, 1, 6);
                     const auto cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
                     const auto k = pad == Padding::kSameZero
                                        ? 2 * pick(rng, 0, 2) + 1
                                        : pick(rng, 1, 4);
                     return GradCase{{random_tensor({b, t, cin}, rng),
                                      random_tensor({k, cin, cout}, rng),
                                      random_tensor({cout}, rng)},
                                     [pad](Tape&, const auto& v) {
                                       return conv1d(v[0], v[1], v[2], pad);
                                     }};
                   });
  }
  p.emplace_back("layer_norm", [](auto& rng) {
    const auto d = pick(rng, 2, 6);
    return GradCase{{random_tensor({pick(rng, 1, 3), pick(rng, 1, 3), d}, rng),
                     random_tensor({d}, rng), random_tensor({d}, rng)},
                    [](Tape&, const auto& v) { return layer_norm(v[0], v[1], v[2]); }};
  });
  p.emplace_back("attention", [](auto& rng) {
    const auto b = pick(rng, 1, 2), tq = pick(rng, 1, 4), tk = pick(rng, 1, 4);
    const auto d = pick(rng, 1, 4), dv = pick(rng, 1, 4);
    const bool causal = tq == tk && pick(rng, 0, 1) == 1;
    return GradCase{{random_tensor({b, tq, d}, rng), random_tensor({b, tk, d}, rng),
                     random_tensor({b, tk, dv}, rng)},
                    [causal, tq](Tape&, const auto& v) {
                      if (!causal) return scaled_dot_product_attention(v[0], v[1], v[2]);
                      const AttentionMask m = AttentionMask::causal(tq);
                      return scaled_dot_product_attention(v[0], v[1], v[2], &m);
                    }};
  });
  p.emplace_back("split_merge_heads", [](auto& rng) {
    const int h = static_cast<int>(pick(rng, 1, 3));
    const auto dh = pick(rng, 1, 3);
    return GradCase{{random_tensor({pick(rng, 1, 2), pick(rng, 1, 3), h * dh}, rng),
                     random_tensor({h * dh}, rng)},
                    [h](Tape&, const auto& v) {
                      // Scale per channel so the permutation matters.
                      Var x = split_heads(v[0], h);
                      x = mul(x, x);
                      return mul(merge_heads(x, h), v[0]);
                    }};
  });
  p.emplace_back("multi_head_attention", [](auto& rng) {
    const int h = static_cast<int>(pick(rng, 1, 2));
    const auto dm = h * pick(rng, 1, 3);
    const auto b = pick(rng, 1, 2), tq = pick(rng, 1, 3), tk = pick(rng, 1, 3);
    std::vector<Tensor> in = {random_tensor({b, tq, dm}, rng),
                              random_tensor({b, tk, dm}, rng)};
    for (int i = 0; i < 4; ++i) {
      in.push_back(random_tensor({dm, dm}, rng));
      in.push_back(random_tensor({dm}, rng));
    }
    return GradCase{in, [h, dm](Tape&, const auto& v) {
                      AttentionParams ps{v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
                      return multi_head_attention(v[0], v[1], h, static_cast<int>(dm), ps);
                    }};
  });
  p.emplace_back("softmax_cross_entropy", [](auto& rng) {
    const auto n = pick(rng, 1, 5), c = pick(rng, 2, 5);
    std::vector<int> targets(n);
    for (auto& t : targets) t = static_cast<int>(pick(rng, 0, c - 1));
    targets[0] = 1;  // at least one row is not padding (pad id 0)
    return GradCase{{random_tensor({n, c}, rng, -3.0, 3.0)},
                    [targets](Tape&, const auto& v) {
                      return softmax_cross_entropy(v[0], targets, 0);
                    }};
  });
  p.emplace_back("embedding", [](auto& rng) {
    const auto vocab = pick(rng, 2, 5), d = pick(rng, 1, 4);
    const auto b = pick(rng, 1, 2), t = pick(rng, 1, 4);
    std::vector<int> ids(b * t);
    for (auto& i : ids) i = static_cast<int>(pick(rng, 0, vocab - 1));
    return GradCase{{random_tensor({vocab, d}, rng)},
                    [ids, b, t](Tape&, const auto& v) {
                      return embedding(v[0], ids, {b, t});
                    }};
  });
  p.emplace_back("dropout", [](auto& rng) {
    const std::uint64_t seed = rng();
    const double rate = std::uniform_real_distribution<double>(0.1, 0.6)(rng);
    return GradCase{{random_tensor({pick(rng, 1, 3), pick(rng, 1, 6)}, rng)},
                    [seed, rate](Tape&, const auto& v) {
                      std::mt19937_64 local(seed);  // same mask on every call
                      return dropout(v[0], rate, local, true);
                    }};
  });
  return p;
}

}  // namespace

double max_relative_error(const GradCase& c, std::mt19937_64& rng) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : c.inputs) vars.push_back(tape.leaf(t));
  Var out = c.fn(tape, vars);
  Tensor r = random_tensor(out.shape(), rng);
  Var loss = sum(mul(out, tape.constant(r)));
  tape.backward(loss);

  double worst = 0.0;
  std::vector<Tensor> probe = c.inputs;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    const Tensor* g = tape.grad(vars[i]);
    for (std::size_t j = 0; j < c.inputs[i].data.size(); ++j) {
      const double x = c.inputs[i].data[j];
      probe[i].data[j] = x + kStep;
      const double up = loss_value(c, probe, r);
      probe[i].data[j] = x - kStep;
      const double down = loss_value(c, probe, r);
      probe[i].data[j] = x;
      const double numeric = (up - down) / (2.0 * kStep);
      const double analytic = g ? g->data[j] : 0.0;
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

std::vector<PrimitiveReport> check_all_primitives(int trials,
                                                  std::uint64_t seed) {
  std::vector<PrimitiveReport> reports;
  std::mt19937_64 rng(seed);
  for (const auto& [name, make] : primitives()) {
    PrimitiveReport rep{name, trials, 0.0};
    for (int t = 0; t < trials; ++t) {
      rep.max_error = std::max(rep.max_error, max_relative_error(make(rng), rng));
    }
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace g2p::testing
