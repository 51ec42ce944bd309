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

#include "g2p/models.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "g2p/errors.h"

namespace g2p {
namespace {

Tensor one_hot(const std::vector<int>& ids, std::int64_t batch,
               std::int64_t len, int classes) {
  Tensor t(Shape{batch, len, classes});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    t.data[i * classes + ids[i]] = 1.0;
  }
  return t;
}

std::vector<int> positions(std::int64_t batch, std::int64_t len) {
  std::vector<int> p(static_cast<std::size_t>(batch * len));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < len; ++t) p[b * len + t] = static_cast<int>(t);
  }
  return p;
}

void check_vocab(const Vocab& v, const char* what) {
  if (v.size() <= Vocab::kNumSpecials) {
    throw ConfigError(std::string(what) + " vocabulary has no symbols");
  }
}

// ---------------------------------------------------------------------------
// Convolutional seq2seq: one-hot inputs, conv/activation/norm blocks, dot
// product attention from decoder states to projected encoder states, then an
// output conv stack over [decoder, context]. No embeddings, no residuals.
// ---------------------------------------------------------------------------

class CnnSeq2Seq final : public Seq2SeqModel {
 public:
  CnnSeq2Seq(const CnnGenome& g, const Vocab& gv, const Vocab& pv, int max_len,
             std::uint64_t seed)
      : Seq2SeqModel(g, gv, pv, max_len, seed), genome_(g) {
    std::int64_t in = gv.size();
    for (int i = 0; i < g.enc_layers; ++i) {
      enc_.push_back(make_block("enc." + std::to_string(i), in, g.enc_dim));
      in = g.enc_dim;
    }
    in = pv.size();
    for (int i = 0; i < g.dec_layers; ++i) {
      dec_.push_back(make_block("dec." + std::to_string(i), in, g.dec_dim));
      in = g.dec_dim;
    }
    proj_w_ = add_glorot("attn.proj.weight", {g.enc_dim, g.dec_dim},
                         g.enc_dim, g.dec_dim);
    proj_b_ = add_constant("attn.proj.bias", {g.dec_dim}, 0.0);
    in = 2 * g.dec_dim;
    auto widths = g.output_widths();
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out_.push_back(make_block("out." + std::to_string(i), in, widths[i]));
      in = widths[i];
    }
    logit_w_ = add_glorot("logits.weight", {in, pv.size()}, in, pv.size(),
                          kLogitInitGain);
    logit_b_ = add_constant("logits.bias", {pv.size()}, 0.0);
  }

  std::vector<std::string> layer_kinds() const override {
    std::vector<std::string> kinds;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      kinds.insert(kinds.end(), {"conv1d", "activation", "layer_norm"});
    }
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      kinds.insert(kinds.end(), {"conv1d_causal", "activation", "layer_norm"});
    }
    kinds.insert(kinds.end(), {"dense", "attention", "concat"});
    for (std::size_t i = 0; i < out_.size(); ++i) {
      kinds.insert(kinds.end(), {"conv1d_causal", "activation", "layer_norm"});
    }
    kinds.push_back("dense");
    return kinds;
  }

 protected:
  Encoded encode(Tape& tape, const Batch& b, bool, std::mt19937_64*) const override {
    Var x = tape.constant(one_hot(b.enc_ids, b.size, b.enc_len, graphemes().size()));
    for (const auto& blk : enc_) x = apply(tape, blk, x, Padding::kSameZero);
    Encoded e;
    e.memory = x;
    e.key_pad.resize(b.enc_ids.size());
    for (std::size_t i = 0; i < b.enc_ids.size(); ++i) {
      e.key_pad[i] = b.enc_ids[i] == Vocab::kPad;
    }
    return e;
  }

  Var decode(Tape& tape, const Encoded& enc, const std::vector<int>& dec_in,
             std::int64_t batch, std::int64_t dec_len, bool,
             std::mt19937_64*) const override {
    Var y = tape.constant(one_hot(dec_in, batch, dec_len, phonemes().size()));
    for (const auto& blk : dec_) y = apply(tape, blk, y, Padding::kCausal);
    Var keys = dense(enc.memory, bind(tape, proj_w_), bind(tape, proj_b_));
    const std::int64_t enc_len = enc.memory.dim(1);
    AttentionMask mask =
        AttentionMask::key_padding(batch, dec_len, enc_len, enc.key_pad);
    Var ctx = scaled_dot_product_attention(y, keys, keys, &mask);
    Var h = concat_last(y, ctx);
    for (const auto& blk : out_) h = apply(tape, blk, h, Padding::kCausal);
    return dense(h, bind(tape, logit_w_), bind(tape, logit_b_));
  }

 private:
  struct Block {
    int kernel, bias, gain, shift;
  };

  Block make_block(const std::string& prefix, std::int64_t in,
                   std::int64_t out) {
    Block b;
    b.kernel = add_glorot(prefix + ".conv.kernel", {kConvWidth, in, out},
                          kConvWidth * in, kConvWidth * out);
    b.bias = add_constant(prefix + ".conv.bias", {out}, 0.0);
    b.gain = add_constant(prefix + ".norm.gain", {out}, 1.0);
    b.shift = add_constant(prefix + ".norm.shift", {out}, 0.0);
    return b;
  }

  Var apply(Tape& tape, const Block& blk, Var x, Padding pad) const {
    Var h = conv1d(x, bind(tape, blk.kernel), bind(tape, blk.bias), pad);
    if (genome_.activation == Activation::kRelu) h = relu(h);
    return layer_norm(h, bind(tape, blk.gain), bind(tape, blk.shift));
  }

  CnnGenome genome_;
  std::vector<Block> enc_, dec_, out_;
  int proj_w_ = -1, proj_b_ = -1, logit_w_ = -1, logit_b_ = -1;
};

// ---------------------------------------------------------------------------
// Transformer seq2seq (post-norm), learned token and positional embeddings.
// ---------------------------------------------------------------------------

class TransformerSeq2Seq final : public Seq2SeqModel {
 public:
  TransformerSeq2Seq(const TransformerGenome& g, const Vocab& gv,
                     const Vocab& pv, int max_len, std::uint64_t seed)
      : Seq2SeqModel(g, gv, pv, max_len, seed), genome_(g) {
    const std::int64_t d = g.embed_dim;
    enc_embed_ = add_normal("enc.embed", {gv.size(), d}, 0.02);
    enc_pos_ = add_normal("enc.pos", {max_len, d}, 0.02);
    for (int i = 0; i < g.enc_layers; ++i) {
      const std::string p = "enc." + std::to_string(i);
      EncoderLayer l;
      l.self = make_attention(p + ".self");
      l.norm1 = make_norm(p + ".norm1");
      l.ff = make_ff(p);
      l.norm2 = make_norm(p + ".norm2");
      enc_.push_back(l);
    }
    dec_embed_ = add_normal("dec.embed", {pv.size(), d}, 0.02);
    dec_pos_ = add_normal("dec.pos", {max_len, d}, 0.02);
    for (int i = 0; i < g.dec_layers; ++i) {
      const std::string p = "dec." + std::to_string(i);
      DecoderLayer l;
      l.self = make_attention(p + ".self");
      l.norm1 = make_norm(p + ".norm1");
      l.cross = make_attention(p + ".cross");
      l.norm2 = make_norm(p + ".norm2");
      l.ff = make_ff(p);
      l.norm3 = make_norm(p + ".norm3");
      dec_.push_back(l);
    }
    logit_w_ = add_glorot("logits.weight", {d, pv.size()}, d, pv.size(),
                          kLogitInitGain);
    logit_b_ = add_constant("logits.bias", {pv.size()}, 0.0);
  }

  std::vector<std::string> layer_kinds() const override {
    std::vector<std::string> kinds = {"embedding", "positional_embedding"};
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      kinds.insert(kinds.end(), {"self_attention", "residual", "layer_norm",
                                 "feed_forward", "residual", "layer_norm"});
    }
    kinds.insert(kinds.end(), {"embedding", "positional_embedding"});
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      kinds.insert(kinds.end(),
                   {"causal_self_attention", "residual", "layer_norm",
                    "cross_attention", "residual", "layer_norm",
                    "feed_forward", "residual", "layer_norm"});
    }
    kinds.push_back("dense");
    return kinds;
  }

 protected:
  Encoded encode(Tape& tape, const Batch& b, bool training,
                 std::mt19937_64* rng) const override {
    Encoded e;
    e.key_pad.resize(b.enc_ids.size());
    for (std::size_t i = 0; i < b.enc_ids.size(); ++i) {
      e.key_pad[i] = b.enc_ids[i] == Vocab::kPad;
    }
    Var x = embed(tape, enc_embed_, enc_pos_, b.enc_ids, b.size, b.enc_len);
    x = drop(x, rng, training);
    AttentionMask mask =
        AttentionMask::key_padding(b.size, b.enc_len, b.enc_len, e.key_pad);
    const int d = genome_.embed_dim;
    for (const auto& l : enc_) {
      Var a = multi_head_attention(x, x, genome_.heads, d, bind_attn(tape, l.self), &mask);
      x = norm(tape, l.norm1, add(x, drop(a, rng, training)));
      x = norm(tape, l.norm2, add(x, drop(feed_forward(tape, l.ff, x), rng, training)));
    }
    e.memory = x;
    return e;
  }

  Var decode(Tape& tape, const Encoded& enc, const std::vector<int>& dec_in,
             std::int64_t batch, std::int64_t dec_len, bool training,
             std::mt19937_64* rng) const override {
    Var y = embed(tape, dec_embed_, dec_pos_, dec_in, batch, dec_len);
    y = drop(y, rng, training);
    const std::int64_t enc_len = enc.memory.dim(1);
    AttentionMask causal = AttentionMask::causal(dec_len);
    AttentionMask cross =
        AttentionMask::key_padding(batch, dec_len, enc_len, enc.key_pad);
    const int d = genome_.embed_dim;
    for (const auto& l : dec_) {
      Var a = multi_head_attention(y, y, genome_.heads, d, bind_attn(tape, l.self), &causal);
      y = norm(tape, l.norm1, add(y, drop(a, rng, training)));
      Var c = multi_head_attention(y, enc.memory, genome_.heads, d,
                                   bind_attn(tape, l.cross), &cross);
      y = norm(tape, l.norm2, add(y, drop(c, rng, training)));
      y = norm(tape, l.norm3, add(y, drop(feed_forward(tape, l.ff, y), rng, training)));
    }
    return dense(y, bind(tape, logit_w_), bind(tape, logit_b_));
  }

 private:
  struct Attn {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Norm {
    int gain, shift;
  };
  struct FeedForward {
    int w1, b1, w2, b2;
  };
  struct EncoderLayer {
    Attn self;
    Norm norm1;
    FeedForward ff;
    Norm norm2;
  };
  struct DecoderLayer {
    Attn self;
    Norm norm1;
    Attn cross;
    Norm norm2;
    FeedForward ff;
    Norm norm3;
  };

  Attn make_attention(const std::string& p) {
    const std::int64_t d = genome_.embed_dim;
    Attn a;
    a.wq = add_glorot(p + ".q.weight", {d, d}, d, d);
    a.bq = add_constant(p + ".q.bias", {d}, 0.0);
    a.wk = add_glorot(p + ".k.weight", {d, d}, d, d);
    a.bk = add_constant(p + ".k.bias", {d}, 0.0);
    a.wv = add_glorot(p + ".v.weight", {d, d}, d, d);
    a.bv = add_constant(p + ".v.bias", {d}, 0.0);
    a.wo = add_glorot(p + ".o.weight", {d, d}, d, d);
    a.bo = add_constant(p + ".o.bias", {d}, 0.0);
    return a;
  }
  Norm make_norm(const std::string& p) {
    const std::int64_t d = genome_.embed_dim;
    return {add_constant(p + ".gain", {d}, 1.0),
            add_constant(p + ".shift", {d}, 0.0)};
  }
  FeedForward make_ff(const std::string& p) {
    const std::int64_t d = genome_.embed_dim, h = genome_.ff_dim;
    return {add_glorot(p + ".ff1.weight", {d, h}, d, h),
            add_constant(p + ".ff1.bias", {h}, 0.0),
            add_glorot(p + ".ff2.weight", {h, d}, h, d),
            add_constant(p + ".ff2.bias", {d}, 0.0)};
  }

  AttentionParams bind_attn(Tape& t, const Attn& a) const {
    return {bind(t, a.wq), bind(t, a.bq), bind(t, a.wk), bind(t, a.bk),
            bind(t, a.wv), bind(t, a.bv), bind(t, a.wo), bind(t, a.bo)};
  }
  Var norm(Tape& t, const Norm& n, Var x) const {
    return layer_norm(x, bind(t, n.gain), bind(t, n.shift));
  }
  Var feed_forward(Tape& t, const FeedForward& f, Var x) const {
    Var h = relu(dense(x, bind(t, f.w1), bind(t, f.b1)));
    return dense(h, bind(t, f.w2), bind(t, f.b2));
  }
  Var embed(Tape& t, int table, int pos_table, const std::vector<int>& ids,
            std::int64_t batch, std::int64_t len) const {
    Var tok = embedding(bind(t, table), ids, {batch, len});
    Var pos = embedding(bind(t, pos_table), positions(batch, len), {batch, len});
    return add(tok, pos);
  }
  Var drop(Var x, std::mt19937_64* rng, bool training) const {
    if (!training || rng == nullptr) return x;
    return dropout(x, genome_.dropout, *rng, true);
  }

  TransformerGenome genome_;
  int enc_embed_ = -1, enc_pos_ = -1, dec_embed_ = -1, dec_pos_ = -1;
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  int logit_w_ = -1, logit_b_ = -1;
};

}  // namespace

Seq2SeqModel::Seq2SeqModel(Genome genome, Vocab graphemes, Vocab phonemes,
                           int max_len, std::uint64_t seed)
    : genome_(std::move(genome)),
      graphemes_(std::move(graphemes)),
      phonemes_(std::move(phonemes)),
      max_len_(max_len),
      seed_(seed),
      init_rng_(seed) {
  validate(genome_);
  check_vocab(graphemes_, "grapheme");
  check_vocab(phonemes_, "phoneme");
  if (max_len_ < 3) throw ConfigError("max_len must be at least 3");
}

int Seq2SeqModel::add_glorot(const std::string& name, Shape shape,
                             std::int64_t fan_in, std::int64_t fan_out,
                             double gain) {
  const double limit =
      gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(std::move(shape));
  for (double& x : t.data) x = u(init_rng_);
  by_name_.emplace(name, static_cast<int>(params_.size()));
  params_.emplace_back(name, std::move(t));
  return static_cast<int>(params_.size() - 1);
}

int Seq2SeqModel::add_constant(const std::string& name, Shape shape,
                               double value) {
  by_name_.emplace(name, static_cast<int>(params_.size()));
  params_.emplace_back(name, Tensor(std::move(shape), value));
  return static_cast<int>(params_.size() - 1);
}

int Seq2SeqModel::add_normal(const std::string& name, Shape shape,
                             double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& x : t.data) x = n(init_rng_);
  by_name_.emplace(name, static_cast<int>(params_.size()));
  params_.emplace_back(name, std::move(t));
  return static_cast<int>(params_.size() - 1);
}

Var Seq2SeqModel::bind(Tape& tape, int index) const {
  // Gradients are only written when the caller drives a training tape
  // through the non-const parameters() owner, so the cast never aliases a
  // frozen model.
  if (tape.grad_enabled()) {
    return tape.param(const_cast<Parameter&>(params_[index]));
  }
  return tape.constant_ref(params_[index].value);
}

const Parameter* Seq2SeqModel::find_parameter(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : &params_[it->second];
}

void Seq2SeqModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

long Seq2SeqModel::param_count() const {
  long n = 0;
  for (const auto& p : params_) n += static_cast<long>(p.value.size());
  return n;
}

std::vector<std::pair<std::string, long>> Seq2SeqModel::param_breakdown() const {
  std::vector<std::pair<std::string, long>> out;
  for (const auto& p : params_) {
    auto dot = p.name.rfind('.');
    std::string layer = dot == std::string::npos ? p.name : p.name.substr(0, dot);
    if (out.empty() || out.back().first != layer) out.emplace_back(layer, 0);
    out.back().second += static_cast<long>(p.value.size());
  }
  return out;
}

Batch Seq2SeqModel::make_batch(
    const std::vector<std::vector<std::string>>& words,
    const std::vector<PhonemeSequence>* targets) const {
  if (targets && targets->size() != words.size()) {
    throw ShapeError("make_batch: word and target counts differ");
  }
  Batch b;
  b.size = static_cast<std::int64_t>(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    b.enc_len = std::max<std::int64_t>(b.enc_len, words[i].size() + 2);
    if (targets) {
      b.dec_len = std::max<std::int64_t>(b.dec_len, (*targets)[i].size() + 1);
    }
  }
  if (b.enc_len > max_len_ || b.dec_len > max_len_) {
    throw LengthError("sequence longer than max_len " + std::to_string(max_len_));
  }
  b.enc_ids.assign(static_cast<std::size_t>(b.size * b.enc_len), Vocab::kPad);
  for (std::size_t i = 0; i < words.size(); ++i) {
    int* row = b.enc_ids.data() + i * b.enc_len;
    row[0] = Vocab::kSos;
    for (std::size_t j = 0; j < words[i].size(); ++j) {
      row[j + 1] = graphemes_.id(words[i][j]);
    }
    row[words[i].size() + 1] = Vocab::kEos;
  }
  if (targets) {
    b.dec_in.assign(static_cast<std::size_t>(b.size * b.dec_len), Vocab::kPad);
    b.targets.assign(b.dec_in.size(), Vocab::kPad);
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& p = (*targets)[i];
      int* in = b.dec_in.data() + i * b.dec_len;
      int* out = b.targets.data() + i * b.dec_len;
      in[0] = Vocab::kSos;
      for (std::size_t j = 0; j < p.size(); ++j) {
        const int id = phonemes_.id(p[j]);
        in[j + 1] = id;
        out[j] = id;
      }
      out[p.size()] = Vocab::kEos;
    }
  }
  return b;
}

Var Seq2SeqModel::forward_logits(Tape& tape, const Batch& batch, bool training,
                                 std::mt19937_64* rng) const {
  Encoded enc = encode(tape, batch, training, rng);
  return decode(tape, enc, batch.dec_in, batch.size, batch.dec_len, training,
                rng);
}

Var Seq2SeqModel::loss(Tape& tape, const Batch& batch, bool training,
                       std::mt19937_64* rng) const {
  Var logits = forward_logits(tape, batch, training, rng);
  return softmax_cross_entropy(logits, batch.targets, Vocab::kPad);
}

std::vector<PhonemeSequence> Seq2SeqModel::greedy_decode(
    const std::vector<std::string>& words) const {
  constexpr std::size_t kChunk = 256;
  std::vector<PhonemeSequence> results;
  results.reserve(words.size());
  const int classes = phonemes_.size();
  for (std::size_t start = 0; start < words.size(); start += kChunk) {
    const std::size_t end = std::min(words.size(), start + kChunk);
    std::vector<std::vector<std::string>> chunk;
    std::vector<int> caps;
    for (std::size_t i = start; i < end; ++i) {
      chunk.push_back(model_graphemes(words[i]));
      caps.push_back(std::min<int>(2 * static_cast<int>(chunk.back().size()) + 5,
                                   max_len_ - 1));
    }
    Batch b = make_batch(chunk, nullptr);
    Tape enc_tape(false);
    Encoded enc = encode(enc_tape, b, false, nullptr);
    const Tensor memory = enc.memory.value();

    std::vector<std::vector<int>> out(chunk.size());
    std::vector<bool> done(chunk.size(), false);
    const int max_cap = *std::max_element(caps.begin(), caps.end());
    std::vector<int> prefix(chunk.size(), Vocab::kSos);  // [batch, len]
    std::int64_t len = 1;
    for (int step = 0; step < max_cap; ++step) {
      Tape tape(false);
      Encoded e{tape.constant_ref(memory), enc.key_pad};
      Var logits = decode(tape, e, prefix, b.size, len, false, nullptr);
      const double* lg = logits.value().data.data();
      std::vector<int> next(chunk.size(), Vocab::kPad);
      bool any_active = false;
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        if (done[i]) continue;
        const double* row = lg + (i * len + (len - 1)) * classes;
        int best = Vocab::kEos;
        for (int c = Vocab::kNumSpecials; c < classes; ++c) {
          if (row[c] > row[best]) best = c;
        }
        if (best == Vocab::kEos) {
          done[i] = true;
          continue;
        }
        out[i].push_back(best);
        next[i] = best;
        if (static_cast<int>(out[i].size()) >= caps[i]) done[i] = true;
        any_active = true;
      }
      if (!any_active) break;
      std::vector<int> grown(static_cast<std::size_t>(b.size * (len + 1)));
      for (std::int64_t i = 0; i < b.size; ++i) {
        std::copy_n(prefix.begin() + i * len, len, grown.begin() + i * (len + 1));
        grown[i * (len + 1) + len] = next[i];
      }
      prefix = std::move(grown);
      ++len;
      if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    }
    for (auto& ids : out) results.push_back(phonemes_.decode(ids));
  }
  return results;
}

PhonemeSequence Seq2SeqModel::greedy_decode(std::string_view word) const {
  return greedy_decode(std::vector<std::string>{std::string(word)}).front();
}

std::vector<std::string> model_graphemes(std::string_view word) {
  return word_graphemes(normalize_word(word));
}

std::unique_ptr<Seq2SeqModel> build_cnn(const CnnGenome& genome,
                                        const Vocab& graphemes,
                                        const Vocab& phonemes, int max_len,
                                        std::uint64_t seed) {
  return std::make_unique<CnnSeq2Seq>(genome, graphemes, phonemes, max_len, seed);
}

std::unique_ptr<Seq2SeqModel> build_transformer(const TransformerGenome& genome,
                                                const Vocab& graphemes,
                                                const Vocab& phonemes,
                                                int max_len,
                                                std::uint64_t seed) {
  return std::make_unique<TransformerSeq2Seq>(genome, graphemes, phonemes,
                                              max_len, seed);
}

std::unique_ptr<Seq2SeqModel> build_model(const Genome& genome,
                                          const Vocab& graphemes,
                                          const Vocab& phonemes, int max_len,
                                          std::uint64_t seed) {
  if (auto* c = std::get_if<CnnGenome>(&genome)) {
    return build_cnn(*c, graphemes, phonemes, max_len, seed);
  }
  return build_transformer(std::get<TransformerGenome>(genome), graphemes,
                           phonemes, max_len, seed);
}

}  // namespace g2p
