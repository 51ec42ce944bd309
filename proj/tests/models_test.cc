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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "g2p/checkpoint.h"
#include "g2p/errors.h"
#include "g2p/models.h"
#include "g2p/training.h"
#include "test_support.h"

namespace g2p {
namespace {

using testing::small_cnn;
using testing::small_transformer;
using testing::toy_lexicon;

struct Fixture {
  Lexicon lex = toy_lexicon();
  Vocab gv, pv;
  Fixture() { std::tie(gv, pv) = build_vocabularies(lex); }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Independent count: conv blocks carry kernel, bias, norm gain and shift.
long cnn_count(const CnnGenome& g, long nv_g, long nv_p) {
  auto block = [](long in, long out) { return 3 * in * out + out + 2 * out; };
  long n = 0, in = nv_g;
  for (int i = 0; i < g.enc_layers; ++i, in = g.enc_dim) n += block(in, g.enc_dim);
  in = nv_p;
  for (int i = 0; i < g.dec_layers; ++i, in = g.dec_dim) n += block(in, g.dec_dim);
  n += g.enc_dim * g.dec_dim + g.dec_dim;
  in = 2 * g.dec_dim;
  for (int w : g.output_widths()) {
    n += block(in, w);
    in = w;
  }
  return n + in * nv_p + nv_p;
}

long transformer_count(const TransformerGenome& g, long nv_g, long nv_p,
                       long max_len) {
  const long d = g.embed_dim, h = g.ff_dim;
  const long attn = 4 * (d * d + d), norm = 2 * d, ff = d * h + h + h * d + d;
  return (nv_g + max_len) * d + g.enc_layers * (attn + 2 * norm + ff) +
         (nv_p + max_len) * d + g.dec_layers * (2 * attn + 3 * norm + ff) +
         d * nv_p + nv_p;
}

TEST_CASE("output stack widths halve from G6 with a floor of 32") {
  for (const auto& row : testing::table2_rows()) {
    std::string joined;
    for (int w : row.cnn.output_widths()) {
      joined += (joined.empty() ? "" : "/") + std::to_string(w);
    }
    CHECK_MESSAGE(joined == row.cnn_widths, row.lexicon);
  }
}

TEST_CASE("every fittest genome builds with the expected structure") {
  const auto& f = fixture();
  for (const auto& row : testing::table2_rows()) {
    INFO(row.lexicon);
    auto cnn = build_cnn(row.cnn, f.gv, f.pv);
    CHECK(cnn->architecture() == Architecture::kCnn);
    CHECK(cnn->param_count() == cnn_count(row.cnn, f.gv.size(), f.pv.size()));
    auto tr = build_transformer(row.transformer, f.gv, f.pv);
    CHECK(tr->param_count() == transformer_count(row.transformer, f.gv.size(),
                                                  f.pv.size(), kDefaultMaxLen));
  }
}

TEST_CASE("CNN has no embeddings and no residual connections") {
  const auto& f = fixture();
  auto m = build_cnn(testing::table2_rows()[0].cnn, f.gv, f.pv);
  for (const auto& k : m->layer_kinds()) {
    CHECK(k.find("embed") == std::string::npos);
    CHECK(k != "residual");
  }
  for (const auto& p : m->parameters()) CHECK(p.name.find("embed") == std::string::npos);
  const auto kinds = m->layer_kinds();
  CHECK(std::count(kinds.begin(), kinds.end(), "attention") == 1);
  // The EN CMUdict row has three output blocks at 128, 64 and 32.
  CHECK(m->find_parameter("out.0.conv.kernel")->value.shape == Shape{3, 256, 128});
  CHECK(m->find_parameter("out.1.conv.kernel")->value.shape == Shape{3, 128, 64});
  CHECK(m->find_parameter("out.2.conv.kernel")->value.shape == Shape{3, 64, 32});
  CHECK(m->find_parameter("out.3.conv.kernel") == nullptr);
}

TEST_CASE("transformer head split") {
  const auto& f = fixture();
  TransformerGenome g = testing::table2_rows()[0].transformer;  // 64 wide, 4 heads
  auto m = build_transformer(g, f.gv, f.pv);
  CHECK(g.embed_dim / g.heads == 16);
  CHECK(m->find_parameter("enc.0.self.q.weight")->value.shape == Shape{64, 64});
  const auto kinds = m->layer_kinds();
  CHECK(std::count(kinds.begin(), kinds.end(), "cross_attention") == g.dec_layers);
}

TEST_CASE("genome to model mapping covers every gene value") {
  const auto& f = fixture();
  for (auto arch : {Architecture::kCnn, Architecture::kTransformer}) {
    const auto& space = gene_space(arch);
    for (std::size_t gene = 0; gene < space.size(); ++gene) {
      for (std::size_t v = 0; v < space[gene].values.size(); ++v) {
        std::vector<int> idx(space.size(), 0);
        idx[gene] = static_cast<int>(v);
        const Genome g = from_indices(arch, idx);
        CHECK(to_indices(g) == idx);
        auto m = build_model(g, f.gv, f.pv, 16, 3);
        auto again = build_model(g, f.gv, f.pv, 16, 99);
        CHECK(m->param_count() == again->param_count());
        CHECK(m->architecture() == arch);
      }
    }
  }
}

TEST_CASE("same seed gives identical parameters") {
  const auto& f = fixture();
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    auto a = build_model(g, f.gv, f.pv, 32, 7);
    auto b = build_model(g, f.gv, f.pv, 32, 7);
    auto c = build_model(g, f.gv, f.pv, 32, 8);
    REQUIRE(a->parameters().size() == b->parameters().size());
    bool differs = false;
    for (std::size_t i = 0; i < a->parameters().size(); ++i) {
      CHECK(a->parameters()[i].value.data == b->parameters()[i].value.data);
      differs |= a->parameters()[i].value.data != c->parameters()[i].value.data;
    }
    CHECK(differs);
  }
}

TEST_CASE("construction errors") {
  const auto& f = fixture();
  CnnGenome bad = small_cnn();
  bad.enc_dim = 100;
  CHECK_THROWS_AS(build_cnn(bad, f.gv, f.pv), ConfigError);
  CHECK_THROWS_AS(build_cnn(small_cnn(), Vocab(), f.pv), ConfigError);
  CHECK_THROWS_AS(build_transformer(small_transformer(), f.gv, Vocab()), ConfigError);
  CHECK_THROWS_AS(build_cnn(small_cnn(), f.gv, f.pv, 2), ConfigError);
}

TEST_CASE("dense logits layer counts in times out plus out") {
  const auto& f = fixture();
  auto m = build_cnn(small_cnn(), f.gv, f.pv);
  const long in = small_cnn().output_widths().back();
  bool seen = false;
  for (const auto& [layer, n] : m->param_breakdown()) {
    if (layer == "logits") {
      CHECK(n == in * f.pv.size() + f.pv.size());
      seen = true;
    }
  }
  CHECK(seen);
  long total = 0;
  for (const auto& [layer, n] : m->param_breakdown()) total += n;
  CHECK(total == m->param_count());
  // A lone 2 -> 3 dense layer: weight 2x3 plus bias 3.
  Parameter w("w", Tensor({2, 3})), b("b", Tensor({3}));
  CHECK(w.value.size() + b.value.size() == 9);
}

TEST_CASE("MaRePhor CNN parameter count") {
  const auto& f = fixture();
  const auto& row = testing::table2_rows()[2];
  REQUIRE(row.lexicon == "RO MaRePhor");
  auto m = build_cnn(row.cnn, f.gv, f.pv);
  MESSAGE("MaRePhor CNN genome: " << m->param_count()
          << " trainable parameters with the toy vocabularies (published: 173,672)");
  CHECK(m->param_count() > 0);
}

TEST_CASE("untrained loss is close to ln C") {
  const auto& f = fixture();
  const double ln_c = std::log(static_cast<double>(f.pv.size()));
  std::vector<std::vector<std::string>> words;
  std::vector<PhonemeSequence> targets;
  for (std::size_t i = 0; i < 64; ++i) {
    const auto& e = f.lex.entries()[i];
    words.push_back(model_graphemes(e.word));
    targets.push_back(e.pronunciations[0]);
  }
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto m = build_model(g, f.gv, f.pv, 32, seed);
      Tape tape(false);
      const double loss = m->loss(tape, m->make_batch(words, &targets), false, nullptr)
                              .value().item();
      CHECK(std::abs(loss - ln_c) / ln_c < 0.15);
    }
  }
}

TEST_CASE("single example overfits in 500 steps and decodes its target") {
  const auto& f = fixture();
  const LexiconEntry* cat = f.lex.find("cat");
  REQUIRE(cat != nullptr);
  REQUIRE(cat->pronunciations[0] == PhonemeSequence{"k", "æ", "t"});
  const Lexicon one(f.lex.spec(), {*cat});
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    auto m = build_model(g, f.gv, f.pv, 32, 1);
    TrainConfig cfg;
    cfg.max_epochs = 500;
    cfg.early_stop = false;
    cfg.batch_size = 1;
    const auto hist = train(*m, one, cfg);
    CHECK(hist.steps_run == 500);
    Tape tape(false);
    const std::vector<std::vector<std::string>> w = {model_graphemes("cat")};
    const double loss = m->loss(tape, m->make_batch(w, &cat->pronunciations), false,
                                nullptr).value().item();
    CHECK(loss < 0.01);
    CHECK(m->greedy_decode("cat") == PhonemeSequence{"k", "æ", "t"});
  }
}

TEST_CASE("decoder is causal under teacher forcing") {
  const auto& f = fixture();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> tok(Vocab::kNumSpecials, f.pv.size() - 1);
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    auto m = build_model(g, f.gv, f.pv, 32, 5);
    const std::vector<std::vector<std::string>> words = {model_graphemes("shack"),
                                                         model_graphemes("bit")};
    const std::vector<PhonemeSequence> targets = {{"ʃ", "æ", "k", "t", "ɪ"},
                                                  {"b", "ɪ", "t"}};
    const Batch base = m->make_batch(words, &targets);
    Tape t0(false);
    const Tensor ref = m->forward_logits(t0, base, false, nullptr).value();
    const std::int64_t len = base.dec_len, c = f.pv.size();
    for (std::int64_t pos = 0; pos < len; ++pos) {
      Batch changed = base;
      for (std::int64_t b = 0; b < base.size; ++b)
        for (std::int64_t s = pos + 1; s < len; ++s) changed.dec_in[b * len + s] = tok(rng);
      Tape t1(false);
      const Tensor out = m->forward_logits(t1, changed, false, nullptr).value();
      for (std::int64_t b = 0; b < base.size; ++b)
        for (std::int64_t s = 0; s <= pos; ++s)
          for (std::int64_t k = 0; k < c; ++k) {
            const std::size_t i = (b * len + s) * c + k;
            CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
          }
    }
  }
}

TEST_CASE("greedy decode is deterministic, capped and free of specials") {
  const auto& f = fixture();
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    auto m = build_model(g, f.gv, f.pv, 32, 2);
    std::vector<std::string> words;
    for (const auto& e : f.lex.entries()) words.push_back(e.word);
    const auto first = m->greedy_decode(words);
    CHECK(first == m->greedy_decode(words));
    for (std::size_t i = 0; i < words.size(); ++i) {
      CHECK(first[i].size() <= 2 * model_graphemes(words[i]).size() + 5);
      for (const auto& p : first[i]) {
        CHECK(f.pv.contains(p));
        CHECK(f.pv.id(p) >= Vocab::kNumSpecials);
      }
    }
    const auto unk = m->greedy_decode("zß€q");
    CHECK(unk.size() <= 2 * 4 + 5);
    for (const auto& p : unk) CHECK(f.pv.id(p) >= Vocab::kNumSpecials);
  }
}

TEST_CASE("over-long input raises LengthError") {
  const auto& f = fixture();
  auto m = build_cnn(small_cnn(), f.gv, f.pv, 8);
  const std::vector<std::vector<std::string>> w = {model_graphemes("abcdefgh")};
  CHECK_THROWS_AS(m->make_batch(w, nullptr), LengthError);
}

TEST_CASE("checkpoint round trip preserves decoding") {
  const auto& f = fixture();
  testing::TempDir dir;
  const auto [train_lex, rest] = split_train_test(f.lex, 0.5, 4);
  std::vector<std::string> words;
  for (const auto& e : f.lex.entries()) {
    if (words.size() < 100) words.push_back(e.word);
  }
  REQUIRE(words.size() == 100);
  for (const Genome& g : {Genome(small_cnn()), Genome(small_transformer())}) {
    auto m = build_model(g, f.gv, f.pv, 32, 9);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    train(*m, train_lex, cfg);
    const auto path = dir / "model.ckpt";
    save_checkpoint(*m, path, {{"language", "toy"}});
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.header["extra"]["language"] == "toy");
    CHECK(loaded.model->genome() == m->genome());
    CHECK(loaded.model->graphemes() == m->graphemes());
    CHECK(loaded.model->phonemes() == m->phonemes());
    for (std::size_t i = 0; i < m->parameters().size(); ++i) {
      CHECK(loaded.model->parameters()[i].value.data == m->parameters()[i].value.data);
    }
    CHECK(loaded.model->greedy_decode(words) == m->greedy_decode(words));
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  testing::TempDir dir;
  const auto path = dir / "bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "G2PCKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  const auto& f = fixture();
  auto m = build_cnn(small_cnn(), f.gv, f.pv, 16);
  save_checkpoint(*m, path);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 5);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}

}  // namespace
}  // namespace g2p
