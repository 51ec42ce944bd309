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

#ifndef G2P_MODELS_H_
#define G2P_MODELS_H_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "g2p/autodiff.h"
#include "g2p/genome.h"
#include "g2p/lexicon.h"

namespace g2p {

inline constexpr int kDefaultMaxLen = 64;
inline constexpr int kConvWidth = 3;
// Init range multiplier of the final logits layer. Full-range init over a
// unit-variance input puts the untrained loss well above ln(classes).
inline constexpr double kLogitInitGain = 0.5;

// Padded id matrices for one mini-batch. Encoder rows are SOS w EOS;
// decoder inputs are SOS p and targets p EOS.
struct Batch {
  std::int64_t size = 0;
  std::int64_t enc_len = 0;
  std::int64_t dec_len = 0;
  std::vector<int> enc_ids;  // [size, enc_len]
  std::vector<int> dec_in;   // [size, dec_len]
  std::vector<int> targets;  // [size, dec_len]
};

// Base of both seq2seq networks. Parameters are created once at
// construction in a fixed order, so shapes and counts depend only on the
// genome, the vocabulary sizes and max_len.
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;

  Architecture architecture() const { return architecture_of(genome_); }
  const Genome& genome() const { return genome_; }
  const Vocab& graphemes() const { return graphemes_; }
  const Vocab& phonemes() const { return phonemes_; }
  int max_len() const { return max_len_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Parameter* find_parameter(std::string_view name) const;
  void zero_grad();

  long param_count() const;
  // Trainable scalars per layer (parameter name up to its last '.').
  std::vector<std::pair<std::string, long>> param_breakdown() const;

  // Throws LengthError when a word or target does not fit max_len.
  Batch make_batch(const std::vector<std::vector<std::string>>& words,
                   const std::vector<PhonemeSequence>* targets) const;

  // Teacher-forced logits [batch, dec_len, phoneme classes].
  Var forward_logits(Tape& tape, const Batch& batch, bool training,
                     std::mt19937_64* dropout_rng) const;
  // Mean cross-entropy over non-pad target positions.
  Var loss(Tape& tape, const Batch& batch, bool training,
           std::mt19937_64* dropout_rng) const;

  // Argmax decoding from SOS until EOS or 2*len+5 steps. Specials never
  // appear in the result.
  std::vector<PhonemeSequence> greedy_decode(
      const std::vector<std::string>& words) const;
  PhonemeSequence greedy_decode(std::string_view word) const;

  // Layer names, used to assert structure in tests.
  virtual std::vector<std::string> layer_kinds() const = 0;

 protected:
  Seq2SeqModel(Genome genome, Vocab graphemes, Vocab phonemes, int max_len,
               std::uint64_t seed);

  struct Encoded {
    Var memory;                          // [batch, enc_len, width]
    std::vector<std::uint8_t> key_pad;   // [batch, enc_len], 1 = padding
  };

  virtual Encoded encode(Tape& tape, const Batch& batch, bool training,
                         std::mt19937_64* rng) const = 0;
  virtual Var decode(Tape& tape, const Encoded& enc,
                     const std::vector<int>& dec_in, std::int64_t batch,
                     std::int64_t dec_len, bool training,
                     std::mt19937_64* rng) const = 0;

  // Parameter creation helpers; return the parameter index.
  int add_glorot(const std::string& name, Shape shape, std::int64_t fan_in,
                 std::int64_t fan_out, double gain = 1.0);
  int add_constant(const std::string& name, Shape shape, double value);
  int add_normal(const std::string& name, Shape shape, double stddev);

  // Binds a parameter to a tape: as a gradient leaf when the tape records
  // gradients, as a read-only constant otherwise.
  Var bind(Tape& tape, int index) const;

 private:
  Genome genome_;
  Vocab graphemes_;
  Vocab phonemes_;
  int max_len_;
  std::uint64_t seed_;
  std::mt19937_64 init_rng_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> by_name_;
};

// Throws ConfigError on an invalid genome or vocabulary.
std::unique_ptr<Seq2SeqModel> build_cnn(const CnnGenome& genome,
                                        const Vocab& graphemes,
                                        const Vocab& phonemes,
                                        int max_len = kDefaultMaxLen,
                                        std::uint64_t seed = 0);
std::unique_ptr<Seq2SeqModel> build_transformer(const TransformerGenome& genome,
                                                const Vocab& graphemes,
                                                const Vocab& phonemes,
                                                int max_len = kDefaultMaxLen,
                                                std::uint64_t seed = 0);
std::unique_ptr<Seq2SeqModel> build_model(const Genome& genome,
                                          const Vocab& graphemes,
                                          const Vocab& phonemes,
                                          int max_len = kDefaultMaxLen,
                                          std::uint64_t seed = 0);

// Grapheme tokens of a word as the models see them.
std::vector<std::string> model_graphemes(std::string_view word);

}  // namespace g2p

#endif  // G2P_MODELS_H_
