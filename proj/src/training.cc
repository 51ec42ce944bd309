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

#include "g2p/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "g2p/errors.h"

namespace g2p {
namespace {

// Independent streams derived from one seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

std::uint64_t fingerprint(std::span<const std::size_t> idx) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i : idx) {
    h ^= static_cast<std::uint64_t>(i);
    h *= 1099511628211ull;
  }
  return h;
}

struct Sample {
  std::vector<std::string> graphemes;
  const PhonemeSequence* pron;
};

}  // namespace

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_window < 2) throw ConfigError("early_stop_window must be >= 2");
  if (!(early_stop_threshold > 0.0)) {
    throw ConfigError("early_stop_threshold must be > 0");
  }
  if (smoothing_window < 1) throw ConfigError("smoothing_window must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size && *batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

bool should_stop(std::span<const double> losses, int window, double threshold) {
  if (window < 2 || losses.size() < static_cast<std::size_t>(window)) {
    return false;
  }
  auto tail = losses.last(static_cast<std::size_t>(window));
  const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
  if (*hi <= 0.0) return *hi == *lo;
  return (*hi - *lo) / *hi < threshold;
}

std::vector<double> moving_average(std::span<const double> losses, int window) {
  std::vector<double> out(losses.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    acc += losses[i];
    if (i >= static_cast<std::size_t>(window)) acc -= losses[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

TrainHistory train(Seq2SeqModel& model, const Lexicon& train_lexicon,
                   const TrainConfig& config) {
  config.validate();
  if (train_lexicon.empty()) throw ConfigError("training lexicon is empty");

  std::vector<Sample> samples;
  for (const auto& e : train_lexicon.entries()) {
    auto g = model_graphemes(e.word);
    for (const auto& s : g) {
      if (!model.graphemes().contains(s)) {
        throw ConfigError("grapheme '" + s + "' missing from model vocabulary");
      }
    }
    for (const auto& p : e.pronunciations) {
      for (const auto& t : p) {
        if (!model.phonemes().contains(t)) {
          throw ConfigError("phoneme '" + t + "' missing from model vocabulary");
        }
      }
      samples.push_back({g, &p});
    }
  }

  const int batch_size = config.batch_size.value_or(batch_size_of(model.genome()));
  std::mt19937_64 data_rng = stream(config.seed, 1);
  std::mt19937_64 dropout_rng = stream(config.seed, 2);
  Optimizer optimizer(optimizer_of(model.genome()), config.learning_rate);

  TrainHistory h;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    double epoch_total = 0.0;
    long epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::vector<std::string>> words;
      std::vector<PhonemeSequence> targets;
      for (std::size_t i : idx) {
        words.push_back(samples[i].graphemes);
        targets.push_back(*samples[i].pron);
      }
      Batch batch = model.make_batch(words, &targets);

      model.zero_grad();
      Tape tape;
      double value = 0.0;
      try {
        Var loss = model.loss(tape, batch, true, &dropout_rng);
        value = loss.value().item();
        if (!std::isfinite(value)) {
          throw TrainingDiverged("non-finite training loss", h.steps_run);
        }
        tape.backward(loss);
        optimizer.step(model.parameters());
      } catch (const NumericalError& e) {
        throw TrainingDiverged(e.what(), h.steps_run);
      }
      h.step_loss.push_back(value);
      h.batch_fingerprints.push_back(fingerprint(idx));
      ++h.steps_run;
      epoch_total += value;
      ++epoch_steps;

      if (config.early_stop &&
          should_stop(moving_average(h.step_loss, config.smoothing_window),
                      config.early_stop_window, config.early_stop_threshold)) {
        h.stopped_early = true;
        break;
      }
    }
    h.epoch_loss.push_back(epoch_total / static_cast<double>(epoch_steps));
    if (h.stopped_early) break;
    if (config.on_epoch_end && config.on_epoch_end(epoch, h)) break;
  }
  return h;
}

EvalReport evaluate(const Seq2SeqModel& model, const Lexicon& test_lexicon,
                    const Lexicon* train_lexicon) {
  if (test_lexicon.empty()) throw EvalError("test lexicon is empty");
  if (train_lexicon) {
    for (const auto& e : test_lexicon.entries()) {
      if (train_lexicon->find(e.word)) {
        throw EvalError("test word '" + e.word + "' also appears in training");
      }
    }
  }
  std::vector<std::string> words;
  words.reserve(test_lexicon.size());
  for (const auto& e : test_lexicon.entries()) words.push_back(e.word);
  auto hyps = model.greedy_decode(words);
  std::vector<WordScore> scored;
  scored.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& refs = test_lexicon.entries()[i].pronunciations;
    WordMatch m = score_word(hyps[i], refs);
    scored.push_back({words[i], std::move(hyps[i]), refs[m.reference_index],
                      m.distance});
  }
  return aggregate(std::move(scored));
}

nlohmann::json summary_json(const TrainHistory& h) {
  return {{"steps_run", h.steps_run},
          {"epochs_run", h.epoch_loss.size()},
          {"stopped_early", h.stopped_early},
          {"final_loss", h.step_loss.empty() ? 0.0 : h.step_loss.back()},
          {"epoch_loss", h.epoch_loss}};
}

void write_history_csv(const TrainHistory& h,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < h.step_loss.size(); ++i) {
    out << i << ',' << h.step_loss[i] << '\n';
  }
}

}  // namespace g2p
