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

#ifndef G2P_TRAINING_H_
#define G2P_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "g2p/lexicon.h"
#include "g2p/metrics.h"
#include "g2p/models.h"
#include "json.hpp"

namespace g2p {

struct TrainHistory;

struct TrainConfig {
  int max_epochs = 20;
  bool early_stop = true;
  int early_stop_window = 50;          // optimizer steps
  double early_stop_threshold = 0.01;  // relative (max - min) / max
  int smoothing_window = 10;           // moving average before the window test
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  std::optional<int> batch_size;       // defaults to the genome's batch gene
  // Called after every epoch; returning true stops training.
  std::function<bool(int epoch, const TrainHistory&)> on_epoch_end;

  // Throws ConfigError.
  void validate() const;
};

struct TrainHistory {
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;
  std::vector<std::uint64_t> batch_fingerprints;
  bool stopped_early = false;
  long steps_run = 0;
};

// True iff at least `window` losses exist and the trailing window varies by
// less than `threshold` relative to its maximum.
bool should_stop(std::span<const double> losses, int window, double threshold);

// Trailing moving average; element i averages losses[max(0, i-w+1) .. i].
std::vector<double> moving_average(std::span<const double> losses, int window);

// Trains `model` in place on every (word, pronunciation) pair of the
// lexicon. Throws TrainingDiverged when the loss stops being finite and
// ConfigError when the lexicon uses symbols outside the model vocabularies.
TrainHistory train(Seq2SeqModel& model, const Lexicon& train_lexicon,
                   const TrainConfig& config);

// Greedy-decodes every test word and scores it against all of its
// pronunciations. When `train_lexicon` is given, overlap raises EvalError.
EvalReport evaluate(const Seq2SeqModel& model, const Lexicon& test_lexicon,
                    const Lexicon* train_lexicon = nullptr);

nlohmann::json summary_json(const TrainHistory& history);
void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path);

}  // namespace g2p

#endif  // G2P_TRAINING_H_
