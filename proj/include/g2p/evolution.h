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

#ifndef G2P_EVOLUTION_H_
#define G2P_EVOLUTION_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "g2p/genome.h"
#include "g2p/lexicon.h"
#include "json.hpp"

namespace g2p {

struct EsConfig {
  int population_size = 10;
  int generations = 10;
  double elite_fraction = 0.2;
  double lessfit_parent_prob = 0.1;
  double mutation_prob_per_gene = 0.05;
  int tournament_size = 3;
  int max_rerolls = 20;
  int fitness_epochs = 20;
  int fitness_holdout = 500;
  int train_cap = 150000;
  std::uint64_t seed = 0;
  int jobs = 1;

  // Throws ConfigError.
  void validate() const;
};

struct EvaluatedGenome {
  Genome genome;
  double fitness_wer = 100.0;
  double fitness_per = 100.0;
  long param_count = 0;
  int generation_born = 0;
  bool failed = false;
  std::string error;
};

// True when `a` ranks strictly ahead of `b`: lower WER, then fewer
// parameters, then lower PER.
bool fitter(const EvaluatedGenome& a, const EvaluatedGenome& b);

struct FitnessResult {
  double wer = 100.0;
  double per = 100.0;
  long param_count = 0;
  bool failed = false;
  std::string error;
};

// Scores one genome; `seed` is derived from (run seed, generation, slot).
using FitnessFn = std::function<FitnessResult(const Genome&, std::uint64_t seed)>;

Genome random_genome(Architecture arch, std::mt19937_64& rng);

// Duplicates are re-rolled up to config.max_rerolls times, then kept.
std::vector<Genome> init_population(const EsConfig& config, Architecture arch,
                                    std::mt19937_64& rng);

// Uniform crossover followed by per-gene mutation to a different value.
// Throws BreedError when the parents differ in architecture.
Genome breed(const Genome& a, const Genome& b, double mutation_prob,
             std::mt19937_64& rng);

// Capped training pool plus the holdout shared by every genome of a run.
struct FitnessData {
  Lexicon train;
  Lexicon holdout;
  Vocab graphemes;
  Vocab phonemes;
  int max_len = 0;
};

// The holdout is min(fitness_holdout, 20% of the capped lexicon).
FitnessData prepare_fitness_data(const Lexicon& lexicon, const EsConfig& config);

// Trains for `epochs` epochs and scores the holdout. Divergence yields the
// worst fitness instead of an exception.
FitnessResult training_fitness(const Genome& genome, const FitnessData& data,
                               int epochs, std::uint64_t seed,
                               double learning_rate = 1e-3);

struct EsLogEntry {
  int generation = 0;
  int slot = 0;
  std::uint64_t seed = 0;
  bool cached = false;
  EvaluatedGenome evaluated;
};

nlohmann::json to_json(const EsLogEntry& entry);

struct EsResult {
  EvaluatedGenome best;
  std::vector<EsLogEntry> log;
  std::vector<double> best_wer_by_generation;  // best-so-far after each
};

std::uint64_t slot_seed(std::uint64_t run_seed, int generation, int slot);

EsResult run_es(Architecture arch, const EsConfig& config,
                const FitnessFn& fitness,
                const std::function<void(const EsLogEntry&)>& on_logged = {});

// Training-based search over a prepared lexicon.
EsResult run_es(const Lexicon& lexicon, Architecture arch,
                const EsConfig& config,
                const std::function<void(const EsLogEntry&)>& on_logged = {});

}  // namespace g2p

#endif  // G2P_EVOLUTION_H_
