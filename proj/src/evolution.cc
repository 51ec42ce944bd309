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

#include "g2p/evolution.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "g2p/errors.h"
#include "g2p/metrics.h"
#include "g2p/models.h"
#include "g2p/training.h"

namespace g2p {
namespace {

bool contains(const std::vector<Genome>& v, const Genome& g) {
  return std::find(v.begin(), v.end(), g) != v.end();
}

int mutate_index(int current, int domain, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, domain - 2);
  const int v = pick(rng);
  return v < current ? v : v + 1;
}

bool is_valid(const Genome& g) {
  try {
    validate(g);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace

void EsConfig::validate() const {
  if (population_size < 2) throw ConfigError("population_size must be >= 2");
  if (generations < 1) throw ConfigError("generations must be >= 1");
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(elite_fraction)) throw ConfigError("elite_fraction not in (0,1)");
  if (!in_unit(lessfit_parent_prob)) {
    throw ConfigError("lessfit_parent_prob not in (0,1)");
  }
  if (!in_unit(mutation_prob_per_gene)) {
    throw ConfigError("mutation_prob_per_gene not in (0,1)");
  }
  if (tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
  if (max_rerolls < 0) throw ConfigError("max_rerolls must be >= 0");
  if (fitness_epochs < 1) throw ConfigError("fitness_epochs must be >= 1");
  if (fitness_holdout < 1 || fitness_holdout >= train_cap) {
    throw ConfigError("fitness_holdout must be in [1, train_cap)");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

bool fitter(const EvaluatedGenome& a, const EvaluatedGenome& b) {
  if (a.fitness_wer != b.fitness_wer) return a.fitness_wer < b.fitness_wer;
  if (a.param_count != b.param_count) return a.param_count < b.param_count;
  return a.fitness_per < b.fitness_per;
}

Genome random_genome(Architecture arch, std::mt19937_64& rng) {
  const auto& space = gene_space(arch);
  for (;;) {
    std::vector<int> idx;
    for (const auto& gene : space) {
      std::uniform_int_distribution<int> pick(
          0, static_cast<int>(gene.values.size()) - 1);
      idx.push_back(pick(rng));
    }
    Genome g = from_indices(arch, idx);
    if (is_valid(g)) return g;
  }
}

std::vector<Genome> init_population(const EsConfig& config, Architecture arch,
                                    std::mt19937_64& rng) {
  std::vector<Genome> pop;
  for (int i = 0; i < config.population_size; ++i) {
    Genome g = random_genome(arch, rng);
    for (int t = 0; t < config.max_rerolls && contains(pop, g); ++t) {
      g = random_genome(arch, rng);
    }
    pop.push_back(std::move(g));
  }
  return pop;
}

Genome breed(const Genome& a, const Genome& b, double mutation_prob,
             std::mt19937_64& rng) {
  const Architecture arch = architecture_of(a);
  if (arch != architecture_of(b)) {
    throw BreedError("cannot breed genomes of different architectures");
  }
  const auto& space = gene_space(arch);
  const auto ia = to_indices(a);
  const auto ib = to_indices(b);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution mutate(mutation_prob);
  for (;;) {
    std::vector<int> child(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
      child[i] = coin(rng) ? ia[i] : ib[i];
    }
    for (std::size_t i = 0; i < space.size(); ++i) {
      const int domain = static_cast<int>(space[i].values.size());
      if (domain >= 2 && mutate(rng)) {
        child[i] = mutate_index(child[i], domain, rng);
      }
    }
    Genome g = from_indices(arch, child);
    if (is_valid(g)) return g;
  }
}

FitnessData prepare_fitness_data(const Lexicon& lexicon,
                                 const EsConfig& config) {
  Lexicon capped = cap_entries(lexicon, config.train_cap, config.seed);
  const auto n = static_cast<double>(capped.size());
  const double holdout = std::min<double>(config.fitness_holdout,
                                          std::max(1.0, std::round(0.2 * n)));
  auto [train, test] = split_train_test(capped, holdout / n, config.seed);
  auto [gv, pv] = build_vocabularies(capped);
  int longest = 0;
  for (const auto& e : capped.entries()) {
    longest = std::max<int>(longest, model_graphemes(e.word).size());
    for (const auto& p : e.pronunciations) {
      longest = std::max<int>(longest, p.size());
    }
  }
  return {std::move(train), std::move(test), std::move(gv), std::move(pv),
          std::max(kDefaultMaxLen, longest + 2)};
}

FitnessResult training_fitness(const Genome& genome, const FitnessData& data,
                               int epochs, std::uint64_t seed,
                               double learning_rate) {
  auto model = build_model(genome, data.graphemes, data.phonemes, data.max_len,
                           seed);
  FitnessResult r;
  r.param_count = model->param_count();
  TrainConfig tc;
  tc.max_epochs = epochs;
  tc.early_stop = false;
  tc.seed = seed;
  tc.learning_rate = learning_rate;
  try {
    train(*model, data.train, tc);
  } catch (const TrainingDiverged& e) {
    spdlog::warn("genome {} diverged at step {}", describe(genome), e.step());
    r.failed = true;
    r.error = e.what();
    return r;
  }
  const EvalReport report = evaluate(*model, data.holdout, &data.train);
  r.wer = report.wer;
  r.per = std::min(100.0, report.per);
  return r;
}

nlohmann::json to_json(const EsLogEntry& e) {
  nlohmann::json j = {{"generation", e.generation},
                      {"slot", e.slot},
                      {"seed", e.seed},
                      {"cached", e.cached},
                      {"genome", to_json(e.evaluated.genome)},
                      {"describe", describe(e.evaluated.genome)},
                      {"wer", e.evaluated.fitness_wer},
                      {"per", e.evaluated.fitness_per},
                      {"param_count", e.evaluated.param_count},
                      {"generation_born", e.evaluated.generation_born},
                      {"failed", e.evaluated.failed}};
  if (!e.evaluated.error.empty()) j["error"] = e.evaluated.error;
  return j;
}

std::uint64_t slot_seed(std::uint64_t run_seed, int generation, int slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed),
                    static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(generation),
                    static_cast<std::uint32_t>(slot)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

EsResult run_es(Architecture arch, const EsConfig& config,
                const FitnessFn& fitness,
                const std::function<void(const EsLogEntry&)>& on_logged) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<Genome> population = init_population(config, arch, rng);
  std::map<std::vector<int>, EvaluatedGenome> cache;
  const int n_elite = std::max(
      1, static_cast<int>(std::lround(config.elite_fraction *
                                      config.population_size)));

  EsResult result;
  bool have_best = false;
  for (int gen = 0; gen < config.generations; ++gen) {
    const int pop = static_cast<int>(population.size());
    std::vector<std::vector<int>> keys(pop);
    std::vector<int> todo;  // first slot of each genome not yet cached
    for (int s = 0; s < pop; ++s) {
      keys[s] = to_indices(population[s]);
      if (cache.contains(keys[s])) continue;
      bool first = true;
      for (int t : todo) first = first && keys[t] != keys[s];
      if (first) todo.push_back(s);
    }

    std::vector<FitnessResult> fresh(todo.size());
    auto work = [&](std::size_t i) {
      const int s = todo[i];
      try {
        fresh[i] = fitness(population[s], slot_seed(config.seed, gen, s));
      } catch (const std::exception& e) {
        spdlog::error("fitness of {} failed: {}", describe(population[s]),
                      e.what());
        fresh[i] = FitnessResult{};
        fresh[i].failed = true;
        fresh[i].error = e.what();
      }
    };
    const int threads = std::min<int>(config.jobs, todo.size());
    if (threads <= 1) {
      for (std::size_t i = 0; i < todo.size(); ++i) work(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> workers;
      for (int t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
          for (std::size_t i; (i = next++) < todo.size();) work(i);
        });
      }
      for (auto& w : workers) w.join();
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
      const FitnessResult& f = fresh[i];
      cache[keys[todo[i]]] = {population[todo[i]], f.wer, f.per,
                              f.param_count, gen, f.failed, f.error};
    }

    std::vector<EvaluatedGenome> evaluated;
    for (int s = 0; s < pop; ++s) {
      const bool cached = std::find(todo.begin(), todo.end(), s) == todo.end();
      EsLogEntry entry{gen, s, slot_seed(config.seed, gen, s), cached,
                       cache.at(keys[s])};
      if (on_logged) on_logged(entry);
      evaluated.push_back(entry.evaluated);
      result.log.push_back(std::move(entry));
    }

    std::vector<int> order(pop);
    for (int s = 0; s < pop; ++s) order[s] = s;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fitter(evaluated[a], evaluated[b]);
    });
    if (!have_best || fitter(evaluated[order[0]], result.best)) {
      result.best = evaluated[order[0]];
      have_best = true;
    }
    result.best_wer_by_generation.push_back(result.best.fitness_wer);
    spdlog::info("generation {}: best WER {:.2f} ({})", gen,
                 result.best.fitness_wer, describe(result.best.genome));
    if (gen + 1 == config.generations) break;

    // Parent pool: elites plus a random sample of the rest, in rank order.
    std::vector<Genome> pool;
    std::vector<Genome> next;
    std::bernoulli_distribution lessfit(config.lessfit_parent_prob);
    for (int r = 0; r < pop; ++r) {
      const Genome& g = population[order[r]];
      if (r < n_elite) {
        pool.push_back(g);
        next.push_back(g);
      } else if (lessfit(rng)) {
        pool.push_back(g);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    auto tournament = [&] {
      std::size_t best = pick(rng);
      for (int t = 1; t < config.tournament_size; ++t) {
        best = std::min(best, pick(rng));
      }
      return best;
    };
    while (static_cast<int>(next.size()) < config.population_size) {
      Genome child;
      for (int t = 0;; ++t) {
        const Genome& a = pool[tournament()];
        const Genome& b = pool[tournament()];
        child = breed(a, b, config.mutation_prob_per_gene, rng);
        const bool seen = contains(next, child) ||
                          cache.contains(to_indices(child));
        if (!seen || t + 1 >= config.max_rerolls) break;
      }
      next.push_back(std::move(child));
    }
    population = std::move(next);
  }
  return result;
}

EsResult run_es(const Lexicon& lexicon, Architecture arch,
                const EsConfig& config,
                const std::function<void(const EsLogEntry&)>& on_logged) {
  config.validate();
  const FitnessData data = prepare_fitness_data(lexicon, config);
  spdlog::info("fitness data: {} training words, {} holdout words",
               data.train.size(), data.holdout.size());
  FitnessFn fn = [&](const Genome& g, std::uint64_t seed) {
    return training_fitness(g, data, config.fitness_epochs, seed);
  };
  return run_es(arch, config, fn, on_logged);
}

}  // namespace g2p
