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

#include "test_support.h"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "g2p/errors.h"

namespace g2p::testing {

std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(G2P_TEST_DATA_DIR) / name;
}

Lexicon toy_lexicon() {
  return load_wiktionary_tsv(data_path("toy.tsv"),
                             load_language_spec(data_path("toy_spec.json")));
}

CnnGenome small_cnn() {
  return {2, 64, 2, 64, 2, 64, Activation::kRelu, OptimizerKind::kAdam, 32};
}

TransformerGenome small_transformer() {
  return {2, 2, 64, 4, 0.01, 128, 32};
}

TempDir::TempDir() {
  std::string tmpl =
      (std::filesystem::temp_directory_path() / "g2ptest.XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Waveform tone(double hz, int rate, double seconds, double amplitude) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  }
  return w;
}

Waveform silence(int rate, double seconds) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(static_cast<std::size_t>(std::lround(seconds * rate)), 0.0);
  return w;
}

Waveform concat(const Waveform& a, const Waveform& b) {
  Waveform w = a;
  w.samples.insert(w.samples.end(), b.samples.begin(), b.samples.end());
  return w;
}

const std::vector<Table2Row>& table2_rows() {
  using A = Activation;
  using O = OptimizerKind;
  static const std::vector<Table2Row> rows = {
      {"EN CMUdict", {2, 128, 2, 128, 3, 128, A::kRelu, O::kRmsprop, 512},
       "128/64/32", {4, 3, 64, 4, 0.01, 512, 64}},
      {"EN Wiktionary", {2, 128, 2, 128, 3, 128, A::kRelu, O::kRmsprop, 256},
       "128/64/32", {4, 4, 32, 4, 0.01, 128, 128}},
      {"RO MaRePhor", {3, 64, 2, 32, 3, 64, A::kLinear, O::kAdam, 128},
       "64/32/32", {2, 4, 32, 2, 0.05, 64, 64}},
      {"RO Wiktionary", {3, 128, 2, 32, 3, 128, A::kLinear, O::kAdam, 512},
       "128/64/32", {3, 2, 64, 2, 0.05, 64, 256}},
      {"CZ Wiktionary", {2, 32, 4, 128, 3, 64, A::kLinear, O::kRmsprop, 128},
       "64/32/32", {2, 2, 32, 2, 0.05, 64, 32}},
      {"DE Wiktionary", {3, 128, 3, 32, 3, 128, A::kRelu, O::kAdam, 512},
       "128/64/32", {4, 2, 64, 2, 0.05, 32, 64}},
      {"ES Wiktionary", {3, 128, 4, 64, 2, 128, A::kRelu, O::kAdam, 128},
       "128/64", {2, 4, 32, 4, 0.05, 32, 32}},
      {"FR Wiktionary", {3, 128, 3, 32, 3, 128, A::kRelu, O::kAdam, 512},
       "128/64/32", {2, 3, 64, 2, 0.05, 128, 64}},
      {"IT Wiktionary", {2, 128, 4, 128, 2, 64, A::kRelu, O::kRmsprop, 256},
       "64/32", {2, 2, 64, 2, 0.01, 512, 64}},
      {"PL Wiktionary", {4, 64, 2, 128, 2, 128, A::kRelu, O::kAdam, 128},
       "128/64", {3, 2, 64, 4, 0.05, 1024, 128}},
  };
  return rows;
}

FitnessResult index_sum_fitness(const Genome& g, std::uint64_t) {
  FitnessResult r;
  r.wer = 0.0;
  for (int i : to_indices(g)) r.wer += i;
  r.per = r.wer;
  return r;
}

ExhaustiveOptimum exhaustive_index_sum_optimum(Architecture arch) {
  const auto& space = gene_space(arch);
  std::vector<int> idx(space.size(), 0);
  ExhaustiveOptimum o;
  o.best = 1e300;
  while (true) {
    bool valid = true;
    Genome g;
    try {
      g = from_indices(arch, idx);
      validate(g);
    } catch (const ConfigError&) {
      valid = false;
    }
    if (valid) {
      ++o.genomes;
      double sum = 0;
      for (int i : idx) sum += i;
      if (sum < o.best) {
        o.best = sum;
        o.optima = 0;
      }
      if (sum == o.best) ++o.optima;
    }
    std::size_t pos = 0;
    while (pos < idx.size() &&
           ++idx[pos] == static_cast<int>(space[pos].values.size())) {
      idx[pos++] = 0;
    }
    if (pos == idx.size()) break;
  }
  return o;
}

int run_cli(const std::string& args, std::string* out) {
  const std::string cmd = std::string(G2P_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::array<char, 4096> buf;
  std::string text;
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) {
    text.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  if (out) *out = std::move(text);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace g2p::testing
