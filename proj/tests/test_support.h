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

#ifndef G2P_TESTS_TEST_SUPPORT_H_
#define G2P_TESTS_TEST_SUPPORT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "g2p/audio.h"
#include "g2p/evolution.h"
#include "g2p/genome.h"
#include "g2p/lexicon.h"

namespace g2p::testing {

std::filesystem::path data_path(const std::string& name);

// 200 invented words with rule-based transcriptions (tests/data/toy.tsv).
Lexicon toy_lexicon();

// Genomes small enough to train in seconds.
CnnGenome small_cnn();
TransformerGenome small_transformer();

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

Waveform tone(double hz, int rate, double seconds, double amplitude);
Waveform silence(int rate, double seconds);
Waveform concat(const Waveform& a, const Waveform& b);

// One row of the fittest-genome table: both architectures plus the CNN
// output-stack pattern as printed.
struct Table2Row {
  std::string lexicon;
  CnnGenome cnn;
  std::string cnn_widths;
  TransformerGenome transformer;
};
const std::vector<Table2Row>& table2_rows();

// Training-free fitness: WER is the sum of the genome's gene indices, so
// the all-first-values genome is the unique optimum.
FitnessResult index_sum_fitness(const Genome& g, std::uint64_t seed);

// Minimum index sum over every valid genome of the architecture, found by
// enumerating the full product of gene domains.
struct ExhaustiveOptimum {
  double best = 0.0;
  long genomes = 0;
  long optima = 0;
};
ExhaustiveOptimum exhaustive_index_sum_optimum(Architecture arch);

// Runs the CLI binary; returns its exit status and captures stdout.
int run_cli(const std::string& args, std::string* out = nullptr);

}  // namespace g2p::testing

#endif  // G2P_TESTS_TEST_SUPPORT_H_
