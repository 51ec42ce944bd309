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

#ifndef G2P_METRICS_H_
#define G2P_METRICS_H_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "g2p/lexicon.h"
#include "json.hpp"

namespace g2p {

// Unit-cost edit distance over arbitrary comparable tokens.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                         diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(const PhonemeSequence& a, const PhonemeSequence& b);

struct WordMatch {
  std::size_t distance = 0;
  std::size_t reference_index = 0;
};

// Closest reference; ties go to the shorter reference, then to the
// lexicographically smaller token sequence. Throws ScoreError when
// `references` is empty.
WordMatch score_word(const PhonemeSequence& hypothesis,
                     const std::vector<PhonemeSequence>& references);

struct WordScore {
  std::string word;
  PhonemeSequence hypothesis;
  PhonemeSequence best_reference;
  std::size_t distance = 0;
};

struct EvalReport {
  double wer = 0.0;  // percent of words matching no reference
  double per = 0.0;  // percent edits over chosen-reference phonemes
  std::size_t n_words = 0;
  std::size_t total_distance = 0;
  std::size_t total_reference_length = 0;
  std::vector<WordScore> per_word;
};

// Throws EvalError on an empty list.
EvalReport aggregate(std::vector<WordScore> scored);

nlohmann::json to_json(const EvalReport& report, bool include_words = true);

// Aligned text table with one row per labelled report.
std::string format_table(
    const std::vector<std::pair<std::string, const EvalReport*>>& rows);

}  // namespace g2p

#endif  // G2P_METRICS_H_
