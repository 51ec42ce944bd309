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

#include "g2p/metrics.h"

#include <cstdio>
#include <sstream>

#include "g2p/errors.h"

namespace g2p {

std::size_t levenshtein(const PhonemeSequence& a, const PhonemeSequence& b) {
  return edit_distance<std::string>(a, b);
}

WordMatch score_word(const PhonemeSequence& hypothesis,
                     const std::vector<PhonemeSequence>& references) {
  if (references.empty()) throw ScoreError("word has no reference");
  WordMatch best{levenshtein(hypothesis, references[0]), 0};
  for (std::size_t i = 1; i < references.size(); ++i) {
    const std::size_t d = levenshtein(hypothesis, references[i]);
    const auto& cur = references[best.reference_index];
    const auto& cand = references[i];
    bool better = d < best.distance;
    if (d == best.distance) {
      better = cand.size() < cur.size() ||
               (cand.size() == cur.size() && cand < cur);
    }
    if (better) best = {d, i};
  }
  return best;
}

EvalReport aggregate(std::vector<WordScore> scored) {
  if (scored.empty()) throw EvalError("nothing to aggregate");
  EvalReport r;
  r.n_words = scored.size();
  std::size_t wrong = 0;
  for (const auto& w : scored) {
    if (w.distance > 0) ++wrong;
    r.total_distance += w.distance;
    r.total_reference_length += w.best_reference.size();
  }
  r.wer = 100.0 * static_cast<double>(wrong) / static_cast<double>(r.n_words);
  r.per = r.total_reference_length == 0
              ? 0.0
              : 100.0 * static_cast<double>(r.total_distance) /
                    static_cast<double>(r.total_reference_length);
  r.per_word = std::move(scored);
  return r;
}

nlohmann::json to_json(const EvalReport& r, bool include_words) {
  nlohmann::json j = {{"wer", r.wer},
                      {"per", r.per},
                      {"n_words", r.n_words},
                      {"total_distance", r.total_distance},
                      {"total_reference_length", r.total_reference_length}};
  if (include_words) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : r.per_word) {
      words.push_back({{"word", w.word},
                       {"hypothesis", w.hypothesis},
                       {"best_reference", w.best_reference},
                       {"edit_distance", w.distance}});
    }
    j["per_word"] = std::move(words);
  }
  return j;
}

std::string format_table(
    const std::vector<std::pair<std::string, const EvalReport*>>& rows) {
  std::size_t width = 5;
  for (const auto& [label, _] : rows) width = std::max(width, label.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s\n",
                static_cast<int>(width), "Model", "Words", "WER", "PER");
  os << buf;
  for (const auto& [label, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %8zu %8.2f %8.2f\n",
                  static_cast<int>(width), label.c_str(), r->n_words, r->wer,
                  r->per);
    os << buf;
  }
  return os.str();
}

}  // namespace g2p
