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

#ifndef G2P_LEXICON_H_
#define G2P_LEXICON_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace g2p {

// Ordered phoneme tokens of one pronunciation. Tokens may span several
// code points ("t͡ʃ", "aː" under some inventories, "AE").
using PhonemeSequence = std::vector<std::string>;

enum class LexiconSource { kWiktionaryTsv, kCmudict };

std::string_view to_string(LexiconSource source);
LexiconSource lexicon_source_from_string(std::string_view name);

struct LexiconEntry {
  std::string word;  // lowercased, NFC
  std::vector<PhonemeSequence> pronunciations;
  LexiconSource source = LexiconSource::kWiktionaryTsv;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

// Per-language cleaning parameters.
struct LanguageSpec {
  std::string language_code;
  std::set<std::string> alphabet;        // grapheme clusters
  std::set<std::string> stress_symbols;  // dropped from pronunciations
  int phoneme_min_count = 100;
  double length_ratio_max = 2.5;  // phonemes per grapheme

  // Throws ConfigError when an invariant is broken.
  void validate() const;

  friend bool operator==(const LanguageSpec&, const LanguageSpec&) = default;
};

// JSON form: alphabet and stress_symbols are plain strings whose grapheme
// clusters form the sets.
nlohmann::json to_json(const LanguageSpec& spec);
LanguageSpec language_spec_from_json(const nlohmann::json& j);
LanguageSpec load_language_spec(const std::filesystem::path& path);

// Spec used for CMUdict 0.7b: a-z plus apostrophe, ARPAbet stress digits.
LanguageSpec cmudict_language_spec();

// Bookkeeping carried from ingestion into the filter report.
struct IngestStats {
  long records = 0;  // (word, pronunciation) records read, duplicates included
  long collapsed_duplicates = 0;
  long stress_symbols_stripped = 0;

  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(LanguageSpec spec, std::vector<LexiconEntry> entries);
  Lexicon(LanguageSpec spec, std::vector<LexiconEntry> entries,
          IngestStats ingest);

  const LanguageSpec& spec() const { return spec_; }
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const std::map<std::string, long>& phoneme_counts() const {
    return phoneme_counts_;
  }
  const IngestStats& ingest() const { return ingest_; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  long pronunciation_count() const;

  // Exact lookup by (lowercased, NFC) word.
  const LexiconEntry* find(std::string_view word) const;

  friend bool operator==(const Lexicon& a, const Lexicon& b) {
    return a.spec_ == b.spec_ && a.entries_ == b.entries_;
  }

 private:
  void recount();

  LanguageSpec spec_;
  std::vector<LexiconEntry> entries_;
  std::map<std::string, long> phoneme_counts_;
  std::unordered_map<std::string, std::size_t> index_;
  IngestStats ingest_;
};

// Counts are in (word, pronunciation) records. They reconcile as
// surviving_entries = input_records - removed_* - collapsed_duplicates.
struct FilterReport {
  long input_records = 0;
  long removed_bad_grapheme = 0;
  long removed_length_ratio = 0;
  long removed_rare_phoneme = 0;
  long collapsed_duplicates = 0;
  long stress_symbols_stripped = 0;
  long surviving_entries = 0;
  long surviving_words = 0;
  int rare_phoneme_rounds = 0;

  friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

nlohmann::json to_json(const FilterReport& report);

// Splits an IPA string into phoneme tokens: one token per extended grapheme
// cluster, tie-bar pairs merged, white space and stress symbols dropped.
// `stripped`, when given, is incremented per dropped stress symbol.
// Throws EmptyPronunciation if nothing is left.
PhonemeSequence tokenize_ipa(std::string_view raw, const LanguageSpec& spec,
                             long* stripped = nullptr);

// Grapheme clusters of an already-normalized word.
std::vector<std::string> word_graphemes(std::string_view word);

// Lowercased NFC form used for every lookup key.
std::string normalize_word(std::string_view word);

Lexicon parse_wiktionary_tsv(std::istream& in, const LanguageSpec& spec);
Lexicon load_wiktionary_tsv(const std::filesystem::path& path,
                            const LanguageSpec& spec);

Lexicon parse_cmudict(std::istream& in);
Lexicon load_cmudict(const std::filesystem::path& path);

std::pair<Lexicon, FilterReport> apply_filters(const Lexicon& lex);

std::pair<Lexicon, Lexicon> split_train_test(const Lexicon& lex,
                                             double test_fraction,
                                             std::uint64_t seed);

// Keeps at most `limit` entries, chosen by a seeded shuffle; order of the
// survivors follows the input.
Lexicon cap_entries(const Lexicon& lex, std::size_t limit, std::uint64_t seed);

// Token <-> id bijection with PAD, SOS, EOS, UNK at ids 0-3.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  Vocab();
  explicit Vocab(const std::set<std::string>& symbols);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // kUnk when absent
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // Specials are skipped.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

nlohmann::json to_json(const Vocab& vocab);
Vocab vocab_from_json(const nlohmann::json& j);

// Throws VocabError on an empty lexicon.
std::pair<Vocab, Vocab> build_vocabularies(const Lexicon& lex);

nlohmann::json to_json(const Lexicon& lex);
Lexicon lexicon_from_json(const nlohmann::json& j);
void save_lexicon(const Lexicon& lex, const std::filesystem::path& path);
Lexicon load_lexicon(const std::filesystem::path& path);

}  // namespace g2p

#endif  // G2P_LEXICON_H_
