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

#include "g2p/lexicon.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "g2p/errors.h"
#include "g2p/unicode.h"

namespace g2p {
namespace {

constexpr std::string_view kTieBars[] = {"͡", "͜"};

bool ends_with_tie_bar(std::string_view cluster) {
  for (auto tie : kTieBars) {
    if (cluster.size() >= tie.size() &&
        cluster.substr(cluster.size() - tie.size()) == tie) {
      return true;
    }
  }
  return false;
}

std::set<std::string> cluster_set(std::string_view text) {
  std::set<std::string> out;
  for (auto& c : unicode::grapheme_clusters(unicode::nfc(text))) {
    if (!unicode::is_space(c)) out.insert(std::move(c));
  }
  return out;
}

std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& c : s) out += c;
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

// Collects (word, pronunciation) records in first-seen order and collapses
// identical pairs.
class EntryAccumulator {
 public:
  explicit EntryAccumulator(LexiconSource source) : source_(source) {}

  void add(std::string word, PhonemeSequence pron) {
    ++stats_.records;
    auto [it, inserted] = index_.try_emplace(word, entries_.size());
    if (inserted) {
      entries_.push_back({std::move(word), {}, source_});
    }
    auto& prons = entries_[it->second].pronunciations;
    if (std::find(prons.begin(), prons.end(), pron) != prons.end()) {
      ++stats_.collapsed_duplicates;
      return;
    }
    prons.push_back(std::move(pron));
  }

  IngestStats& stats() { return stats_; }
  std::vector<LexiconEntry> take() { return std::move(entries_); }

 private:
  LexiconSource source_;
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  IngestStats stats_;
};

bool is_cmudict_word(std::string_view w) {
  if (w.empty()) return false;
  return std::all_of(w.begin(), w.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '\'';
  });
}

}  // namespace

std::string_view to_string(LexiconSource source) {
  switch (source) {
    case LexiconSource::kWiktionaryTsv:
      return "wiktionary_tsv";
    case LexiconSource::kCmudict:
      return "cmudict";
  }
  return "wiktionary_tsv";
}

LexiconSource lexicon_source_from_string(std::string_view name) {
  if (name == "wiktionary_tsv") return LexiconSource::kWiktionaryTsv;
  if (name == "cmudict") return LexiconSource::kCmudict;
  throw ConfigError("unknown lexicon source '" + std::string(name) + "'");
}

void LanguageSpec::validate() const {
  if (alphabet.empty()) throw ConfigError("alphabet must not be empty");
  if (phoneme_min_count < 1) throw ConfigError("phoneme_min_count must be >= 1");
  if (!(length_ratio_max > 1.0)) {
    throw ConfigError("length_ratio_max must be > 1");
  }
}

nlohmann::json to_json(const LanguageSpec& spec) {
  return {{"language_code", spec.language_code},
          {"alphabet", join(spec.alphabet)},
          {"stress_symbols", join(spec.stress_symbols)},
          {"phoneme_min_count", spec.phoneme_min_count},
          {"length_ratio_max", spec.length_ratio_max}};
}

LanguageSpec language_spec_from_json(const nlohmann::json& j) {
  LanguageSpec spec;
  try {
    spec.language_code = j.at("language_code").get<std::string>();
    spec.alphabet = cluster_set(
        unicode::to_lower(j.at("alphabet").get<std::string>()));
    spec.stress_symbols = cluster_set(j.value("stress_symbols", ""));
    spec.phoneme_min_count = j.value("phoneme_min_count", 100);
    spec.length_ratio_max = j.value("length_ratio_max", 2.5);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad language spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

LanguageSpec load_language_spec(const std::filesystem::path& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return language_spec_from_json(j);
}

LanguageSpec cmudict_language_spec() {
  LanguageSpec spec;
  spec.language_code = "en";
  for (char c = 'a'; c <= 'z'; ++c) spec.alphabet.insert(std::string(1, c));
  spec.alphabet.insert("'");
  spec.stress_symbols = {"0", "1", "2"};
  return spec;
}

Lexicon::Lexicon(LanguageSpec spec, std::vector<LexiconEntry> entries)
    : spec_(std::move(spec)), entries_(std::move(entries)) {
  recount();
  ingest_.records = pronunciation_count();
}

Lexicon::Lexicon(LanguageSpec spec, std::vector<LexiconEntry> entries,
                 IngestStats ingest)
    : spec_(std::move(spec)), entries_(std::move(entries)), ingest_(ingest) {
  recount();
}

void Lexicon::recount() {
  phoneme_counts_.clear();
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    index_.emplace(entries_[i].word, i);
    for (const auto& pron : entries_[i].pronunciations) {
      for (const auto& tok : pron) ++phoneme_counts_[tok];
    }
  }
}

long Lexicon::pronunciation_count() const {
  long n = 0;
  for (const auto& e : entries_) n += static_cast<long>(e.pronunciations.size());
  return n;
}

const LexiconEntry* Lexicon::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

nlohmann::json to_json(const FilterReport& r) {
  return {{"input_records", r.input_records},
          {"removed_bad_grapheme", r.removed_bad_grapheme},
          {"removed_length_ratio", r.removed_length_ratio},
          {"removed_rare_phoneme", r.removed_rare_phoneme},
          {"collapsed_duplicates", r.collapsed_duplicates},
          {"stress_symbols_stripped", r.stress_symbols_stripped},
          {"surviving_entries", r.surviving_entries},
          {"surviving_words", r.surviving_words},
          {"rare_phoneme_rounds", r.rare_phoneme_rounds}};
}

PhonemeSequence tokenize_ipa(std::string_view raw, const LanguageSpec& spec,
                             long* stripped) {
  PhonemeSequence out;
  bool join_next = false;
  for (auto& cluster : unicode::grapheme_clusters(unicode::nfc(raw))) {
    if (unicode::is_space(cluster)) {
      join_next = false;
      continue;
    }
    if (spec.stress_symbols.count(cluster)) {
      if (stripped) ++*stripped;
      continue;
    }
    if (join_next && !out.empty()) {
      out.back() += cluster;
    } else {
      out.push_back(cluster);
    }
    join_next = ends_with_tie_bar(out.back());
  }
  if (out.empty()) {
    throw EmptyPronunciation("empty pronunciation '" + std::string(raw) + "'");
  }
  return out;
}

std::vector<std::string> word_graphemes(std::string_view word) {
  return unicode::grapheme_clusters(word);
}

std::string normalize_word(std::string_view word) {
  return unicode::nfc(unicode::to_lower(unicode::trim(word)));
}

Lexicon parse_wiktionary_tsv(std::istream& in, const LanguageSpec& spec) {
  spec.validate();
  EntryAccumulator acc(LexiconSource::kWiktionaryTsv);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (unicode::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError("expected 'word<TAB>ipa'", line_no);
    }
    try {
      std::string word = normalize_word(std::string_view(line).substr(0, tab));
      if (word.empty()) throw ParseError("empty word", line_no);
      auto pron = tokenize_ipa(std::string_view(line).substr(tab + 1), spec,
                               &acc.stats().stress_symbols_stripped);
      acc.add(std::move(word), std::move(pron));
    } catch (const EmptyPronunciation&) {
      throw ParseError("empty pronunciation", line_no);
    } catch (const FormatError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  IngestStats stats = acc.stats();
  return Lexicon(spec, acc.take(), stats);
}

Lexicon load_wiktionary_tsv(const std::filesystem::path& path,
                            const LanguageSpec& spec) {
  auto in = open_input(path);
  return parse_wiktionary_tsv(in, spec);
}

Lexicon parse_cmudict(std::istream& in) {
  EntryAccumulator acc(LexiconSource::kCmudict);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(";;;", 0) == 0) continue;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    if (word.size() > 3 && word.back() == ')') {
      auto open = word.rfind('(');
      if (open != std::string::npos && open > 0 &&
          std::all_of(word.begin() + open + 1, word.end() - 1,
                      [](char c) { return c >= '0' && c <= '9'; })) {
        word.resize(open);
      }
    }
    if (!is_cmudict_word(word)) continue;
    long stress = 0;
    PhonemeSequence pron;
    for (std::string ph; fields >> ph;) {
      if (ph == "#") break;  // trailing comment in some releases
      while (!ph.empty() && ph.back() >= '0' && ph.back() <= '2') {
        ph.pop_back();
        ++stress;
      }
      if (!ph.empty()) pron.push_back(std::move(ph));
    }
    if (pron.empty()) continue;
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    acc.stats().stress_symbols_stripped += stress;
    acc.add(std::move(word), std::move(pron));
  }
  IngestStats stats = acc.stats();
  return Lexicon(cmudict_language_spec(), acc.take(), stats);
}

Lexicon load_cmudict(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_cmudict(in);
}

std::pair<Lexicon, FilterReport> apply_filters(const Lexicon& lex) {
  const LanguageSpec& spec = lex.spec();
  FilterReport report;
  report.input_records = lex.ingest().records;
  report.collapsed_duplicates = lex.ingest().collapsed_duplicates;
  report.stress_symbols_stripped = lex.ingest().stress_symbols_stripped;

  std::vector<LexiconEntry> kept;
  kept.reserve(lex.size());
  for (const auto& entry : lex.entries()) {
    auto graphemes = word_graphemes(entry.word);
    bool in_alphabet = std::all_of(
        graphemes.begin(), graphemes.end(),
        [&](const std::string& g) { return spec.alphabet.count(g) > 0; });
    if (!in_alphabet) {
      report.removed_bad_grapheme +=
          static_cast<long>(entry.pronunciations.size());
      continue;
    }
    const double cap =
        spec.length_ratio_max * static_cast<double>(graphemes.size());
    LexiconEntry out{entry.word, {}, entry.source};
    for (const auto& pron : entry.pronunciations) {
      if (static_cast<double>(pron.size()) > cap) {
        ++report.removed_length_ratio;
      } else {
        out.pronunciations.push_back(pron);
      }
    }
    if (!out.pronunciations.empty()) kept.push_back(std::move(out));
  }

  // Rare phonemes: counts are taken on the output of the two rules above.
  // Removing a pronunciation lowers the counts of its other phonemes, so the
  // step repeats until every surviving phoneme clears the threshold.
  for (;;) {
    std::map<std::string, long> counts;
    for (const auto& e : kept) {
      for (const auto& p : e.pronunciations) {
        for (const auto& t : p) ++counts[t];
      }
    }
    auto is_rare = [&](const std::string& t) {
      return counts[t] < spec.phoneme_min_count;
    };
    long removed = 0;
    std::vector<LexiconEntry> next;
    next.reserve(kept.size());
    for (auto& e : kept) {
      auto& prons = e.pronunciations;
      auto before = prons.size();
      prons.erase(std::remove_if(prons.begin(), prons.end(),
                                 [&](const PhonemeSequence& p) {
                                   return std::any_of(p.begin(), p.end(),
                                                      is_rare);
                                 }),
                  prons.end());
      removed += static_cast<long>(before - prons.size());
      if (!prons.empty()) next.push_back(std::move(e));
    }
    kept = std::move(next);
    if (removed == 0) break;
    report.removed_rare_phoneme += removed;
    ++report.rare_phoneme_rounds;
  }

  Lexicon out(spec, std::move(kept));
  report.surviving_entries = out.pronunciation_count();
  report.surviving_words = static_cast<long>(out.size());
  return {std::move(out), report};
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Lexicon subset(const Lexicon& lex, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  std::vector<LexiconEntry> entries;
  entries.reserve(indices.size());
  for (auto i : indices) entries.push_back(lex.entries()[i]);
  return Lexicon(lex.spec(), std::move(entries));
}

}  // namespace

std::pair<Lexicon, Lexicon> split_train_test(const Lexicon& lex,
                                             double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw SplitError("test fraction must lie in (0, 1)");
  }
  const std::size_t n = lex.size();
  if (n < 2) throw SplitError("need at least 2 entries to split");
  auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  auto idx = shuffled_indices(n, seed);
  std::vector<std::size_t> test(idx.begin(), idx.begin() + n_test);
  std::vector<std::size_t> train(idx.begin() + n_test, idx.end());
  return {subset(lex, std::move(train)), subset(lex, std::move(test))};
}

Lexicon cap_entries(const Lexicon& lex, std::size_t limit,
                    std::uint64_t seed) {
  if (lex.size() <= limit) return lex;
  auto idx = shuffled_indices(lex.size(), seed);
  idx.resize(limit);
  return subset(lex, std::move(idx));
}

Vocab::Vocab() : Vocab(std::set<std::string>{}) {}

Vocab::Vocab(const std::set<std::string>& symbols) {
  tokens_ = {"<pad>", "<s>", "</s>", "<unk>"};
  tokens_.insert(tokens_.end(), symbols.begin(), symbols.end());
  for (int i = 0; i < size(); ++i) ids_.emplace(tokens_[i], i);
  if (ids_.size() != tokens_.size()) {
    throw VocabError("symbol collides with a reserved special token");
  }
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw VocabError("id out of range");
  return tokens_[id];
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i >= kNumSpecials) out.push_back(token(i));
  }
  return out;
}

nlohmann::json to_json(const Vocab& vocab) { return vocab.tokens(); }

Vocab vocab_from_json(const nlohmann::json& j) {
  auto tokens = j.get<std::vector<std::string>>();
  if (tokens.size() < Vocab::kNumSpecials) throw VocabError("vocab too short");
  std::set<std::string> symbols(tokens.begin() + Vocab::kNumSpecials,
                                tokens.end());
  Vocab v(symbols);
  if (v.tokens() != tokens) throw VocabError("vocab tokens not canonical");
  return v;
}

std::pair<Vocab, Vocab> build_vocabularies(const Lexicon& lex) {
  if (lex.empty()) throw VocabError("cannot build vocabularies from an empty lexicon");
  std::set<std::string> graphemes;
  std::set<std::string> phonemes;
  for (const auto& e : lex.entries()) {
    for (auto& g : word_graphemes(e.word)) graphemes.insert(std::move(g));
    for (const auto& p : e.pronunciations) phonemes.insert(p.begin(), p.end());
  }
  return {Vocab(graphemes), Vocab(phonemes)};
}

nlohmann::json to_json(const Lexicon& lex) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : lex.entries()) {
    entries.push_back({{"word", e.word}, {"prons", e.pronunciations}});
  }
  std::string source = lex.empty()
                           ? std::string(to_string(LexiconSource::kWiktionaryTsv))
                           : std::string(to_string(lex.entries()[0].source));
  return {{"spec", to_json(lex.spec())},
          {"source", source},
          {"entries", std::move(entries)}};
}

Lexicon lexicon_from_json(const nlohmann::json& j) {
  try {
    LanguageSpec spec = language_spec_from_json(j.at("spec"));
    auto source = lexicon_source_from_string(j.value("source", "wiktionary_tsv"));
    std::vector<LexiconEntry> entries;
    for (const auto& e : j.at("entries")) {
      LexiconEntry entry;
      entry.word = e.at("word").get<std::string>();
      entry.pronunciations = e.at("prons").get<std::vector<PhonemeSequence>>();
      entry.source = source;
      if (entry.word.empty() || entry.pronunciations.empty()) {
        throw ConfigError("lexicon entry with empty word or no pronunciation");
      }
      entries.push_back(std::move(entry));
    }
    return Lexicon(std::move(spec), std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad lexicon JSON: ") + e.what());
  }
}

void save_lexicon(const Lexicon& lex, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(lex).dump(1) << '\n';
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return lexicon_from_json(j);
}

}  // namespace g2p
