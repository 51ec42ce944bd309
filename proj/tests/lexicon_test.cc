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

#include <set>
#include <sstream>

#include "doctest.h"
#include "g2p/errors.h"
#include "g2p/lexicon.h"
#include "test_support.h"

namespace g2p {
namespace {

LanguageSpec latin_spec(int min_count = 1) {
  LanguageSpec s;
  s.language_code = "xx";
  for (char c = 'a'; c <= 'z'; ++c) s.alphabet.insert(std::string(1, c));
  s.stress_symbols = {"ˈ", "ˌ"};
  s.phoneme_min_count = min_count;
  return s;
}

Lexicon parse_tsv(const std::string& text, const LanguageSpec& spec) {
  std::istringstream in(text);
  return parse_wiktionary_tsv(in, spec);
}

Lexicon parse_cmu(const std::string& text) {
  std::istringstream in(text);
  return parse_cmudict(in);
}

LexiconEntry entry(std::string word, std::vector<PhonemeSequence> prons) {
  return {std::move(word), std::move(prons), LexiconSource::kWiktionaryTsv};
}

// Splits a space-separated expectation into tokens.
PhonemeSequence toks(const std::string& s) {
  PhonemeSequence out;
  std::istringstream in(s);
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

TEST_CASE("tokenize_ipa splits on grapheme clusters") {
  const LanguageSpec spec = latin_spec();
  CHECK(tokenize_ipa("kat", spec) == PhonemeSequence{"k", "a", "t"});
  long stripped = 0;
  CHECK(tokenize_ipa("ˈkat", spec, &stripped) == PhonemeSequence{"k", "a", "t"});
  CHECK(stripped == 1);
  CHECK(tokenize_ipa("t͡ʃa", spec) == PhonemeSequence{"t͡ʃ", "a"});
  CHECK_THROWS_AS(tokenize_ipa("ˈ ˌ", spec), EmptyPronunciation);
  CHECK_THROWS_AS(tokenize_ipa("", spec), EmptyPronunciation);
}

TEST_CASE("tokenize_ipa matches hand segmentation of a 20-string fixture") {
  // Expected tokens segmented by hand: one token per base character with
  // its combining marks; tie-barred pairs form one token; stress dropped;
  // spacing modifier letters (ː, ʰ) are characters of their own.
  const std::vector<std::pair<std::string, std::string>> fixture = {
      {"kat", "k a t"},
      {"ˈkat", "k a t"},
      {"t͡ʃa", "t͡ʃ a"},
      {"d͡ʒɔj", "d͡ʒ ɔ j"},
      {"t͜sar", "t͜s a r"},
      {"ˌʃɛ̃ˈbɔ", "ʃ ɛ̃ b ɔ"},
      {"n̩", "n̩"},
      {"aː", "a ː"},
      {"pʰa", "p ʰ a"},
      {"ɡʁɑ̃", "ɡ ʁ ɑ̃"},
      {"ka t", "k a t"},
      {"ˈt͡sˌu", "t͡s u"},
      {"ŋ̊a", "ŋ̊ a"},
      {"ʔə", "ʔ ə"},
      {"mʲæ", "m ʲ æ"},
      {"ɪ̯a", "ɪ̯ a"},
      {"ˈˈa", "a"},
      {"t͡ɕ͡", "t͡ɕ͡"},
      {"bɨ̞", "b ɨ̞"},
      {"ʒ̥ʊ", "ʒ̥ ʊ"},
  };
  const LanguageSpec spec = latin_spec();
  for (const auto& [raw, expected] : fixture) {
    INFO(raw);
    const auto got = tokenize_ipa(raw, spec);
    CHECK(got == toks(expected));
    for (const auto& t : got) CHECK_FALSE(spec.stress_symbols.contains(t));
  }
}

TEST_CASE("TSV ingestion collapses exact duplicates and keeps variants") {
  const LanguageSpec spec = latin_spec();
  Lexicon dup = parse_tsv("abc\tabk\nabc\tabk\n", spec);
  REQUIRE(dup.size() == 1);
  CHECK(dup.entries()[0].pronunciations.size() == 1);
  CHECK(dup.ingest().collapsed_duplicates == 1);
  CHECK(dup.ingest().records == 2);

  Lexicon var = parse_tsv("abc\tabk\nabc\tapk\n", spec);
  REQUIRE(var.size() == 1);
  CHECK(var.entries()[0].pronunciations.size() == 2);

  CHECK(parse_tsv("", spec).empty());
  CHECK(parse_tsv("\n\n", spec).empty());
}

TEST_CASE("TSV ingestion normalizes words and counts phonemes") {
  Lexicon lex = parse_tsv("Cat\tkat\nact\takt\n", latin_spec());
  REQUIRE(lex.find("cat") != nullptr);
  CHECK(lex.find("Cat") == nullptr);
  CHECK(lex.phoneme_counts().at("a") == 2);
  CHECK(lex.phoneme_counts().at("k") == 2);
  CHECK(lex.phoneme_counts().at("t") == 2);
}

TEST_CASE("TSV errors carry line numbers") {
  const LanguageSpec spec = latin_spec();
  try {
    parse_tsv("abc\tabk\nno tab here\n", spec);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    parse_tsv("a\tb\tc\n", spec);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(parse_tsv("abc\tˈ\n", spec), ParseError);
  CHECK_THROWS_AS(load_wiktionary_tsv("/nonexistent/file.tsv", spec), IoError);
}

TEST_CASE("CMUdict parsing") {
  Lexicon cat = parse_cmu("CAT  K AE1 T\n");
  REQUIRE(cat.size() == 1);
  CHECK(cat.entries()[0].word == "cat");
  CHECK(cat.entries()[0].pronunciations[0] == PhonemeSequence{"K", "AE", "T"});
  CHECK(cat.ingest().stress_symbols_stripped == 1);

  CHECK(parse_cmu("3-D  TH R IY1 D IY2\n").empty());
  CHECK(parse_cmu("CAT'S  K AE1 T S\n").find("cat's") != nullptr);
  CHECK(parse_cmu(";;; comment\n").empty());

  Lexicon variants = parse_cmu("READ  R IY1 D\nREAD(1)  R EH1 D\n");
  REQUIRE(variants.size() == 1);
  CHECK(variants.entries()[0].pronunciations.size() == 2);
  CHECK_THROWS_AS(load_cmudict("/nonexistent/cmudict"), IoError);
}

TEST_CASE("CMUdict fixture with 39 phonemes gives a 43-symbol vocabulary") {
  Lexicon lex = load_cmudict(testing::data_path("cmudict_sample.dict"));
  CHECK(lex.find("3-d") == nullptr);
  CHECK(lex.find("cat's") != nullptr);
  CHECK(lex.phoneme_counts().size() == 39);
  auto [gv, pv] = build_vocabularies(lex);
  CHECK(pv.size() == 43);
  for (const auto& [p, _] : lex.phoneme_counts()) {
    for (char c : p) CHECK_FALSE((c >= '0' && c <= '9'));
  }
}

TEST_CASE("filter rule 1 removes words with foreign graphemes") {
  Lexicon lex(latin_spec(), {entry("café", {{"k", "a", "f", "e"}}),
                             entry("cafe", {{"k", "a", "f"}})});
  auto [out, report] = apply_filters(lex);
  CHECK(out.find("café") == nullptr);
  CHECK(out.find("cafe") != nullptr);
  CHECK(report.removed_bad_grapheme == 1);
}

TEST_CASE("filter rule 2 uses a strict length ratio") {
  Lexicon lex(latin_spec(),
              {entry("go", {{"a", "b", "c", "d", "e", "f", "g"}}),
               entry("to", {{"a", "b", "c", "d", "e"}})});
  auto [out, report] = apply_filters(lex);
  CHECK(out.find("go") == nullptr);  // 7 > 2.5 * 2
  CHECK(out.find("to") != nullptr);  // 5 == 2.5 * 2 is kept
  CHECK(report.removed_length_ratio == 1);
}

// Distinct three-letter words.
std::string nth_word(int i) {
  return {static_cast<char>('a' + i / 676), static_cast<char>('a' + i / 26 % 26),
          static_cast<char>('a' + i % 26)};
}

TEST_CASE("filter rule 3 boundary: count 99 removed, 100 kept") {
  std::vector<LexiconEntry> entries;
  for (int i = 0; i < 99; ++i) entries.push_back(entry(nth_word(i), {{"a", "x"}}));
  for (int i = 99; i < 199; ++i) entries.push_back(entry(nth_word(i), {{"a", "y"}}));
  Lexicon lex(latin_spec(100), entries);
  CHECK(lex.phoneme_counts().at("x") == 99);
  CHECK(lex.phoneme_counts().at("y") == 100);
  auto [out, report] = apply_filters(lex);
  CHECK(report.removed_rare_phoneme == 99);
  CHECK(out.phoneme_counts().count("x") == 0);
  CHECK(out.phoneme_counts().at("y") == 100);
  CHECK(out.size() == 100);
}

TEST_CASE("rare-phoneme removal is repeated until no phoneme is rare") {
  // z occurs once; removing that pronunciation drops q from 3 to 2.
  std::vector<LexiconEntry> entries = {entry("aa", {{"z", "q"}}),
                                       entry("ab", {{"q", "a"}}),
                                       entry("ac", {{"q", "a"}})};
  for (int i = 0; i < 3; ++i) entries.push_back(entry(nth_word(i), {{"a"}}));
  auto [out, report] = apply_filters(Lexicon(latin_spec(3), entries));
  CHECK(report.removed_rare_phoneme == 3);
  CHECK(report.rare_phoneme_rounds == 2);
  for (const auto& [p, n] : out.phoneme_counts()) CHECK(n >= 3);
}

TEST_CASE("planted-violation fixture gives exact filter counts") {
  const LanguageSpec spec = load_language_spec(testing::data_path("planted_spec.json"));
  Lexicon raw = load_wiktionary_tsv(testing::data_path("planted.tsv"), spec);
  auto [once, r1] = apply_filters(raw);
  CHECK(r1.input_records == 17);
  CHECK(r1.removed_bad_grapheme == 3);
  CHECK(r1.removed_length_ratio == 2);
  CHECK(r1.removed_rare_phoneme == 1);
  CHECK(r1.collapsed_duplicates == 2);
  CHECK(r1.stress_symbols_stripped == 1);
  CHECK(r1.surviving_entries == 9);
  CHECK(r1.surviving_entries == r1.input_records - r1.removed_bad_grapheme -
                                    r1.removed_length_ratio -
                                    r1.removed_rare_phoneme -
                                    r1.collapsed_duplicates);

  auto [twice, r2] = apply_filters(once);
  CHECK(twice == once);
  CHECK(r2.removed_bad_grapheme == 0);
  CHECK(r2.removed_length_ratio == 0);
  CHECK(r2.removed_rare_phoneme == 0);
  CHECK(r2.collapsed_duplicates == 0);
  CHECK(r2.surviving_entries == 9);
}

TEST_CASE("after filtering every phoneme meets the minimum count") {
  const Lexicon toy = testing::toy_lexicon();
  for (int min_count : {1, 5, 20, 60}) {
    LanguageSpec spec = toy.spec();
    spec.phoneme_min_count = min_count;
    auto [out, report] = apply_filters(Lexicon(spec, toy.entries()));
    for (const auto& [p, n] : out.phoneme_counts()) CHECK(n >= min_count);
    CHECK(report.surviving_entries == out.pronunciation_count());
    auto [again, _] = apply_filters(out);
    CHECK(again == out);
  }
}

TEST_CASE("split_train_test cardinality, determinism and disjointness") {
  const Lexicon toy = testing::toy_lexicon();
  std::vector<LexiconEntry> first100(toy.entries().begin(),
                                     toy.entries().begin() + 100);
  Lexicon lex(toy.spec(), first100);
  auto [train, test] = split_train_test(lex, 0.2, 7);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  auto [train2, test2] = split_train_test(lex, 0.2, 7);
  CHECK(train2 == train);
  CHECK(test2 == test);

  std::vector<LexiconEntry> first10(toy.entries().begin(),
                                    toy.entries().begin() + 10);
  auto [tr10, te10] = split_train_test(Lexicon(toy.spec(), first10), 0.2, 1);
  CHECK(te10.size() == 2);
  for (const auto& e : te10.entries()) CHECK(tr10.find(e.word) == nullptr);

  Lexicon one(toy.spec(), {toy.entries()[0]});
  CHECK_THROWS_AS(split_train_test(one, 0.2, 1), SplitError);
}

TEST_CASE("split union and disjointness hold over 100 seeds") {
  const Lexicon toy = testing::toy_lexicon();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto [train, test] = split_train_test(toy, 0.2, seed);
    std::set<std::string> seen;
    for (const auto& e : train.entries()) seen.insert(e.word);
    for (const auto& e : test.entries()) {
      CHECK(seen.insert(e.word).second);
    }
    CHECK(seen.size() == toy.size());
    CHECK(train.pronunciation_count() + test.pronunciation_count() ==
          toy.pronunciation_count());
  }
}

TEST_CASE("cap_entries keeps a seeded subset in input order") {
  const Lexicon toy = testing::toy_lexicon();
  Lexicon capped = cap_entries(toy, 50, 3);
  CHECK(capped.size() == 50);
  CHECK(cap_entries(toy, 50, 3) == capped);
  CHECK(cap_entries(toy, 1000, 3).size() == toy.size());
  std::size_t pos = 0;
  for (const auto& e : capped.entries()) {
    while (toy.entries()[pos].word != e.word) ++pos;
  }
}

TEST_CASE("vocabularies put specials first and round-trip") {
  Lexicon lex(latin_spec(), {entry("ab", {{"a", "b"}}), entry("ba", {{"b", "a"}})});
  auto [gv, pv] = build_vocabularies(lex);
  CHECK(gv.size() == 6);
  CHECK(gv.token(Vocab::kPad) == "<pad>");
  CHECK(gv.id("a") == 4);
  CHECK(gv.id("zz") == Vocab::kUnk);
  CHECK(vocab_from_json(to_json(pv)) == pv);
  CHECK_THROWS_AS(build_vocabularies(Lexicon(latin_spec(), {})), VocabError);
}

TEST_CASE("encode then decode is the identity on every toy entry") {
  const Lexicon toy = testing::toy_lexicon();
  auto [gv, pv] = build_vocabularies(toy);
  for (const auto& e : toy.entries()) {
    const auto g = word_graphemes(e.word);
    CHECK(gv.decode(gv.encode(g)) == g);
    for (const auto& p : e.pronunciations) CHECK(pv.decode(pv.encode(p)) == p);
  }
}

TEST_CASE("lexicon and spec JSON round-trip") {
  const Lexicon toy = testing::toy_lexicon();
  CHECK(lexicon_from_json(to_json(toy)) == toy);
  CHECK(language_spec_from_json(to_json(toy.spec())) == toy.spec());
  testing::TempDir dir;
  save_lexicon(toy, dir / "toy.json");
  CHECK(load_lexicon(dir / "toy.json") == toy);
}

TEST_CASE("language spec validation") {
  nlohmann::json j = {{"language_code", "xx"}, {"alphabet", ""}};
  CHECK_THROWS_AS(language_spec_from_json(j), ConfigError);
  j = {{"language_code", "xx"}, {"alphabet", "ab"}, {"length_ratio_max", 1.0}};
  CHECK_THROWS_AS(language_spec_from_json(j), ConfigError);
  j = {{"language_code", "xx"}, {"alphabet", "ab"}, {"phoneme_min_count", 0}};
  CHECK_THROWS_AS(language_spec_from_json(j), ConfigError);
}

}  // namespace
}  // namespace g2p
