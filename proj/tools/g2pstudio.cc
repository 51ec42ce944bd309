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

// Command-line entry point: lexicon preparation, training, evolution,
// evaluation, transcription and the recording service.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "g2p/checkpoint.h"
#include "g2p/errors.h"
#include "g2p/evolution.h"
#include "g2p/genome.h"
#include "g2p/lexicon.h"
#include "g2p/metrics.h"
#include "g2p/models.h"
#include "g2p/studio.h"
#include "g2p/training.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Globals {
  std::uint64_t seed = 0;
  bool no_timestamps = false;
  std::string log_level = "info";
};

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw g2p::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw g2p::IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw g2p::FormatError(path.string() + ": " + e.what());
  }
}

// A genome argument is either a JSON file or inline JSON.
g2p::Genome load_genome(const std::string& arg) {
  if (fs::exists(arg)) return g2p::genome_from_json(read_json(arg));
  try {
    return g2p::genome_from_json(json::parse(arg));
  } catch (const json::parse_error&) {
    throw g2p::IoError("genome '" + arg + "' is neither a file nor JSON");
  }
}

void log_config(const char* command, const json& config) {
  spdlog::info("{} config: {}", command, config.dump());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string join(const g2p::PhonemeSequence& p) {
  std::string out;
  for (const auto& t : p) out += (out.empty() ? "" : " ") + t;
  return out;
}

// --- lexicon prepare -----------------------------------------------------

struct PrepareArgs {
  std::string spec, tsv, cmudict, out, report;
};

int run_prepare(const PrepareArgs& a, const Globals&) {
  log_config("lexicon prepare", {{"spec", a.spec}, {"in", a.tsv},
                                 {"cmudict", a.cmudict}, {"out", a.out},
                                 {"report", a.report}});
  g2p::Lexicon raw;
  if (!a.cmudict.empty()) {
    raw = g2p::load_cmudict(a.cmudict);
    if (!a.spec.empty()) {
      raw = g2p::Lexicon(g2p::load_language_spec(a.spec), raw.entries(),
                         raw.ingest());
    }
  } else {
    if (a.spec.empty()) throw CLI::RequiredError("--spec");
    raw = g2p::load_wiktionary_tsv(a.tsv, g2p::load_language_spec(a.spec));
  }
  auto [filtered, report] = g2p::apply_filters(raw);
  g2p::save_lexicon(filtered, a.out);
  const json rj = g2p::to_json(report);
  if (!a.report.empty()) write_json(a.report, rj);
  std::printf("records in:          %ld\n", report.input_records);
  std::printf("bad grapheme:        %ld\n", report.removed_bad_grapheme);
  std::printf("length ratio:        %ld\n", report.removed_length_ratio);
  std::printf("rare phoneme:        %ld\n", report.removed_rare_phoneme);
  std::printf("duplicates:          %ld\n", report.collapsed_duplicates);
  std::printf("stress stripped:     %ld\n", report.stress_symbols_stripped);
  std::printf("surviving records:   %ld (%ld words)\n", report.surviving_entries,
              report.surviving_words);
  return kExitOk;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string lexicon, arch, genome, out, history, summary, test_out;
  int epochs = 20;
  double test_fraction = 0.2;
  double lr = 1e-3;
  bool no_early_stop = false;
  int max_len = g2p::kDefaultMaxLen;
};

int run_train(const TrainArgs& a, const Globals& g) {
  // Without --arch the genome decides; with neither, a default CNN.
  const auto arch = g2p::architecture_from_string(a.arch.empty() ? "cnn" : a.arch);
  g2p::Genome genome = a.genome.empty()
                           ? (arch == g2p::Architecture::kCnn
                                  ? g2p::Genome(g2p::CnnGenome{})
                                  : g2p::Genome(g2p::TransformerGenome{}))
                           : load_genome(a.genome);
  if (!a.arch.empty() && g2p::architecture_of(genome) != arch) {
    throw g2p::ConfigError("genome architecture does not match --arch");
  }
  g2p::validate(genome);
  g2p::TrainConfig tc;
  tc.max_epochs = a.epochs;
  tc.early_stop = !a.no_early_stop;
  tc.seed = g.seed;
  tc.learning_rate = a.lr;
  tc.validate();
  log_config("train", {{"lexicon", a.lexicon}, {"genome", g2p::to_json(genome)},
                       {"epochs", a.epochs}, {"early_stop", tc.early_stop},
                       {"window", tc.early_stop_window},
                       {"threshold", tc.early_stop_threshold},
                       {"lr", a.lr}, {"test_fraction", a.test_fraction},
                       {"max_len", a.max_len}, {"seed", g.seed}});

  const g2p::Lexicon lex = g2p::load_lexicon(a.lexicon);
  g2p::Lexicon train_lex = lex, test_lex;
  if (a.test_fraction > 0.0) {
    std::tie(train_lex, test_lex) = g2p::split_train_test(lex, a.test_fraction, g.seed);
    if (!a.test_out.empty()) g2p::save_lexicon(test_lex, a.test_out);
  }
  auto [gv, pv] = g2p::build_vocabularies(lex);
  auto model = g2p::build_model(genome, gv, pv, a.max_len, g.seed);
  std::printf("genome %s: %ld parameters\n", g2p::describe(genome).c_str(),
              model->param_count());

  const auto t0 = std::chrono::steady_clock::now();
  tc.on_epoch_end = [](int epoch, const g2p::TrainHistory& h) {
    spdlog::info("epoch {}: mean loss {:.5f}", epoch + 1, h.epoch_loss.back());
    return false;
  };
  const g2p::TrainHistory history = g2p::train(*model, train_lex, tc);
  const double elapsed = seconds_since(t0);
  g2p::save_checkpoint(*model, a.out,
                       {{"language", lex.spec().language_code},
                        {"train_words", train_lex.size()}});
  if (!a.history.empty()) g2p::write_history_csv(history, a.history);

  json summary = g2p::summary_json(history);
  summary["genome"] = g2p::to_json(genome);
  summary["param_count"] = model->param_count();
  if (!test_lex.empty()) {
    const g2p::EvalReport r = g2p::evaluate(*model, test_lex, &train_lex);
    summary["test"] = g2p::to_json(r, false);
    std::printf("%s", g2p::format_table({{"test", &r}}).c_str());
  }
  if (!g.no_timestamps) summary["train_seconds"] = elapsed;
  if (!a.summary.empty()) write_json(a.summary, summary);
  std::printf("%ld steps, %zu epochs%s, final loss %.5f\n", history.steps_run,
              history.epoch_loss.size(),
              history.stopped_early ? " (early stop)" : "",
              history.step_loss.empty() ? 0.0 : history.step_loss.back());
  return kExitOk;
}

// --- evolve --------------------------------------------------------------

struct EvolveArgs {
  std::string lexicon, arch = "cnn", out, log;
  g2p::EsConfig es;
};

int run_evolve(EvolveArgs a, const Globals& g) {
  const auto arch = g2p::architecture_from_string(a.arch);
  a.es.seed = g.seed;
  a.es.validate();
  log_config("evolve",
             {{"lexicon", a.lexicon}, {"arch", a.arch},
              {"population", a.es.population_size},
              {"generations", a.es.generations}, {"elite", a.es.elite_fraction},
              {"lessfit", a.es.lessfit_parent_prob},
              {"mutation", a.es.mutation_prob_per_gene},
              {"tournament", a.es.tournament_size},
              {"fitness_epochs", a.es.fitness_epochs},
              {"holdout", a.es.fitness_holdout}, {"train_cap", a.es.train_cap},
              {"jobs", a.es.jobs}, {"seed", a.es.seed}});
  const g2p::Lexicon lex = g2p::load_lexicon(a.lexicon);
  std::ofstream log(a.log);
  if (!log) throw g2p::IoError("cannot write " + a.log);
  auto result = g2p::run_es(lex, arch, a.es, [&](const g2p::EsLogEntry& e) {
    log << g2p::to_json(e).dump() << '\n';
    log.flush();
  });
  json best = g2p::to_json(result.best.genome);
  write_json(a.out, best);
  std::printf("best %s: WER %.2f PER %.2f (%ld parameters)\n",
              g2p::describe(result.best.genome).c_str(),
              result.best.fitness_wer, result.best.fitness_per,
              result.best.param_count);
  return kExitOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, lexicon, report;
  bool words = true;
};

int run_eval(const EvalArgs& a, const Globals& g) {
  log_config("eval", {{"ckpt", a.ckpt}, {"lexicon", a.lexicon},
                      {"report", a.report}, {"words", a.words}});
  auto loaded = g2p::load_checkpoint(a.ckpt);
  const g2p::Lexicon lex = g2p::load_lexicon(a.lexicon);
  const auto t0 = std::chrono::steady_clock::now();
  const g2p::EvalReport r = g2p::evaluate(*loaded.model, lex);
  const double elapsed = seconds_since(t0);
  json j = g2p::to_json(r, a.words);
  j["genome"] = g2p::to_json(loaded.model->genome());
  if (!g.no_timestamps) {
    j["seconds"] = elapsed;
    j["words_per_second"] = r.n_words / std::max(elapsed, 1e-9);
  }
  if (!a.report.empty()) write_json(a.report, j);
  std::printf("%s", g2p::format_table({{fs::path(a.lexicon).stem().string(), &r}}).c_str());
  std::printf("%.1f words/s\n", r.n_words / std::max(elapsed, 1e-9));
  return kExitOk;
}

// --- transcribe ----------------------------------------------------------

struct TranscribeArgs {
  std::string ckpt, lexicon, text, file, out, language;
};

std::string language_of(const json& header, const g2p::Lexicon* lex) {
  if (header.contains("extra") && header["extra"].contains("language")) {
    return header["extra"]["language"].get<std::string>();
  }
  return lex ? lex->spec().language_code : std::string("und");
}

int run_transcribe(const TranscribeArgs& a, const Globals& g) {
  log_config("transcribe", {{"ckpt", a.ckpt}, {"lexicon", a.lexicon},
                            {"file", a.file}, {"out", a.out}});
  auto loaded = g2p::load_checkpoint(a.ckpt);
  std::shared_ptr<const g2p::Lexicon> lex;
  if (!a.lexicon.empty()) {
    lex = std::make_shared<const g2p::Lexicon>(g2p::load_lexicon(a.lexicon));
  }
  g2p::Transcriber tr;
  const std::string lang = language_of(loaded.header, lex.get());
  tr.add(lang, std::shared_ptr<const g2p::Seq2SeqModel>(std::move(loaded.model)),
         lex);

  std::vector<std::string> lines;
  if (!a.file.empty()) {
    std::ifstream in(a.file);
    if (!in) throw g2p::IoError("cannot open " + a.file);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  } else {
    lines.push_back(a.text);
  }
  g2p::SessionConfig defaults;
  const auto t0 = std::chrono::steady_clock::now();
  json out = json::array();
  std::size_t n_words = 0;
  for (const auto& line : lines) {
    for (const auto& w : tr.transcribe(line, lang, defaults.punctuation)) {
      std::printf("%s\t%s\n", w.word.c_str(), join(w.phonemes).c_str());
      out.push_back({{"word", w.word}, {"phonemes", w.phonemes},
                     {"provenance", w.provenance}});
      ++n_words;
    }
  }
  const double elapsed = seconds_since(t0);
  if (!a.out.empty()) {
    json j = {{"language", lang}, {"words", out}};
    if (!g.no_timestamps) j["seconds"] = elapsed;
    write_json(a.out, j);
  }
  std::fprintf(stderr, "%zu words, %.1f words/s\n", n_words,
               n_words / std::max(elapsed, 1e-9));
  return kExitOk;
}

// --- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string config, prompts, sidecar, host;
  std::vector<std::string> ckpts, lexicons;
  int port = -1;
};

g2p::StudioServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a, const Globals&) {
  g2p::SessionConfig config = g2p::load_session_config(a.config);
  if (!a.host.empty()) config.host = a.host;
  if (a.port >= 0) config.port = a.port;
  config.validate();
  log_config("serve", {{"session", g2p::to_json(config)}, {"prompts", a.prompts},
                       {"ckpt", a.ckpts}, {"lexicon", a.lexicons}});

  std::vector<std::shared_ptr<const g2p::Lexicon>> lexicons;
  for (const auto& path : a.lexicons) {
    lexicons.push_back(std::make_shared<const g2p::Lexicon>(g2p::load_lexicon(path)));
  }
  g2p::Transcriber tr;
  for (const auto& path : a.ckpts) {
    auto loaded = g2p::load_checkpoint(path);
    const std::string lang = language_of(loaded.header, nullptr);
    std::shared_ptr<const g2p::Lexicon> match;
    for (const auto& l : lexicons) {
      if (l->spec().language_code == lang) match = l;
    }
    spdlog::info("loaded {} model for '{}'{}", path, lang,
                 match ? " with lexicon" : "");
    tr.add(lang, std::shared_ptr<const g2p::Seq2SeqModel>(std::move(loaded.model)),
           match);
  }

  g2p::StudioSession session(config, g2p::load_prompts(a.prompts, a.sidecar));
  g2p::StudioServer server(session, tr);
  const int port = server.bind(config.host, config.port);
  std::printf("serving %zu prompts on http://%s:%d\n", session.prompt_count(),
              config.host.c_str(), port);
  std::fflush(stdout);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"G2P training, evaluation and prompted-speech recording toolkit",
               "g2pstudio"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed for every stochastic step");
  app.add_flag("--no-timestamps", g.no_timestamps,
               "Omit timings from JSON outputs so reruns are byte-identical");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  auto* lexicon_cmd = app.add_subcommand("lexicon", "Lexicon tools");
  lexicon_cmd->require_subcommand(1);
  PrepareArgs prep;
  auto* prepare = lexicon_cmd->add_subcommand(
      "prepare", "Parse and filter a raw lexicon into lexicon JSON");
  prepare->add_option("--spec", prep.spec, "Language spec JSON");
  auto* in_opt = prepare->add_option("--in", prep.tsv, "Wiktionary-style TSV")
                     ->check(CLI::ExistingFile);
  auto* cmu_opt = prepare->add_option("--cmudict", prep.cmudict, "CMUdict file")
                      ->check(CLI::ExistingFile);
  in_opt->excludes(cmu_opt);
  prepare->add_option("--out", prep.out, "Output lexicon JSON")->required();
  prepare->add_option("--report", prep.report, "Filter report JSON");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a G2P model");
  train->add_option("--lexicon", tr.lexicon, "Lexicon JSON")->required()
      ->check(CLI::ExistingFile);
  train->add_option("--arch", tr.arch,
                    "cnn|transformer; defaults to the genome's, else cnn")
      ->check(CLI::IsMember({"cnn", "transformer"}));
  train->add_option("--genome", tr.genome, "Genome JSON file or inline JSON");
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--epochs", tr.epochs, "Maximum epochs");
  train->add_option("--lr", tr.lr, "Learning rate");
  train->add_option("--test-fraction", tr.test_fraction,
                    "Held-out fraction (0 trains on everything)");
  train->add_option("--test-out", tr.test_out, "Write the held-out lexicon");
  train->add_flag("--no-early-stop", tr.no_early_stop, "Run all epochs");
  train->add_option("--max-len", tr.max_len, "Longest sequence incl. markers");
  train->add_option("--history", tr.history, "Per-step loss CSV");
  train->add_option("--summary", tr.summary, "Training summary JSON");

  EvolveArgs ev;
  auto* evolve = app.add_subcommand("evolve", "Evolution-strategy genome search");
  evolve->add_option("--lexicon", ev.lexicon, "Lexicon JSON")->required()
      ->check(CLI::ExistingFile);
  evolve->add_option("--arch", ev.arch, "cnn|transformer")
      ->check(CLI::IsMember({"cnn", "transformer"}));
  evolve->add_option("--out", ev.out, "Best genome JSON")->required();
  evolve->add_option("--log", ev.log, "Generation log (JSON lines)")->required();
  evolve->add_option("--jobs", ev.es.jobs, "Concurrent fitness evaluations");
  evolve->add_option("--population", ev.es.population_size, "Population size");
  evolve->add_option("--generations", ev.es.generations, "Generations");
  evolve->add_option("--elite", ev.es.elite_fraction, "Elite fraction");
  evolve->add_option("--lessfit", ev.es.lessfit_parent_prob,
                     "Probability a non-elite joins the parent pool");
  evolve->add_option("--mutation", ev.es.mutation_prob_per_gene,
                     "Per-gene mutation probability");
  evolve->add_option("--tournament", ev.es.tournament_size,
                     "Parent tournament size");
  evolve->add_option("--fitness-epochs", ev.es.fitness_epochs,
                     "Training epochs per fitness evaluation");
  evolve->add_option("--holdout", ev.es.fitness_holdout, "Fitness holdout size");
  evolve->add_option("--train-cap", ev.es.train_cap, "Lexicon cap");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a lexicon");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint")->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--lexicon", ea.lexicon, "Lexicon JSON")->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--report", ea.report, "Report JSON");
  eval->add_flag("--words,!--no-words", ea.words, "Include per-word results");

  TranscribeArgs ta;
  auto* transcribe = app.add_subcommand("transcribe", "Transcribe text");
  transcribe->add_option("--ckpt", ta.ckpt, "Checkpoint")->required()
      ->check(CLI::ExistingFile);
  transcribe->add_option("--lexicon", ta.lexicon, "Lexicon JSON for lookup")
      ->check(CLI::ExistingFile);
  auto* text_opt = transcribe->add_option("--text", ta.text, "Text to transcribe");
  auto* file_opt = transcribe->add_option("--file", ta.file, "One text per line")
                       ->check(CLI::ExistingFile);
  text_opt->excludes(file_opt);
  transcribe->add_option("--out", ta.out, "Result JSON");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the recording service");
  serve->add_option("--config", sa.config, "Session config JSON")->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--ckpt", sa.ckpts, "Checkpoint (repeatable, one per language)")
      ->check(CLI::ExistingFile);
  serve->add_option("--lexicon", sa.lexicons, "Lexicon JSON (repeatable)")
      ->check(CLI::ExistingFile);
  serve->add_option("--prompts", sa.prompts, "Prompt file")->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--sidecar", sa.sidecar, "Phonetic sidecar file");
  serve->add_option("--host", sa.host, "Override config host");
  serve->add_option("--port", sa.port, "Override config port (0 = any)");

  try {
    app.parse(argc, argv);
    if (prepare->parsed() && prep.tsv.empty() && prep.cmudict.empty()) {
      throw CLI::RequiredError("--in or --cmudict");
    }
    if (transcribe->parsed() && ta.text.empty() && ta.file.empty()) {
      throw CLI::RequiredError("--text or --file");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Logs go to stderr; stdout carries the human-readable summary.
  spdlog::set_default_logger(spdlog::stderr_color_mt("g2pstudio"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  try {
    if (prepare->parsed()) return run_prepare(prep, g);
    if (train->parsed()) return run_train(tr, g);
    if (evolve->parsed()) return run_evolve(ev, g);
    if (eval->parsed()) return run_eval(ea, g);
    if (transcribe->parsed()) return run_transcribe(ta, g);
    if (serve->parsed()) return run_serve(sa, g);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
