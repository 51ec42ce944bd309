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

#ifndef G2P_STUDIO_H_
#define G2P_STUDIO_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "g2p/audio.h"
#include "g2p/lexicon.h"
#include "g2p/models.h"
#include "json.hpp"

namespace g2p {

struct SessionConfig {
  std::string session_id = "session";
  int sample_rate = 16000;
  int bit_depth = 16;
  double normalize_target_dbfs = -3.0;
  double trim_threshold_dbfs = -40.0;
  double trim_guard_ms = 100.0;
  bool auto_normalize = true;
  bool auto_trim = true;
  std::filesystem::path storage_dir = "recordings";
  int spectrogram_window = 512;
  int spectrogram_hop = 128;
  // Grapheme clusters removed before transcription.
  std::string punctuation = ".,;:!?\"()[]{}«»„“”…¿¡";
  std::string host = "127.0.0.1";
  int port = 8080;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const SessionConfig& config);
// Missing keys keep their defaults.
SessionConfig session_config_from_json(const nlohmann::json& j);
SessionConfig load_session_config(const std::filesystem::path& path);

struct Prompt {
  int index = 0;
  std::string text;
  std::optional<std::vector<PhonemeSequence>> phonetic;  // one per word
};

// One prompt per non-blank line. The optional sidecar holds aligned lines
// of tab-separated words, each a space-separated phoneme sequence; a blank
// sidecar line means no transcription. Throws ParseError.
std::vector<Prompt> load_prompts(const std::filesystem::path& path,
                                 const std::filesystem::path& sidecar = {});
std::vector<Prompt> parse_prompts(std::string_view text,
                                  std::string_view sidecar = {});

// Conventional sidecar location: "<prompts>.phon".
std::filesystem::path default_sidecar(const std::filesystem::path& prompts);

struct RecordingMeta {
  int prompt_index = 0;
  std::string file;  // relative to storage_dir
  double peak_dbfs = kSilenceFloorDbfs;
  double duration_s = 0.0;
  std::size_t samples = 0;
  bool normalized = false;
  bool trimmed = false;
  bool silent = false;
  std::vector<std::string> safe_copies;
};

nlohmann::json to_json(const RecordingMeta& meta);
RecordingMeta recording_meta_from_json(const nlohmann::json& j);

// Zero-padded storage name, e.g. "00007.wav".
std::string recording_filename(int index);

// Exactly `points` (min, max) pairs; pair k spans samples
// [k*n/points, (k+1)*n/points), widened to one sample when empty.
nlohmann::json decimate_waveform(const Waveform& wave, int points);

// Lowercased, punctuation-free, whitespace-split words.
std::vector<std::string> transcription_words(std::string_view text,
                                             std::string_view punctuation);

struct TranscribedWord {
  std::string word;
  PhonemeSequence phonemes;
  std::string provenance;  // "lexicon" or "model"

  friend bool operator==(const TranscribedWord&, const TranscribedWord&) = default;
};

// Language-keyed models and lexicons; safe for concurrent use once built.
class Transcriber {
 public:
  void add(const std::string& language,
           std::shared_ptr<const Seq2SeqModel> model,
           std::shared_ptr<const Lexicon> lexicon);
  std::vector<std::string> languages() const;
  bool empty() const { return entries_.empty(); }

  // Throws ServiceUnavailable when nothing is loaded and NotFound for an
  // unknown language. An empty language selects the only loaded one.
  std::vector<TranscribedWord> transcribe(std::string_view text,
                                          std::string_view language,
                                          std::string_view punctuation) const;

 private:
  struct Entry {
    std::shared_ptr<const Seq2SeqModel> model;
    std::shared_ptr<const Lexicon> lexicon;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

// State of one recording session backed by storage_dir. Reads share a lock;
// mutations take it exclusively and rewrite manifest.json atomically.
class StudioSession {
 public:
  // Restores recordings listed in an existing manifest whose files exist.
  StudioSession(SessionConfig config, std::vector<Prompt> prompts);

  const SessionConfig& config() const { return config_; }
  std::size_t prompt_count() const { return prompts_.size(); }

  nlohmann::json summary() const;
  nlohmann::json prompts_json() const;
  nlohmann::json prompt_json(int index) const;        // NotFound
  std::optional<RecordingMeta> recording(int index) const;

  // Throws NotFound, UnsupportedMedia, RateMismatch.
  RecordingMeta put_recording(int index, std::string_view wav_bytes);
  // Returns the copy's file name. Throws NotFound.
  std::string safe_copy(int index);

  nlohmann::json waveform_json(int index, int points) const;
  nlohmann::json spectrogram_json(int index) const;

  // Stores a transcription on a prompt and persists it.
  void set_phonetic(int index, std::vector<PhonemeSequence> phonetic);

  std::filesystem::path manifest_path() const;

 private:
  const Prompt& prompt_at(int index) const;
  std::string status(int index) const;
  nlohmann::json prompt_entry(int index) const;
  Waveform load_recording(int index) const;
  void write_manifest() const;

  SessionConfig config_;
  std::vector<Prompt> prompts_;
  std::map<int, RecordingMeta> recordings_;
  mutable std::shared_mutex mutex_;
};

// HTTP front end over one session and a transcriber.
class StudioServer {
 public:
  StudioServer(StudioSession& session, const Transcriber& transcriber);
  ~StudioServer();
  StudioServer(const StudioServer&) = delete;
  StudioServer& operator=(const StudioServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void listen();
  // bind() plus listen() on a background thread; waits until serving.
  int start(const std::string& host, int port = 0);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace g2p

#endif  // G2P_STUDIO_H_
