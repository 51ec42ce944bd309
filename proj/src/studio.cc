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

#include "g2p/studio.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "g2p/errors.h"
#include "g2p/unicode.h"
#include "httplib.h"

namespace g2p {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string> split_space(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
                          now.time_since_epoch()).count() % 1000000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02d%02d%02d%06lldZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<long long>(micros));
  return buf;
}

}  // namespace

// --- configuration -------------------------------------------------------

void SessionConfig::validate() const {
  if (session_id.empty()) throw ConfigError("session_id must not be empty");
  if (sample_rate < 1000 || sample_rate > 384000) {
    throw ConfigError("sample_rate out of range");
  }
  if (bit_depth != 16 && bit_depth != 24 && bit_depth != 32) {
    throw ConfigError("bit_depth must be 16, 24 or 32");
  }
  if (normalize_target_dbfs > 0.0) {
    throw ConfigError("normalize_target_dbfs must be <= 0");
  }
  if (trim_threshold_dbfs >= 0.0) {
    throw ConfigError("trim_threshold_dbfs must be < 0");
  }
  if (trim_guard_ms < 0.0) throw ConfigError("trim_guard_ms must be >= 0");
  if (storage_dir.empty()) throw ConfigError("storage_dir must be set");
  if (spectrogram_window < 2 ||
      (spectrogram_window & (spectrogram_window - 1)) != 0) {
    throw ConfigError("spectrogram_window must be a power of two");
  }
  if (spectrogram_hop < 1 || spectrogram_hop > spectrogram_window) {
    throw ConfigError("spectrogram_hop must be in [1, window]");
  }
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
}

json to_json(const SessionConfig& c) {
  return {{"session_id", c.session_id},
          {"sample_rate", c.sample_rate},
          {"bit_depth", c.bit_depth},
          {"normalize_target_dbfs", c.normalize_target_dbfs},
          {"trim_threshold_dbfs", c.trim_threshold_dbfs},
          {"trim_guard_ms", c.trim_guard_ms},
          {"auto_normalize", c.auto_normalize},
          {"auto_trim", c.auto_trim},
          {"storage_dir", c.storage_dir.string()},
          {"spectrogram_window", c.spectrogram_window},
          {"spectrogram_hop", c.spectrogram_hop},
          {"punctuation", c.punctuation},
          {"host", c.host},
          {"port", c.port}};
}

SessionConfig session_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("session config must be a JSON object");
  static const std::set<std::string> known = {
      "session_id", "sample_rate", "bit_depth", "normalize_target_dbfs",
      "trim_threshold_dbfs", "trim_guard_ms", "auto_normalize", "auto_trim",
      "storage_dir", "spectrogram_window", "spectrogram_hop", "punctuation",
      "host", "port"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  SessionConfig c;
  try {
    c.session_id = j.value("session_id", c.session_id);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.bit_depth = j.value("bit_depth", c.bit_depth);
    c.normalize_target_dbfs =
        j.value("normalize_target_dbfs", c.normalize_target_dbfs);
    c.trim_threshold_dbfs = j.value("trim_threshold_dbfs", c.trim_threshold_dbfs);
    c.trim_guard_ms = j.value("trim_guard_ms", c.trim_guard_ms);
    c.auto_normalize = j.value("auto_normalize", c.auto_normalize);
    c.auto_trim = j.value("auto_trim", c.auto_trim);
    c.storage_dir = j.value("storage_dir", c.storage_dir.string());
    c.spectrogram_window = j.value("spectrogram_window", c.spectrogram_window);
    c.spectrogram_hop = j.value("spectrogram_hop", c.spectrogram_hop);
    c.punctuation = j.value("punctuation", c.punctuation);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad session config: ") + e.what());
  }
  c.validate();
  return c;
}

SessionConfig load_session_config(const fs::path& path) {
  try {
    SessionConfig c = session_config_from_json(json::parse(read_file(path)));
    if (c.storage_dir.is_relative()) {
      c.storage_dir = path.parent_path() / c.storage_dir;
    }
    return c;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- prompts -------------------------------------------------------------

std::vector<Prompt> parse_prompts(std::string_view text,
                                  std::string_view sidecar) {
  const auto lines = split_lines(text);
  const auto phon = split_lines(sidecar);
  if (!sidecar.empty() && phon.size() > lines.size()) {
    throw ParseError("phonetic sidecar has more lines than prompts",
                     lines.size() + 1);
  }
  std::vector<Prompt> prompts;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = unicode::trim(lines[i]);
    if (line.empty()) continue;
    Prompt p;
    p.index = static_cast<int>(prompts.size());
    p.text = unicode::nfc(line);
    if (i < phon.size() && !unicode::trim(phon[i]).empty()) {
      std::vector<PhonemeSequence> words;
      for (const auto& w : split_on(unicode::trim(phon[i]), '\t')) {
        words.push_back(split_space(w));
      }
      if (words.size() != split_space(p.text).size()) {
        throw ParseError("phonetic line does not have one entry per word", i + 1);
      }
      p.phonetic = std::move(words);
    }
    prompts.push_back(std::move(p));
  }
  return prompts;
}

fs::path default_sidecar(const fs::path& prompts) {
  fs::path p = prompts;
  p += ".phon";
  return p;
}

std::vector<Prompt> load_prompts(const fs::path& path, const fs::path& sidecar) {
  fs::path side = sidecar.empty() ? default_sidecar(path) : sidecar;
  std::string phon;
  if (fs::exists(side)) phon = read_file(side);
  else if (!sidecar.empty()) throw IoError("cannot open " + side.string());
  return parse_prompts(read_file(path), phon);
}

// --- recordings ----------------------------------------------------------

json to_json(const RecordingMeta& m) {
  return {{"prompt_index", m.prompt_index}, {"file", m.file},
          {"peak_dbfs", m.peak_dbfs},       {"duration_s", m.duration_s},
          {"samples", m.samples},           {"normalized", m.normalized},
          {"trimmed", m.trimmed},           {"silent", m.silent},
          {"safe_copies", m.safe_copies}};
}

RecordingMeta recording_meta_from_json(const json& j) {
  RecordingMeta m;
  m.prompt_index = j.at("prompt_index").get<int>();
  m.file = j.at("file").get<std::string>();
  m.peak_dbfs = j.at("peak_dbfs").get<double>();
  m.duration_s = j.at("duration_s").get<double>();
  m.samples = j.at("samples").get<std::size_t>();
  m.normalized = j.value("normalized", false);
  m.trimmed = j.value("trimmed", false);
  m.silent = j.value("silent", false);
  m.safe_copies = j.value("safe_copies", std::vector<std::string>{});
  return m;
}

std::string recording_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d.wav", index);
  return buf;
}

json decimate_waveform(const Waveform& wave, int points) {
  if (points < 1) throw ConfigError("points must be >= 1");
  const std::size_t n = wave.samples.size();
  json pairs = json::array();
  for (int k = 0; k < points; ++k) {
    if (n == 0) {
      pairs.push_back({0.0, 0.0});
      continue;
    }
    std::size_t b = k * n / points;
    std::size_t e = (k + 1) * n / points;
    b = std::min(b, n - 1);
    e = std::max(e, b + 1);
    const auto [lo, hi] = std::minmax_element(wave.samples.begin() + b,
                                              wave.samples.begin() + e);
    pairs.push_back({*lo, *hi});
  }
  return {{"points", points},
          {"samples", n},
          {"sample_rate", wave.sample_rate},
          {"duration_s", wave.duration_seconds()},
          {"pairs", std::move(pairs)}};
}

// --- transcription -------------------------------------------------------

std::vector<std::string> transcription_words(std::string_view text,
                                             std::string_view punctuation) {
  std::set<std::string, std::less<>> drop;
  for (auto& c : unicode::grapheme_clusters(punctuation)) drop.insert(c);
  std::string cleaned;
  for (const auto& c : unicode::grapheme_clusters(unicode::to_lower(text))) {
    if (drop.contains(c)) continue;
    cleaned += unicode::is_space(c) ? std::string(" ") : c;
  }
  return split_space(unicode::nfc(cleaned));
}

void Transcriber::add(const std::string& language,
                      std::shared_ptr<const Seq2SeqModel> model,
                      std::shared_ptr<const Lexicon> lexicon) {
  if (!model && !lexicon) throw ConfigError("transcriber needs a model or lexicon");
  entries_[language] = {std::move(model), std::move(lexicon)};
}

std::vector<std::string> Transcriber::languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, _] : entries_) out.push_back(lang);
  return out;
}

std::vector<TranscribedWord> Transcriber::transcribe(
    std::string_view text, std::string_view language,
    std::string_view punctuation) const {
  if (entries_.empty()) throw ServiceUnavailable("no G2P model loaded");
  auto it = language.empty() && entries_.size() == 1 ? entries_.begin()
                                                     : entries_.find(language);
  if (it == entries_.end()) {
    throw NotFound("no model for language '" + std::string(language) + "'");
  }
  const Entry& e = it->second;
  std::vector<TranscribedWord> out;
  for (auto& w : transcription_words(text, punctuation)) {
    const LexiconEntry* hit = e.lexicon ? e.lexicon->find(w) : nullptr;
    if (hit) {
      out.push_back({w, hit->pronunciations.front(), "lexicon"});
    } else if (e.model) {
      PhonemeSequence p = e.model->greedy_decode(w);
      out.push_back({w, std::move(p), "model"});
    } else {
      throw ServiceUnavailable("word '" + w + "' not in lexicon and no model");
    }
  }
  return out;
}

// --- session -------------------------------------------------------------

StudioSession::StudioSession(SessionConfig config, std::vector<Prompt> prompts)
    : config_(std::move(config)), prompts_(std::move(prompts)) {
  config_.validate();
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    if (prompts_[i].index != static_cast<int>(i)) {
      throw ConfigError("prompt indices must be dense from 0");
    }
    if (prompts_[i].text.empty()) throw ConfigError("prompt text is empty");
  }
  fs::create_directories(config_.storage_dir);
  const fs::path manifest = manifest_path();
  if (fs::exists(manifest)) {
    const json j = json::parse(read_file(manifest));
    for (const auto& r : j.value("recordings", json::array())) {
      RecordingMeta m = recording_meta_from_json(r);
      if (m.prompt_index < 0 ||
          m.prompt_index >= static_cast<int>(prompts_.size()) ||
          !fs::exists(config_.storage_dir / m.file)) {
        spdlog::warn("dropping stale manifest entry for prompt {}", m.prompt_index);
        continue;
      }
      std::erase_if(m.safe_copies, [&](const std::string& f) {
        return !fs::exists(config_.storage_dir / f);
      });
      recordings_[m.prompt_index] = std::move(m);
    }
    const json stored = j.value("prompts", json::array());
    for (const auto& p : stored) {
      const int i = p.value("index", -1);
      if (i >= 0 && i < static_cast<int>(prompts_.size()) &&
          p.value("text", std::string()) == prompts_[i].text &&
          !prompts_[i].phonetic && p.contains("phonetic") &&
          !p["phonetic"].is_null()) {
        prompts_[i].phonetic = p["phonetic"].get<std::vector<PhonemeSequence>>();
      }
    }
  }
  write_manifest();
}

fs::path StudioSession::manifest_path() const {
  return config_.storage_dir / "manifest.json";
}

const Prompt& StudioSession::prompt_at(int index) const {
  if (index < 0 || index >= static_cast<int>(prompts_.size())) {
    throw NotFound("no prompt " + std::to_string(index));
  }
  return prompts_[index];
}

std::string StudioSession::status(int index) const {
  auto it = recordings_.find(index);
  if (it == recordings_.end()) return "none";
  return it->second.safe_copies.empty() ? "recorded" : "safe-copied";
}

json StudioSession::prompt_entry(int index) const {
  const Prompt& p = prompts_[index];
  json j = {{"index", p.index},
            {"text", p.text},
            {"phonetic", p.phonetic ? json(*p.phonetic) : json(nullptr)},
            {"status", status(index)}};
  auto it = recordings_.find(index);
  j["recording"] = it == recordings_.end() ? json(nullptr) : to_json(it->second);
  return j;
}

json StudioSession::summary() const {
  std::shared_lock lock(mutex_);
  std::size_t copies = 0;
  for (const auto& [_, m] : recordings_) copies += m.safe_copies.size();
  return {{"session_id", config_.session_id},
          {"prompt_count", prompts_.size()},
          {"recorded_count", recordings_.size()},
          {"safe_copy_count", copies},
          {"config", to_json(config_)}};
}

json StudioSession::prompts_json() const {
  std::shared_lock lock(mutex_);
  json out = json::array();
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    out.push_back(prompt_entry(static_cast<int>(i)));
  }
  return out;
}

json StudioSession::prompt_json(int index) const {
  std::shared_lock lock(mutex_);
  prompt_at(index);
  return prompt_entry(index);
}

std::optional<RecordingMeta> StudioSession::recording(int index) const {
  std::shared_lock lock(mutex_);
  auto it = recordings_.find(index);
  if (it == recordings_.end()) return std::nullopt;
  return it->second;
}

RecordingMeta StudioSession::put_recording(int index,
                                           std::string_view wav_bytes) {
  prompt_at(index);
  Waveform wave;
  try {
    wave = decode_wav(wav_bytes);
  } catch (const Error& e) {
    throw UnsupportedMedia(std::string("upload is not PCM WAV: ") + e.what());
  }
  if (wave.sample_rate != config_.sample_rate) {
    throw RateMismatch("upload is " + std::to_string(wave.sample_rate) +
                       " Hz, session records at " +
                       std::to_string(config_.sample_rate) + " Hz");
  }

  RecordingMeta meta;
  meta.prompt_index = index;
  meta.file = recording_filename(index);
  if (config_.auto_trim) {
    TrimResult t = trim_silence(wave, config_.trim_threshold_dbfs,
                                config_.trim_guard_ms);
    meta.trimmed = t.audio.samples.size() != wave.samples.size();
    meta.silent = t.silent;
    wave = std::move(t.audio);
  }
  if (config_.auto_normalize && !wave.samples.empty() &&
      peak_level(wave) > kSilenceFloorDbfs) {
    wave = peak_normalize(wave, config_.normalize_target_dbfs);
    meta.normalized = true;
  }
  const std::string bytes = encode_wav(wave, config_.bit_depth);
  const Waveform stored = decode_wav(bytes);
  meta.samples = stored.samples.size();
  meta.duration_s = stored.duration_seconds();
  meta.peak_dbfs = stored.samples.empty() ? kSilenceFloorDbfs : peak_level(stored);

  std::unique_lock lock(mutex_);
  prompt_at(index);
  write_file_atomic(config_.storage_dir / meta.file, bytes);
  auto it = recordings_.find(index);
  if (it != recordings_.end()) meta.safe_copies = it->second.safe_copies;
  recordings_[index] = meta;
  write_manifest();
  spdlog::info("stored prompt {} ({:.3f} s, peak {:.2f} dBFS)", index,
               meta.duration_s, meta.peak_dbfs);
  return meta;
}

std::string StudioSession::safe_copy(int index) {
  std::unique_lock lock(mutex_);
  prompt_at(index);
  auto it = recordings_.find(index);
  if (it == recordings_.end()) {
    throw NotFound("prompt " + std::to_string(index) + " has no recording");
  }
  char prefix[32];
  std::snprintf(prefix, sizeof prefix, "%05d.safe.", index);
  std::string name = prefix + utc_timestamp() + ".wav";
  for (int n = 2; fs::exists(config_.storage_dir / name); ++n) {
    name = prefix + utc_timestamp() + "-" + std::to_string(n) + ".wav";
  }
  fs::copy_file(config_.storage_dir / it->second.file,
                config_.storage_dir / name);
  it->second.safe_copies.push_back(name);
  write_manifest();
  return name;
}

Waveform StudioSession::load_recording(int index) const {
  prompt_at(index);
  auto it = recordings_.find(index);
  if (it == recordings_.end()) {
    throw NotFound("prompt " + std::to_string(index) + " has no recording");
  }
  return read_wav(config_.storage_dir / it->second.file);
}

json StudioSession::waveform_json(int index, int points) const {
  std::shared_lock lock(mutex_);
  return decimate_waveform(load_recording(index), points);
}

json StudioSession::spectrogram_json(int index) const {
  Waveform wave;
  {
    std::shared_lock lock(mutex_);
    wave = load_recording(index);
  }
  const Spectrogram s = compute_spectrogram(wave, config_.spectrogram_window,
                                            config_.spectrogram_hop);
  json j = to_json(s);
  std::vector<double> times(s.frames), freqs(s.bins);
  for (std::size_t f = 0; f < s.frames; ++f) times[f] = s.frame_seconds(f);
  for (std::size_t b = 0; b < s.bins; ++b) freqs[b] = s.bin_hz(b);
  j["times_s"] = std::move(times);
  j["frequencies_hz"] = std::move(freqs);
  j["floor_db"] = 20.0 * std::log10(kSpectrumEpsilon);
  return j;
}

void StudioSession::set_phonetic(int index,
                                 std::vector<PhonemeSequence> phonetic) {
  std::unique_lock lock(mutex_);
  prompt_at(index);
  prompts_[index].phonetic = std::move(phonetic);
  write_manifest();
}

void StudioSession::write_manifest() const {
  json recs = json::array();
  for (const auto& [_, m] : recordings_) recs.push_back(to_json(m));
  json prompts = json::array();
  for (const auto& p : prompts_) {
    prompts.push_back({{"index", p.index},
                       {"text", p.text},
                       {"phonetic", p.phonetic ? json(*p.phonetic) : json(nullptr)}});
  }
  const json j = {{"session_id", config_.session_id},
                  {"config", to_json(config_)},
                  {"prompts", std::move(prompts)},
                  {"recordings", std::move(recs)}};
  write_file_atomic(manifest_path(), j.dump(2) + "\n");
}

// --- HTTP ----------------------------------------------------------------

namespace {

int http_status(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const UnsupportedMedia*>(&e)) return 415;
  if (dynamic_cast<const RateMismatch*>(&e)) return 422;
  if (dynamic_cast<const ServiceUnavailable*>(&e)) return 503;
  if (dynamic_cast<const Error*>(&e)) return 400;
  if (dynamic_cast<const json::exception*>(&e)) return 400;
  return 500;
}

std::string error_kind(int status) {
  switch (status) {
    case 404: return "NotFound";
    case 415: return "UnsupportedMedia";
    case 422: return "RateMismatch";
    case 503: return "ServiceUnavailable";
    case 400: return "BadRequest";
    default: return "InternalError";
  }
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const std::exception& e) {
      const int status = http_status(e);
      if (status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_json(res, {{"error", error_kind(status)}, {"message", e.what()}},
                status);
    }
  };
}

int path_index(const httplib::Request& req) {
  try {
    return std::stoi(req.matches[1].str());
  } catch (const std::out_of_range&) {
    throw NotFound("prompt index out of range");
  }
}

}  // namespace

struct StudioServer::Impl {
  StudioSession& session;
  const Transcriber& transcriber;
  httplib::Server server;
  std::thread thread;
  int port = -1;
};

StudioServer::StudioServer(StudioSession& session,
                           const Transcriber& transcriber)
    : impl_(new Impl{session, transcriber, {}, {}, -1}) {
  auto& srv = impl_->server;
  StudioSession& s = session;
  const Transcriber& tr = transcriber;

  srv.Get("/api/session", guarded([&s, &tr](const auto&, auto& res) {
    json j = s.summary();
    j["languages"] = tr.languages();
    send_json(res, j);
  }));
  srv.Get("/api/prompts", guarded([&s](const auto&, auto& res) {
    send_json(res, s.prompts_json());
  }));
  srv.Get(R"(/api/prompts/(\d+))", guarded([&s](const auto& req, auto& res) {
    send_json(res, s.prompt_json(path_index(req)));
  }));
  srv.Put(R"(/api/recordings/(\d+))", guarded([&s](const auto& req, auto& res) {
    send_json(res, to_json(s.put_recording(path_index(req), req.body)));
  }));
  srv.Post(R"(/api/recordings/(\d+)/safe-copy)",
           guarded([&s](const auto& req, auto& res) {
             send_json(res, {{"file", s.safe_copy(path_index(req))}});
           }));
  srv.Get(R"(/api/recordings/(\d+))", guarded([&s](const auto& req, auto& res) {
    const int i = path_index(req);
    s.prompt_json(i);
    auto meta = s.recording(i);
    if (!meta) throw NotFound("prompt " + std::to_string(i) + " has no recording");
    send_json(res, to_json(*meta));
  }));
  srv.Get(R"(/api/recordings/(\d+)/waveform)",
          guarded([&s](const auto& req, auto& res) {
            int points = 800;
            if (req.has_param("points")) {
              try {
                points = std::stoi(req.get_param_value("points"));
              } catch (const std::exception&) {
                throw ConfigError("points must be an integer");
              }
            }
            send_json(res, s.waveform_json(path_index(req), points));
          }));
  srv.Get(R"(/api/recordings/(\d+)/spectrogram)",
          guarded([&s](const auto& req, auto& res) {
            send_json(res, s.spectrogram_json(path_index(req)));
          }));
  srv.Post("/api/transcribe", guarded([&s, &tr](const auto& req, auto& res) {
    const json body = json::parse(req.body);
    const std::string text = body.at("text").template get<std::string>();
    const std::string language = body.value("language", std::string());
    auto words = tr.transcribe(text, language, s.config().punctuation);
    json out = json::array();
    std::vector<PhonemeSequence> phonetic;
    for (auto& w : words) {
      out.push_back({{"word", w.word},
                     {"phonemes", w.phonemes},
                     {"provenance", w.provenance}});
      phonetic.push_back(w.phonemes);
    }
    if (body.contains("prompt_index")) {
      s.set_phonetic(body["prompt_index"].template get<int>(), std::move(phonetic));
    }
    const auto loaded = tr.languages();
    send_json(res, {{"language", language.empty() && loaded.size() == 1
                                     ? loaded.front()
                                     : language},
                    {"words", std::move(out)}});
  }));
}

StudioServer::~StudioServer() { stop(); }

int StudioServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  impl_->port = port == 0 ? srv.bind_to_any_port(host)
                          : (srv.bind_to_port(host, port) ? port : -1);
  if (impl_->port < 0) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return impl_->port;
}

void StudioServer::listen() { impl_->server.listen_after_bind(); }

int StudioServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void StudioServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace g2p
