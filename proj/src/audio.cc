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

#include "g2p/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>

#include <fftw3.h>
#include <spdlog/spdlog.h>

#include "g2p/errors.h"

namespace g2p {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_le(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_le(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

bool supported_depth(int bits) {
  return bits == 16 || bits == 24 || bits == 32;
}

double full_scale(int bits) { return std::ldexp(1.0, bits - 1); }

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Waveform decode_wav(std::string_view bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12) throw IoError("WAV data truncated before RIFF header");
  if (std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE stream");
  }
  bool have_fmt = false;
  int channels = 0, bits = 0, block_align = 0;
  long rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t size = read_le(data + pos + 4, 4);
    const unsigned char* body = data + pos + 8;
    const std::size_t avail = n - pos - 8;
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) throw IoError("WAV fmt chunk truncated");
      std::uint16_t tag = read_le(body, 2);
      channels = static_cast<int>(read_le(body + 2, 2));
      rate = read_le(body + 4, 4);
      block_align = static_cast<int>(read_le(body + 12, 2));
      bits = static_cast<int>(read_le(body + 14, 2));
      if (tag == kFormatExtensible) {
        if (size < 40 || avail < 40) throw IoError("WAV fmt chunk truncated");
        tag = read_le(body + 24, 2);  // first two bytes of the subformat GUID
      }
      if (tag != kFormatPcm) throw FormatError("WAV is not integer PCM");
      if (!supported_depth(bits)) {
        throw FormatError("unsupported WAV bit depth " + std::to_string(bits));
      }
      if (channels < 1 || rate < 1 || block_align != channels * bits / 8) {
        throw FormatError("inconsistent WAV fmt chunk");
      }
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("WAV data chunk precedes fmt chunk");
      if (avail < size) throw IoError("WAV data chunk truncated");
      if (channels > 1) {
        spdlog::warn("WAV has {} channels; keeping channel 0", channels);
      }
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.source_bit_depth = bits;
      const int width = bits / 8;
      const std::size_t frames = size / block_align;
      const double scale = full_scale(bits);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        std::uint32_t raw = read_le(body + i * block_align, width);
        const int shift = 32 - bits;
        const auto value = static_cast<std::int32_t>(raw << shift) >> shift;
        w.samples[i] = value / scale;
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt) throw IoError("WAV stream has no fmt chunk");
  throw IoError("WAV stream has no data chunk");
}

long quantize_sample(double sample, int bit_depth) {
  const double scale = full_scale(bit_depth);
  const double v = std::round(sample * scale);  // half away from zero
  return static_cast<long>(std::clamp(v, -scale, scale - 1.0));
}

std::string encode_wav(const Waveform& wave, int bit_depth) {
  if (!supported_depth(bit_depth)) {
    throw FormatError("unsupported WAV bit depth " + std::to_string(bit_depth));
  }
  if (wave.sample_rate < 1) throw FormatError("sample rate must be positive");
  const int width = bit_depth / 8;
  const std::uint32_t data_size = wave.samples.size() * width;
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_le(out, 36 + data_size, 4);
  out += "WAVEfmt ";
  put_le(out, 16, 4);
  put_le(out, kFormatPcm, 2);
  put_le(out, 1, 2);
  put_le(out, wave.sample_rate, 4);
  put_le(out, wave.sample_rate * width, 4);
  put_le(out, width, 2);
  put_le(out, bit_depth, 2);
  out += "data";
  put_le(out, data_size, 4);
  for (double s : wave.samples) {
    put_le(out, static_cast<std::uint32_t>(quantize_sample(s, bit_depth)),
           width);
  }
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               int bit_depth) {
  const std::string bytes = encode_wav(wave, bit_depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace {

double peak_amplitude(const Waveform& wave) {
  double peak = 0.0;
  for (double s : wave.samples) peak = std::max(peak, std::abs(s));
  return peak;
}

}  // namespace

double peak_level(const Waveform& wave) {
  if (wave.samples.empty()) throw EmptyAudio("waveform has no samples");
  const double peak = peak_amplitude(wave);
  if (peak == 0.0) return kSilenceFloorDbfs;
  return std::max(kSilenceFloorDbfs, 20.0 * std::log10(peak));
}

Waveform peak_normalize(const Waveform& wave, double target_dbfs) {
  if (target_dbfs > 0.0) throw ConfigError("normalization target must be <= 0 dBFS");
  const double peak = peak_amplitude(wave);
  if (peak == 0.0) throw NormalizeError("cannot normalize silent audio");
  const double target = std::pow(10.0, target_dbfs / 20.0);
  Waveform out = wave;
  for (double& s : out.samples) s = std::clamp(s / peak * target, -1.0, 1.0);
  return out;
}

TrimResult trim_silence(const Waveform& wave, double threshold_dbfs,
                        double guard_ms) {
  if (threshold_dbfs >= 0.0) throw ConfigError("trim threshold must be < 0 dBFS");
  if (guard_ms < 0.0) throw ConfigError("trim guard must be >= 0 ms");
  const std::size_t n = wave.samples.size();
  const std::size_t frame =
      std::max<std::size_t>(1, std::lround(wave.sample_rate * 0.010));
  const double threshold = std::pow(10.0, threshold_dbfs / 20.0);
  const std::size_t frames = (n + frame - 1) / frame;

  std::size_t first = frames, last = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t b = f * frame, e = std::min(n, b + frame);
    double energy = 0.0;
    for (std::size_t i = b; i < e; ++i) energy += wave.samples[i] * wave.samples[i];
    if (std::sqrt(energy / static_cast<double>(e - b)) >= threshold) {
      first = std::min(first, f);
      last = f;
    }
  }

  TrimResult r;
  r.audio.sample_rate = wave.sample_rate;
  r.audio.source_bit_depth = wave.source_bit_depth;
  if (first == frames) {
    r.silent = true;
    return r;
  }
  const auto guard = static_cast<std::size_t>(
      std::ceil(guard_ms * 1e-3 * wave.sample_rate / static_cast<double>(frame)));
  r.begin = first > guard ? (first - guard) * frame : 0;
  r.end = std::min(n, (last + 1 + guard) * frame);
  r.audio.samples.assign(wave.samples.begin() + r.begin,
                         wave.samples.begin() + r.end);
  return r;
}

std::size_t spectrogram_frames(std::size_t length, int window_size, int hop) {
  if (length < static_cast<std::size_t>(window_size)) return 0;
  return (length - window_size) / hop + 1;
}

Spectrogram compute_spectrogram(const Waveform& wave, int window_size,
                                int hop) {
  if (window_size < 2 || (window_size & (window_size - 1)) != 0) {
    throw ConfigError("spectrogram window must be a power of two");
  }
  if (hop <= 0) hop = window_size / 4;
  if (hop > window_size) throw ConfigError("spectrogram hop exceeds window");

  Spectrogram s;
  s.window_size = window_size;
  s.hop = hop;
  s.sample_rate = wave.sample_rate;
  s.bins = window_size / 2 + 1;
  s.frames = spectrogram_frames(wave.samples.size(), window_size, hop);
  s.db.resize(s.frames * s.bins);
  if (s.frames == 0) return s;

  std::vector<double> hann(window_size);
  for (int i = 0; i < window_size; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window_size);
  }
  double* in = fftw_alloc_real(window_size);
  fftw_complex* out = fftw_alloc_complex(s.bins);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(window_size, in, out, FFTW_ESTIMATE);
  }
  for (std::size_t f = 0; f < s.frames; ++f) {
    const double* src = wave.samples.data() + f * hop;
    for (int i = 0; i < window_size; ++i) in[i] = src[i] * hann[i];
    fftw_execute(plan);
    for (std::size_t b = 0; b < s.bins; ++b) {
      const double mag = std::hypot(out[b][0], out[b][1]);
      s.db[f * s.bins + b] = 20.0 * std::log10(mag + kSpectrumEpsilon);
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  fftw_free(in);
  return s;
}

nlohmann::json to_json(const Spectrogram& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t f = 0; f < s.frames; ++f) {
    rows.push_back(std::vector<double>(s.db.begin() + f * s.bins,
                                       s.db.begin() + (f + 1) * s.bins));
  }
  return {{"frames", s.frames},     {"bins", s.bins},
          {"window_size", s.window_size}, {"hop", s.hop},
          {"sample_rate", s.sample_rate}, {"db", std::move(rows)}};
}

}  // namespace g2p
