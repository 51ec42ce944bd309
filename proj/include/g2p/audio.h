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

#ifndef G2P_AUDIO_H_
#define G2P_AUDIO_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace g2p {

inline constexpr double kSilenceFloorDbfs = -120.0;
inline constexpr double kSpectrumEpsilon = 1e-10;

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;
  int source_bit_depth = 16;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// RIFF/WAVE with integer PCM at 16, 24 or 32 bits. Multi-channel input keeps
// channel 0. Throws FormatError on unsupported content and IoError on
// truncation.
Waveform decode_wav(std::string_view bytes);
std::string encode_wav(const Waveform& wave, int bit_depth);
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               int bit_depth);

// Integer code for a sample: round half away from zero, saturating.
long quantize_sample(double sample, int bit_depth);

// 20*log10(max |s|), or kSilenceFloorDbfs for digital silence. Throws
// EmptyAudio.
double peak_level(const Waveform& wave);

// Uniform gain so the peak lands on target_dbfs (<= 0). Throws
// NormalizeError for all-zero input.
Waveform peak_normalize(const Waveform& wave, double target_dbfs = -3.0);

struct TrimResult {
  Waveform audio;
  bool silent = false;     // no frame reached the threshold
  std::size_t begin = 0;   // retained range in the input
  std::size_t end = 0;
};

// Drops leading/trailing runs of 10 ms frames whose RMS is below the
// threshold, keeping `guard_ms` (rounded up to whole frames) around the loud
// region. Trimmed boundaries fall on frame edges so trimming is idempotent.
TrimResult trim_silence(const Waveform& wave, double threshold_dbfs = -40.0,
                        double guard_ms = 100.0);

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  int window_size = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<double> db;  // row-major [frames][bins]

  double at(std::size_t frame, std::size_t bin) const {
    return db[frame * bins + bin];
  }
  double bin_hz(std::size_t bin) const {
    return static_cast<double>(bin) * sample_rate / window_size;
  }
  double frame_seconds(std::size_t frame) const {
    return static_cast<double>(frame) * hop / sample_rate;
  }
};

std::size_t spectrogram_frames(std::size_t length, int window_size, int hop);

// Hann-windowed STFT magnitude in dB. hop <= 0 selects window_size / 4.
// Throws ConfigError for a window that is not a power of two or a hop
// outside (0, window].
Spectrogram compute_spectrogram(const Waveform& wave, int window_size = 512,
                                int hop = 0);

nlohmann::json to_json(const Spectrogram& spec);

}  // namespace g2p

#endif  // G2P_AUDIO_H_
