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

#ifndef G2P_TESTS_STUDIO_SCRIPT_H_
#define G2P_TESTS_STUDIO_SCRIPT_H_

#include <filesystem>
#include <string>
#include <vector>

namespace g2p::testing {

struct ScriptStep {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Drives a running studio server over HTTP through a full recording round:
// listing, upload, metadata, waveform, spectrogram, safe copy, re-record and
// error statuses. The server must hold a fresh 16 kHz, 16-bit session of
// three prompts stored in `storage_dir`, with normalization to -3 dBFS.
std::vector<ScriptStep> run_studio_script(const std::string& host, int port,
                                          const std::filesystem::path& storage_dir);

}  // namespace g2p::testing

#endif  // G2P_TESTS_STUDIO_SCRIPT_H_
