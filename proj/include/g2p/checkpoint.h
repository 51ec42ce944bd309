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

#ifndef G2P_CHECKPOINT_H_
#define G2P_CHECKPOINT_H_

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "g2p/autodiff.h"
#include "g2p/models.h"
#include "json.hpp"

namespace g2p {

// Binary layout, all integers little-endian:
//   "G2PCKPT\0" | u32 version | u64 header bytes | header JSON (UTF-8)
//   u64 tensor count | per tensor: u32 name bytes, name, u32 rank,
//   u64 dims[rank], f64 values[prod(dims)]
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_tensor_container(std::ostream& out, const nlohmann::json& header,
                            const std::vector<const Parameter*>& tensors);
// Throws FormatError on a corrupt or truncated stream.
std::pair<nlohmann::json, std::vector<NamedTensor>> read_tensor_container(
    std::istream& in);

struct LoadedCheckpoint {
  std::unique_ptr<Seq2SeqModel> model;
  nlohmann::json header;
};

// Header carries the genome, both vocabularies, max_len and the init seed,
// plus any caller-supplied `extra` object under "extra".
void save_checkpoint(const Seq2SeqModel& model,
                     const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace g2p

#endif  // G2P_CHECKPOINT_H_
