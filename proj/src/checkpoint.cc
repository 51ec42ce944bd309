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

#include "g2p/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "g2p/errors.h"

namespace g2p {
namespace {

constexpr char kMagic[8] = {'G', '2', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw FormatError("checkpoint truncated");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ull << 32)) throw FormatError("checkpoint field too large");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw FormatError("checkpoint truncated");
  }
  return s;
}

}  // namespace

void write_tensor_container(std::ostream& out, const nlohmann::json& header,
                            const std::vector<const Parameter*>& tensors) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string h = header.dump();
  put<std::uint64_t>(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  put<std::uint64_t>(out, tensors.size());
  for (const Parameter* p : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (auto d : p->value.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (double x : p->value.data) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  if (!out) throw IoError("failed writing tensor container");
}

std::pair<nlohmann::json, std::vector<NamedTensor>> read_tensor_container(
    std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file");
  }
  if (get<std::uint32_t>(in) != kVersion) {
    throw FormatError("unsupported checkpoint version");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_bytes(in, get<std::uint64_t>(in)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in);
  std::vector<NamedTensor> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = get_bytes(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    if (rank > 8) throw FormatError("tensor rank too large");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::int64_t>(get<std::uint64_t>(in)));
    }
    const std::int64_t n = numel(shape);
    if (n < 0 || n > (1ll << 31)) throw FormatError("tensor too large");
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& x : data) x = std::bit_cast<double>(get<std::uint64_t>(in));
    nt.tensor = Tensor(std::move(shape), std::move(data));
    tensors.push_back(std::move(nt));
  }
  return {std::move(header), std::move(tensors)};
}

void save_checkpoint(const Seq2SeqModel& model,
                     const std::filesystem::path& path,
                     const nlohmann::json& extra) {
  nlohmann::json header = {
      {"genome", to_json(model.genome())},
      {"graphemes", to_json(model.graphemes())},
      {"phonemes", to_json(model.phonemes())},
      {"max_len", model.max_len()},
      {"seed", model.seed()},
      {"param_count", model.param_count()},
      {"extra", extra},
  };
  std::vector<const Parameter*> params;
  for (const auto& p : model.parameters()) params.push_back(&p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tensor_container(out, header, params);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto [header, tensors] = read_tensor_container(in);
  LoadedCheckpoint ck;
  try {
    Genome genome = genome_from_json(header.at("genome"));
    ck.model = build_model(genome, vocab_from_json(header.at("graphemes")),
                           vocab_from_json(header.at("phonemes")),
                           header.at("max_len").get<int>(),
                           header.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  auto& params = ck.model->parameters();
  if (tensors.size() != params.size()) {
    throw FormatError("checkpoint tensor count does not match the genome");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i].name ||
        tensors[i].tensor.shape != params[i].value.shape) {
      throw FormatError("checkpoint tensor '" + tensors[i].name +
                        "' does not match the model layout");
    }
    params[i].value = std::move(tensors[i].tensor);
  }
  ck.header = std::move(header);
  return ck;
}

}  // namespace g2p
