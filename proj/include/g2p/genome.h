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

#ifndef G2P_GENOME_H_
#define G2P_GENOME_H_

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "g2p/autodiff.h"
#include "json.hpp"

namespace g2p {

enum class Architecture { kCnn, kTransformer };
enum class Activation { kRelu, kLinear };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);
std::string_view to_string(Activation act);

// Topology genes of the convolutional seq2seq network (G1-G9).
struct CnnGenome {
  int enc_layers = 2;    // G1
  int enc_dim = 128;     // G2
  int dec_layers = 2;    // G3
  int dec_dim = 128;     // G4
  int out_layers = 3;    // G5
  int out_dim = 128;     // G6, width of the first output block
  Activation activation = Activation::kRelu;        // G7
  OptimizerKind optimizer = OptimizerKind::kAdam;   // G8
  int batch = 512;       // G9

  // Output block widths: G6 halved per block, never below 32.
  std::vector<int> output_widths() const;

  friend bool operator==(const CnnGenome&, const CnnGenome&) = default;
};

// Topology genes of the Transformer seq2seq network (G1-G7).
struct TransformerGenome {
  int enc_layers = 2;    // G1
  int dec_layers = 2;    // G2
  int embed_dim = 64;    // G3
  int heads = 2;         // G4
  double dropout = 0.05; // G5
  int ff_dim = 128;      // G6
  int batch = 64;        // G7

  friend bool operator==(const TransformerGenome&,
                         const TransformerGenome&) = default;
};

using Genome = std::variant<CnnGenome, TransformerGenome>;

Architecture architecture_of(const Genome& g);
int batch_size_of(const Genome& g);
OptimizerKind optimizer_of(const Genome& g);

// One gene: its ID, a readable name and its admissible values in order.
struct GeneSpec {
  std::string id;
  std::string name;
  std::vector<nlohmann::json> values;
};

const std::vector<GeneSpec>& gene_space(Architecture arch);

// Genome <-> per-gene value indices into gene_space(arch).
std::vector<int> to_indices(const Genome& g);
Genome from_indices(Architecture arch, const std::vector<int>& indices);

// Throws ConfigError when any gene is outside its domain or the embedding
// width is not divisible by the head count.
void validate(const Genome& g);

// {"architecture": "cnn", "G1": 2, ..., "G9": 512}
nlohmann::json to_json(const Genome& g);
Genome genome_from_json(const nlohmann::json& j);

// Compact row form, e.g. "2,128,2,128,3,128/64/32,ReLU,RMSprop,512".
std::string describe(const Genome& g);

}  // namespace g2p

#endif  // G2P_GENOME_H_
