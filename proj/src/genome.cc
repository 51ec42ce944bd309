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

#include "g2p/genome.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "g2p/errors.h"

namespace g2p {
namespace {

using nlohmann::json;

const std::vector<GeneSpec>& cnn_space() {
  static const std::vector<GeneSpec> space = {
      {"G1", "encoder layers", {2, 3, 4}},
      {"G2", "encoder layers dimension", {32, 64, 128, 256}},
      {"G3", "decoder layers", {2, 3, 4}},
      {"G4", "decoder layers dimension", {32, 64, 128, 256}},
      {"G5", "decoder output layers", {2, 3, 4}},
      {"G6", "decoder output layers dim.", {32, 64, 128}},
      {"G7", "activation", {"ReLU", "Linear"}},
      {"G8", "optimizer", {"Adam", "RMSprop"}},
      {"G9", "batch size", {32, 64, 128, 256, 512}},
  };
  return space;
}

const std::vector<GeneSpec>& transformer_space() {
  static const std::vector<GeneSpec> space = {
      {"G1", "encoder layers", {2, 3, 4}},
      {"G2", "decoder layers", {2, 3, 4}},
      {"G3", "embedding dimension", {32, 64, 128}},
      {"G4", "attention heads", {2, 4}},
      {"G5", "dropout rate", {0.01, 0.05, 0.1, 0.15}},
      {"G6", "hidden layer dimension", {32, 64, 128, 256, 512, 1024}},
      {"G7", "batch size", {32, 64, 128, 256, 512}},
  };
  return space;
}

// Accepts the short spellings used in result tables.
json canonical_value(const GeneSpec& gene, const json& v) {
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "Lin" || s == "linear") return "Linear";
    if (s == "relu") return "ReLU";
    if (s == "RMSp" || s == "rmsprop") return "RMSprop";
    if (s == "adam") return "Adam";
    return s;
  }
  (void)gene;
  return v;
}

int index_of(const GeneSpec& gene, const json& value) {
  json v = canonical_value(gene, value);
  for (std::size_t i = 0; i < gene.values.size(); ++i) {
    const json& d = gene.values[i];
    if (d.is_number() && v.is_number()) {
      if (std::abs(d.get<double>() - v.get<double>()) < 1e-12) {
        return static_cast<int>(i);
      }
    } else if (d == v) {
      return static_cast<int>(i);
    }
  }
  throw ConfigError("gene " + gene.id + " (" + gene.name + ") value " +
                    value.dump() + " is outside its domain");
}

json genes_json(Architecture arch, const std::vector<int>& idx) {
  const auto& space = gene_space(arch);
  json j = {{"architecture", std::string(to_string(arch))}};
  for (std::size_t i = 0; i < space.size(); ++i) {
    j[space[i].id] = space[i].values.at(idx[i]);
  }
  return j;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  return arch == Architecture::kCnn ? "cnn" : "transformer";
}

Architecture architecture_from_string(std::string_view name) {
  if (name == "cnn" || name == "CNN") return Architecture::kCnn;
  if (name == "transformer" || name == "Transformer") {
    return Architecture::kTransformer;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(Activation act) {
  return act == Activation::kRelu ? "ReLU" : "Linear";
}

std::vector<int> CnnGenome::output_widths() const {
  std::vector<int> widths;
  int w = out_dim;
  for (int i = 0; i < out_layers; ++i) {
    widths.push_back(std::max(32, w));
    w /= 2;
  }
  return widths;
}

Architecture architecture_of(const Genome& g) {
  return std::holds_alternative<CnnGenome>(g) ? Architecture::kCnn
                                              : Architecture::kTransformer;
}

int batch_size_of(const Genome& g) {
  return std::visit([](const auto& x) { return x.batch; }, g);
}

OptimizerKind optimizer_of(const Genome& g) {
  if (auto* c = std::get_if<CnnGenome>(&g)) return c->optimizer;
  return OptimizerKind::kAdam;
}

const std::vector<GeneSpec>& gene_space(Architecture arch) {
  return arch == Architecture::kCnn ? cnn_space() : transformer_space();
}

std::vector<int> to_indices(const Genome& g) {
  json j = to_json(g);
  const auto& space = gene_space(architecture_of(g));
  std::vector<int> idx;
  for (const auto& gene : space) idx.push_back(index_of(gene, j.at(gene.id)));
  return idx;
}

Genome from_indices(Architecture arch, const std::vector<int>& indices) {
  const auto& space = gene_space(arch);
  if (indices.size() != space.size()) {
    throw ConfigError("expected " + std::to_string(space.size()) +
                      " gene indices");
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (indices[i] < 0 ||
        indices[i] >= static_cast<int>(space[i].values.size())) {
      throw ConfigError("gene index out of range for " + space[i].id);
    }
  }
  return genome_from_json(genes_json(arch, indices));
}

void validate(const Genome& g) {
  (void)to_indices(g);
  if (auto* t = std::get_if<TransformerGenome>(&g)) {
    if (t->embed_dim % t->heads != 0) {
      throw ConfigError("embedding dimension must be divisible by heads");
    }
  }
}

json to_json(const Genome& g) {
  if (auto* c = std::get_if<CnnGenome>(&g)) {
    return {{"architecture", "cnn"},
            {"G1", c->enc_layers},
            {"G2", c->enc_dim},
            {"G3", c->dec_layers},
            {"G4", c->dec_dim},
            {"G5", c->out_layers},
            {"G6", c->out_dim},
            {"G7", std::string(to_string(c->activation))},
            {"G8", std::string(to_string(c->optimizer))},
            {"G9", c->batch}};
  }
  const auto& t = std::get<TransformerGenome>(g);
  return {{"architecture", "transformer"},
          {"G1", t.enc_layers},
          {"G2", t.dec_layers},
          {"G3", t.embed_dim},
          {"G4", t.heads},
          {"G5", t.dropout},
          {"G6", t.ff_dim},
          {"G7", t.batch}};
}

Genome genome_from_json(const json& j) {
  try {
    Architecture arch =
        architecture_from_string(j.at("architecture").get<std::string>());
    const auto& space = gene_space(arch);
    std::vector<json> v;
    for (const auto& gene : space) {
      json value = canonical_value(gene, j.at(gene.id));
      v.push_back(gene.values.at(index_of(gene, value)));
    }
    Genome g;
    if (arch == Architecture::kCnn) {
      CnnGenome c;
      c.enc_layers = v[0].get<int>();
      c.enc_dim = v[1].get<int>();
      c.dec_layers = v[2].get<int>();
      c.dec_dim = v[3].get<int>();
      c.out_layers = v[4].get<int>();
      c.out_dim = v[5].get<int>();
      c.activation = v[6] == "ReLU" ? Activation::kRelu : Activation::kLinear;
      c.optimizer = optimizer_kind_from_string(v[7].get<std::string>());
      c.batch = v[8].get<int>();
      g = c;
    } else {
      TransformerGenome t;
      t.enc_layers = v[0].get<int>();
      t.dec_layers = v[1].get<int>();
      t.embed_dim = v[2].get<int>();
      t.heads = v[3].get<int>();
      t.dropout = v[4].get<double>();
      t.ff_dim = v[5].get<int>();
      t.batch = v[6].get<int>();
      g = t;
    }
    validate(g);
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad genome JSON: ") + e.what());
  }
}

std::string describe(const Genome& g) {
  std::ostringstream os;
  if (auto* c = std::get_if<CnnGenome>(&g)) {
    os << c->enc_layers << ',' << c->enc_dim << ',' << c->dec_layers << ','
       << c->dec_dim << ',' << c->out_layers << ',';
    auto w = c->output_widths();
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "/" : "") << w[i];
    os << ',' << to_string(c->activation) << ',' << to_string(c->optimizer)
       << ',' << c->batch;
  } else {
    const auto& t = std::get<TransformerGenome>(g);
    os << t.enc_layers << ',' << t.dec_layers << ',' << t.embed_dim << ','
       << t.heads << ',' << t.dropout << ',' << t.ff_dim << ',' << t.batch;
  }
  return os.str();
}

}  // namespace g2p
