/*
 * Copyright (c) 2026 The Forge Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "forge/model_config.hpp"

#include "forge/error.hpp"

namespace forge {

void ModelConfig::validate() const {
  if (hidden == 0 || heads == 0 || intermediate == 0 || vocab_size == 0 || max_positions == 0 ||
      type_vocab_size == 0) {
    throw InvalidArgument("model config sizes must be positive");
  }
  if (hidden % heads != 0) {
    throw InvalidArgument("hidden size " + std::to_string(hidden) + " is not divisible by " + std::to_string(heads) +
                          " attention heads");
  }
  if (!(layer_norm_eps > 0.0f)) throw InvalidArgument("layer_norm_eps must be positive");
  if (dropout < 0.0f || dropout >= 1.0f) throw InvalidArgument("dropout must lie in [0, 1)");
}

ModelConfig make_config(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab_size,
                        std::size_t max_positions) {
  ModelConfig c;
  c.layers = layers;
  c.hidden = hidden;
  c.heads = heads;
  c.intermediate = 4 * hidden;
  c.vocab_size = vocab_size;
  c.max_positions = max_positions;
  c.validate();
  return c;
}

ModelConfig bioformer_8l_config() { return make_config(8, 512, 8, 32768, 512); }
ModelConfig bioformer_16l_config() { return make_config(16, 384, 6, 32768, 1024); }
ModelConfig bert_base_config() { return make_config(12, 768, 12, 28996, 512); }

std::optional<ModelConfig> preset_config(std::string_view name) {
  if (name == "bioformer-8L") return bioformer_8l_config();
  if (name == "bioformer-16L") return bioformer_16l_config();
  if (name == "bert-base") return bert_base_config();
  return std::nullopt;
}

std::vector<std::string> preset_names() { return {"bioformer-8L", "bioformer-16L", "bert-base"}; }

std::optional<std::uint64_t> preset_nominal_params(std::string_view name) {
  if (name == "bioformer-8L") return 43'000'000;
  if (name == "bioformer-16L") return 42'000'000;
  if (name == "bert-base") return 110'000'000;
  return std::nullopt;
}

std::uint64_t param_count(const ModelConfig& c, bool include_mlm_nsp_heads) {
  const std::uint64_t H = c.hidden;
  const std::uint64_t I = c.intermediate;
  const std::uint64_t embeddings = (c.vocab_size + c.max_positions + c.type_vocab_size) * H + 2 * H;
  const std::uint64_t attention = 4 * (H * H + H);
  const std::uint64_t ffn = (H * I + I) + (I * H + H);
  const std::uint64_t norms = 4 * H;
  std::uint64_t total = embeddings + c.layers * (attention + ffn + norms);
  if (include_mlm_nsp_heads) {
    total += (H * H + H) + 2 * H + c.vocab_size;  // MLM transform, norm, output bias
    total += (H * H + H) + (2 * H + 2);            // pooler, NSP classifier
  }
  return total;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"layers", c.layers},
                     {"hidden", c.hidden},
                     {"heads", c.heads},
                     {"intermediate", c.intermediate},
                     {"vocab_size", c.vocab_size},
                     {"max_positions", c.max_positions},
                     {"type_vocab_size", c.type_vocab_size},
                     {"layer_norm_eps", c.layer_norm_eps},
                     {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.layers = j.value("layers", d.layers);
  c.hidden = j.value("hidden", d.hidden);
  c.heads = j.value("heads", d.heads);
  c.intermediate = j.value("intermediate", 4 * c.hidden);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_positions = j.value("max_positions", d.max_positions);
  c.type_vocab_size = j.value("type_vocab_size", d.type_vocab_size);
  c.layer_norm_eps = j.value("layer_norm_eps", d.layer_norm_eps);
  c.dropout = j.value("dropout", d.dropout);
}

}  // namespace forge
