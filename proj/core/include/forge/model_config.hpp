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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace forge {

/// Encoder architecture: depth, width, heads, feed-forward width, vocabulary,
/// positions and segment types.
struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t intermediate = 256;
  std::size_t vocab_size = 1000;
  std::size_t max_positions = 128;
  std::size_t type_vocab_size = 2;
  float layer_norm_eps = 1e-12f;
  float dropout = 0.1f;

  /// Throws InvalidArgument unless hidden % heads == 0 and the sizes are positive.
  /// layers may be 0 (embedding-only encoder).
  void validate() const;
  std::size_t head_dim() const { return hidden / heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// L layers of width H with the given head count and intermediate 4H.
ModelConfig make_config(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab_size,
                        std::size_t max_positions);

ModelConfig bioformer_8l_config();
ModelConfig bioformer_16l_config();
ModelConfig bert_base_config();

/// "bioformer-8L", "bioformer-16L" or "bert-base".
std::optional<ModelConfig> preset_config(std::string_view name);
std::vector<std::string> preset_names();
/// Published parameter budget of a preset (43M, 42M, 110M).
std::optional<std::uint64_t> preset_nominal_params(std::string_view name);

/// Exact parameter count. Heads add the MLM transform, norm and output bias
/// (output weights are tied to the token embeddings), the pooler and the NSP
/// classifier.
std::uint64_t param_count(const ModelConfig& config, bool include_mlm_nsp_heads);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace forge
