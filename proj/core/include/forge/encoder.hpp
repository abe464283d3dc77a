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
#include <span>
#include <string>
#include <vector>

#include "forge/autograd.hpp"
#include "forge/model_config.hpp"
#include "forge/rng.hpp"

namespace forge {

/// Owner of named trainable parameters.
class Module {
 public:
  virtual ~Module() = default;

  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  /// Deep copies of the current parameter values, in registry order.
  std::vector<Tensor> snapshot() const;
  void restore(std::span<const Tensor> values);
  void zero_grad();

 protected:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  Variable add_parameter(std::string name, Tensor init, bool weight_decay);
  /// Truncated-normal weight [out, in] (weight decay on) and zero bias (off).
  std::pair<Variable, Variable> add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  /// Unit gain and zero bias (no weight decay).
  std::pair<Variable, Variable> add_norm(const std::string& name, std::size_t width);

  static constexpr double kInitStddev = 0.02;

 private:
  std::vector<Parameter> params_;
};

/// A padded batch of sequences, flattened row-major as [batch, seq_len].
struct EncoderBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::uint8_t> attention_mask;  // 1 = real token

  /// One unpadded sequence.
  static EncoderBatch single(std::span<const std::int32_t> ids, std::span<const std::int32_t> segments);
  /// Pads every sequence to the longest with `pad_id` and mask 0.
  static EncoderBatch pack(std::span<const std::vector<std::int32_t>> ids,
                           std::span<const std::vector<std::int32_t>> segments, std::int32_t pad_id);
};

struct EncoderOutput {
  Variable sequence;  // [batch*seq_len, hidden]
  Variable cls;       // [batch, hidden], final-layer state at position 0
};

/// BERT-style post-norm transformer encoder with learned absolute positions.
class EncoderModel : public Module {
 public:
  EncoderModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const Variable& word_embeddings() const noexcept { return word_embeddings_; }

  /// Runs the encoder. `dropout_rng` is required when training.
  /// Throws InvalidArgument when seq_len exceeds max positions or an id is
  /// outside the vocabulary or segment range.
  EncoderOutput forward(const EncoderBatch& batch, bool training, Rng* dropout_rng = nullptr) const;

 private:
  struct Layer {
    Variable q_w, q_b, k_w, k_b, v_w, v_b, out_w, out_b;
    Variable attn_norm_g, attn_norm_b;
    Variable ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
    Variable ffn_norm_g, ffn_norm_b;
  };

  ModelConfig config_;
  Variable word_embeddings_;
  Variable position_embeddings_;
  Variable type_embeddings_;
  Variable emb_norm_g_, emb_norm_b_;
  std::vector<Layer> layers_;
};

}  // namespace forge
