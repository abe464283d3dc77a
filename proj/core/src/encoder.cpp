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

#include "forge/encoder.hpp"

#include <algorithm>

#include "forge/error.hpp"
#include "forge/ops.hpp"

namespace forge {

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

std::vector<Tensor> Module::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var.value());
  return out;
}

void Module::restore(std::span<const Tensor> values) {
  if (values.size() != params_.size()) throw InvalidArgument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].var.shape()) {
      throw ShapeError("restore: " + params_[i].name + " expects " + shape_str(params_[i].var.shape()) + ", got " +
                       shape_str(values[i].shape()));
    }
    params_[i].var.mutable_value() = values[i];
  }
}

void Module::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Variable Module::add_parameter(std::string name, Tensor init, bool weight_decay) {
  Variable v(std::move(init), true);
  params_.push_back({std::move(name), v, weight_decay});
  return v;
}

std::pair<Variable, Variable> Module::add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Tensor w({out, in});
  for (auto& x : w.data()) x = static_cast<float>(rng.truncated_normal(kInitStddev));
  auto weight = add_parameter(name + ".weight", std::move(w), true);
  auto bias = add_parameter(name + ".bias", Tensor({out}), false);
  return {weight, bias};
}

std::pair<Variable, Variable> Module::add_norm(const std::string& name, std::size_t width) {
  auto gamma = add_parameter(name + ".gamma", Tensor({width}, 1.0f), false);
  auto beta = add_parameter(name + ".beta", Tensor({width}), false);
  return {gamma, beta};
}

EncoderBatch EncoderBatch::single(std::span<const std::int32_t> ids, std::span<const std::int32_t> segments) {
  if (ids.size() != segments.size()) throw InvalidArgument("ids and segment ids differ in length");
  EncoderBatch b;
  b.batch = 1;
  b.seq_len = ids.size();
  b.input_ids.assign(ids.begin(), ids.end());
  b.segment_ids.assign(segments.begin(), segments.end());
  b.attention_mask.assign(ids.size(), 1);
  return b;
}

EncoderBatch EncoderBatch::pack(std::span<const std::vector<std::int32_t>> ids,
                                std::span<const std::vector<std::int32_t>> segments, std::int32_t pad_id) {
  if (ids.size() != segments.size()) throw InvalidArgument("ids and segment lists differ in length");
  EncoderBatch b;
  b.batch = ids.size();
  for (const auto& s : ids) b.seq_len = std::max(b.seq_len, s.size());
  b.input_ids.assign(b.batch * b.seq_len, pad_id);
  b.segment_ids.assign(b.batch * b.seq_len, 0);
  b.attention_mask.assign(b.batch * b.seq_len, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].size() != segments[i].size()) throw InvalidArgument("ids and segment ids differ in length");
    std::copy(ids[i].begin(), ids[i].end(), b.input_ids.begin() + static_cast<std::ptrdiff_t>(i * b.seq_len));
    std::copy(segments[i].begin(), segments[i].end(), b.segment_ids.begin() + static_cast<std::ptrdiff_t>(i * b.seq_len));
    std::fill_n(b.attention_mask.begin() + static_cast<std::ptrdiff_t>(i * b.seq_len), ids[i].size(), 1);
  }
  return b;
}

EncoderModel::EncoderModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t H = config_.hidden;
  auto table = [&](std::size_t rows) {
    Tensor t({rows, H});
    for (auto& x : t.data()) x = static_cast<float>(rng.truncated_normal(kInitStddev));
    return t;
  };
  word_embeddings_ = add_parameter("embeddings.word", table(config_.vocab_size), true);
  position_embeddings_ = add_parameter("embeddings.position", table(config_.max_positions), true);
  type_embeddings_ = add_parameter("embeddings.token_type", table(config_.type_vocab_size), true);
  std::tie(emb_norm_g_, emb_norm_b_) = add_norm("embeddings.norm", H);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    Layer layer;
    std::tie(layer.q_w, layer.q_b) = add_linear(p + "attention.query", H, H, rng);
    std::tie(layer.k_w, layer.k_b) = add_linear(p + "attention.key", H, H, rng);
    std::tie(layer.v_w, layer.v_b) = add_linear(p + "attention.value", H, H, rng);
    std::tie(layer.out_w, layer.out_b) = add_linear(p + "attention.output", H, H, rng);
    std::tie(layer.attn_norm_g, layer.attn_norm_b) = add_norm(p + "attention.norm", H);
    std::tie(layer.ffn_in_w, layer.ffn_in_b) = add_linear(p + "ffn.intermediate", H, config_.intermediate, rng);
    std::tie(layer.ffn_out_w, layer.ffn_out_b) = add_linear(p + "ffn.output", config_.intermediate, H, rng);
    std::tie(layer.ffn_norm_g, layer.ffn_norm_b) = add_norm(p + "ffn.norm", H);
    layers_.push_back(std::move(layer));
  }
}

EncoderOutput EncoderModel::forward(const EncoderBatch& batch, bool training, Rng* dropout_rng) const {
  const std::size_t B = batch.batch;
  const std::size_t S = batch.seq_len;
  const std::size_t n = B * S;
  if (B == 0 || S == 0) throw InvalidArgument("encoder forward on an empty batch");
  if (S > config_.max_positions) {
    throw InvalidArgument("sequence length " + std::to_string(S) + " exceeds max positions " +
                          std::to_string(config_.max_positions));
  }
  if (batch.input_ids.size() != n || batch.segment_ids.size() != n || batch.attention_mask.size() != n) {
    throw InvalidArgument("encoder batch fields do not match batch*seq_len");
  }
  for (auto id : batch.input_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
    }
  }
  for (auto s : batch.segment_ids) {
    if (s < 0 || static_cast<std::size_t>(s) >= config_.type_vocab_size) {
      throw InvalidArgument("segment id " + std::to_string(s) + " outside " + std::to_string(config_.type_vocab_size) +
                            " segment types");
    }
  }
  if (training && config_.dropout > 0.0f && dropout_rng == nullptr) {
    throw InvalidArgument("training forward needs a dropout generator");
  }
  Rng unused(0);
  Rng& rng = dropout_rng ? *dropout_rng : unused;
  const float p_drop = config_.dropout;
  const float eps = config_.layer_norm_eps;

  std::vector<std::int32_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<std::int32_t>(i % S);

  Variable x = ops::add(ops::add(ops::embedding(word_embeddings_, batch.input_ids),
                                 ops::embedding(position_embeddings_, positions)),
                        ops::embedding(type_embeddings_, batch.segment_ids));
  x = ops::dropout(ops::layer_norm(x, emb_norm_g_, emb_norm_b_, eps), p_drop, training, rng);

  for (const auto& layer : layers_) {
    Variable q = ops::linear(x, layer.q_w, layer.q_b);
    Variable k = ops::linear(x, layer.k_w, layer.k_b);
    Variable v = ops::linear(x, layer.v_w, layer.v_b);
    Variable ctx = ops::self_attention(q, k, v, B, S, config_.heads, batch.attention_mask);
    Variable attn = ops::dropout(ops::linear(ctx, layer.out_w, layer.out_b), p_drop, training, rng);
    x = ops::layer_norm(ops::add(x, attn), layer.attn_norm_g, layer.attn_norm_b, eps);
    Variable h = ops::gelu(ops::linear(x, layer.ffn_in_w, layer.ffn_in_b));
    Variable f = ops::dropout(ops::linear(h, layer.ffn_out_w, layer.ffn_out_b), p_drop, training, rng);
    x = ops::layer_norm(ops::add(x, f), layer.ffn_norm_g, layer.ffn_norm_b, eps);
  }

  std::vector<std::size_t> cls_rows(B);
  for (std::size_t b = 0; b < B; ++b) cls_rows[b] = b * S;
  Variable cls = ops::gather_rows(x, cls_rows);
  return {x, cls};
}

}  // namespace forge
