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

#include "forge/heads.hpp"

#include "forge/ops.hpp"

namespace forge {

MlmHead::MlmHead(const EncoderModel& encoder, std::uint64_t seed)
    : word_embeddings_(encoder.word_embeddings()), eps_(encoder.config().layer_norm_eps) {
  const auto& c = encoder.config();
  Rng rng(seed);
  std::tie(transform_w_, transform_b_) = add_linear("mlm.transform", c.hidden, c.hidden, rng);
  std::tie(norm_g_, norm_b_) = add_norm("mlm.norm", c.hidden);
  output_bias_ = add_parameter("mlm.output_bias", Tensor({c.vocab_size}), false);
}

Variable MlmHead::logits(const Variable& hidden) const {
  Variable h = ops::gelu(ops::linear(hidden, transform_w_, transform_b_));
  h = ops::layer_norm(h, norm_g_, norm_b_, eps_);
  return ops::linear(h, word_embeddings_, output_bias_);
}

NspHead::NspHead(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  std::tie(pooler_w_, pooler_b_) = add_linear("nsp.pooler", config.hidden, config.hidden, rng);
  std::tie(classifier_w_, classifier_b_) = add_linear("nsp.classifier", config.hidden, 2, rng);
}

Variable NspHead::logits(const Variable& cls) const {
  Variable pooled = ops::tanh(ops::linear(cls, pooler_w_, pooler_b_));
  return ops::linear(pooled, classifier_w_, classifier_b_);
}

TokenClassifierHead::TokenClassifierHead(const ModelConfig& config, std::size_t num_labels, std::uint64_t seed)
    : num_labels_(num_labels), dropout_(config.dropout) {
  Rng rng(seed);
  std::tie(w_, b_) = add_linear("token_classifier", config.hidden, num_labels, rng);
}

Variable TokenClassifierHead::logits(const Variable& sequence, bool training, Rng* rng) const {
  Variable x = sequence;
  if (training && rng) x = ops::dropout(x, dropout_, true, *rng);
  return ops::linear(x, w_, b_);
}

SequenceClassifierHead::SequenceClassifierHead(const ModelConfig& config, std::size_t num_labels, std::uint64_t seed)
    : num_labels_(num_labels), dropout_(config.dropout) {
  Rng rng(seed);
  std::tie(w_, b_) = add_linear("sequence_classifier", config.hidden, num_labels, rng);
}

Variable SequenceClassifierHead::logits(const Variable& cls, bool training, Rng* rng) const {
  Variable x = cls;
  if (training && rng) x = ops::dropout(x, dropout_, true, *rng);
  return ops::linear(x, w_, b_);
}

QaSpanHead::QaSpanHead(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  std::tie(w_, b_) = add_linear("qa_span", config.hidden, 2, rng);
}

QaSpanHead::Logits QaSpanHead::logits(const Variable& sequence, std::size_t batch, std::size_t seq) const {
  Variable both = ops::linear(sequence, w_, b_);
  return {ops::reshape(ops::take_column(both, 0), {batch, seq}), ops::reshape(ops::take_column(both, 1), {batch, seq})};
}

}  // namespace forge
