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

#include "forge/encoder.hpp"

namespace forge {

/// Masked-LM head: dense + GELU + norm, then logits against the (tied)
/// token embedding table plus a per-token bias.
class MlmHead : public Module {
 public:
  MlmHead(const EncoderModel& encoder, std::uint64_t seed);
  /// hidden: [n, H] rows at masked positions -> [n, V] logits.
  Variable logits(const Variable& hidden) const;

 private:
  Variable word_embeddings_;
  Variable transform_w_, transform_b_, norm_g_, norm_b_, output_bias_;
  float eps_;
};

/// Pooler (dense + tanh over [CLS]) and a 2-way IsNext/NotNext classifier.
class NspHead : public Module {
 public:
  NspHead(const ModelConfig& config, std::uint64_t seed);
  Variable logits(const Variable& cls) const;

 private:
  Variable pooler_w_, pooler_b_, classifier_w_, classifier_b_;
};

/// Per-position K-way classifier (NER).
class TokenClassifierHead : public Module {
 public:
  TokenClassifierHead(const ModelConfig& config, std::size_t num_labels, std::uint64_t seed);
  Variable logits(const Variable& sequence, bool training, Rng* rng) const;
  std::size_t num_labels() const noexcept { return num_labels_; }

 private:
  Variable w_, b_;
  std::size_t num_labels_;
  float dropout_;
};

/// Single linear layer on the final [CLS] state (RE, DC, speed benchmark).
class SequenceClassifierHead : public Module {
 public:
  SequenceClassifierHead(const ModelConfig& config, std::size_t num_labels, std::uint64_t seed);
  Variable logits(const Variable& cls, bool training, Rng* rng) const;
  std::size_t num_labels() const noexcept { return num_labels_; }

 private:
  Variable w_, b_;
  std::size_t num_labels_;
  float dropout_;
};

/// Per-position start/end logits for extractive QA.
class QaSpanHead : public Module {
 public:
  QaSpanHead(const ModelConfig& config, std::uint64_t seed);

  struct Logits {
    Variable start;  // [batch, seq]
    Variable end;    // [batch, seq]
  };
  Logits logits(const Variable& sequence, std::size_t batch, std::size_t seq) const;

 private:
  Variable w_, b_;
};

}  // namespace forge
