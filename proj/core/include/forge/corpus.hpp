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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/wordpiece.hpp"

namespace forge {

/// A source document as an ordered list of non-empty sentences.
struct Document {
  std::vector<std::string> sentences;
};

/// Rule-based splitter: breaks after . ! ? when followed by whitespace and an
/// uppercase letter or digit, except after known abbreviations and initials,
/// and never inside a balanced parenthetical shorter than 60 bytes.
/// Throws InvalidArgument for empty or whitespace-only text.
Document segment_sentences(std::string_view text);

/// Corpus file: documents separated by blank lines; the lines of a document
/// are joined with spaces and then sentence-segmented.
std::vector<Document> parse_corpus(std::string_view contents);
std::vector<Document> read_corpus(const std::filesystem::path& path);

enum class NspLabel : std::uint8_t { kIsNext = 0, kNotNext = 1 };

/// Two token segments before [CLS]/[SEP] framing. word_ids group subwords of
/// the same source word and are unique within the pair.
struct SegmentPair {
  std::uint32_t pair_id = 0;
  std::vector<std::int32_t> tokens_a;
  std::vector<std::int32_t> tokens_b;
  std::vector<std::int32_t> words_a;
  std::vector<std::int32_t> words_b;
  NspLabel label = NspLabel::kIsNext;
};

struct NspOptions {
  std::size_t max_seq_len = 128;
  std::uint64_t seed = 0;
  double short_seq_prob = 0.1;
};

/// Packs sentences into (A, B) segment pairs. B is the true continuation with
/// probability 0.5, otherwise drawn from a different document. Each pair is
/// truncated to max_seq_len - 3 tokens by trimming the longer segment's end.
/// Requires at least two documents.
std::vector<SegmentPair> build_nsp_pairs(std::span<const Document> docs, const Vocabulary& vocab,
                                         const NspOptions& options);

/// [CLS] A [SEP] B [SEP] before masking. word_ids is -1 on special positions.
struct UnmaskedInstance {
  std::uint32_t pair_id = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> word_ids;
  NspLabel nsp_label = NspLabel::kIsNext;
};

UnmaskedInstance frame_pair(const SegmentPair& pair, const Vocabulary& vocab);

struct PretrainInstance {
  std::uint32_t pair_id = 0;
  std::uint32_t duplicate_index = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> masked_positions;  // sorted
  std::vector<std::int32_t> mlm_labels;        // original ids at masked_positions
  NspLabel nsp_label = NspLabel::kIsNext;

  friend bool operator==(const PretrainInstance&, const PretrainInstance&) = default;
};

struct MaskingOptions {
  double masking_rate = 0.15;
  std::size_t max_predictions = 20;
  std::uint64_t seed = 0;
};

/// Whole-word masking: words are drawn uniformly without replacement until
/// the budget min(max_predictions, max(1, round(rate * maskable))) would be
/// exceeded; every subword of a drawn word is masked. Each position becomes
/// [MASK] (80%), a uniform random id (10%) or stays unchanged (10%). The
/// random stream is derived from (seed, pair_id, duplicate_index).
PretrainInstance apply_whole_word_masking(const UnmaskedInstance& instance, const Vocabulary& vocab,
                                          const MaskingOptions& options, std::uint32_t duplicate_index);

struct PretrainSetOptions {
  std::size_t max_seq_len = 128;
  std::size_t dup_factor = 20;
  double masking_rate = 0.15;
  /// 0 selects round(masking_rate * max_seq_len).
  std::size_t max_predictions = 0;
  double short_seq_prob = 0.1;
  std::uint64_t seed = 0;

  std::size_t resolved_max_predictions() const;
};

/// dup_factor masked copies of every packed pair, ordered by (pair, duplicate).
std::vector<PretrainInstance> generate_pretraining_set(std::span<const Document> docs, const Vocabulary& vocab,
                                                       const PretrainSetOptions& options);

/// Length-prefixed little-endian records plus a JSON sidecar at path + ".json".
void write_pretraining_set(const std::filesystem::path& path, std::span<const PretrainInstance> instances,
                           const PretrainSetOptions& options, const Vocabulary& vocab);
std::vector<PretrainInstance> read_pretraining_set(const std::filesystem::path& path);

}  // namespace forge
