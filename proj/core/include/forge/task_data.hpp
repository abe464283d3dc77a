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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/wordpiece.hpp"

namespace forge {

enum class TaskKind { kNer, kRe, kDc, kQa };

std::string_view task_kind_name(TaskKind kind);
/// Accepts "ner", "re", "dc", "qa" (case-insensitive).
TaskKind parse_task_kind(std::string_view name);

struct NerSentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::size_t line = 0;  // 1-based line of the first token in the source file
};

/// Byte range [begin, end) of an entity mention with its type (e.g. GENE).
struct EntityMention {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string type;
};

/// RE and DC record. RE carries one label, DC a label set.
struct TextExample {
  std::string id;
  std::string text;
  std::vector<std::string> labels;
  std::vector<EntityMention> entities;
};

struct QaAnswer {
  std::string text;
  std::size_t answer_start = 0;  // code-point offset into the context
};

struct QaExample {
  std::string id;
  std::string question;
  std::string context;
  std::vector<QaAnswer> answers;
};

struct TaskDataset {
  TaskKind kind = TaskKind::kNer;
  std::vector<NerSentence> ner;
  std::vector<TextExample> text;
  std::vector<QaExample> qa;
  std::vector<std::string> warnings;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  /// Tags (O first, then sorted) or labels (sorted) seen in this dataset.
  std::vector<std::string> label_space() const;
  /// Rows at `indices`, in order.
  TaskDataset subset(std::span<const std::size_t> indices) const;
};

/// Throws FormatError "line N: ..." unless every tag is O, B-X or I-X and
/// each I-X continues an X entity.
void validate_bio(std::span<const std::string> tags, std::size_t first_line);

/// CoNLL TSV: token<TAB>tag per line, blank line between sentences.
TaskDataset parse_conll(std::string_view contents);
/// id<TAB>text<TAB>labels[<TAB>entities]; labels comma-separated; entities
/// are "begin:end:TYPE" byte spans separated by ';'.
TaskDataset parse_text_tsv(std::string_view contents, TaskKind kind);
/// SQuAD v1.1 layout: data -> paragraphs -> {context, qas -> {id, question, answers}}.
TaskDataset parse_squad(std::string_view contents);
TaskDataset load_task_dataset(const std::filesystem::path& path, TaskKind kind);

std::string format_conll(const TaskDataset& dataset);
std::string format_text_tsv(const TaskDataset& dataset);
/// QA answers are written in list order, so a ranked candidate list survives.
std::string format_squad(const TaskDataset& dataset);
void save_task_dataset(const TaskDataset& dataset, const std::filesystem::path& path);

/// Replaces each mention with "@TYPE$"; other bytes are copied verbatim.
/// Throws InvalidArgument on overlapping or out-of-range spans.
std::string replace_entities(std::string_view text, std::span<const EntityMention> mentions);
/// Applies replace_entities to every example and drops the mention lists.
TaskDataset preprocess_re(const TaskDataset& dataset);

/// Task default maximum sequence length: NER/RE 256, DC 512, QA 384.
std::size_t default_max_seq_len(TaskKind kind);

struct NerFeature {
  std::size_t example = 0;
  std::size_t first_word = 0;  // index of the chunk's first word in the sentence
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> labels;      // ignore index off first subwords
  std::vector<std::size_t> word_starts;  // position of each chunk word's first subword
};

/// First-subword labelling; chunks break at word boundaries so each holds at
/// most max_seq_len - 2 subwords ([CLS] ... [SEP]). A single word longer than
/// that keeps only its leading subwords. Empty sentences are skipped and
/// noted in `warnings`.
std::vector<NerFeature> preprocess_ner(const TaskDataset& dataset, const Vocabulary& vocab,
                                       std::span<const std::string> label_space, std::size_t max_seq_len,
                                       std::vector<std::string>* warnings = nullptr);

/// Word-level tags from per-position logits [positions, K] of each feature.
/// An I-X that does not continue an X entity becomes B-X, which keeps the
/// output valid BIO without changing its entity spans.
std::vector<std::vector<std::string>> decode_ner(const TaskDataset& dataset, std::span<const NerFeature> features,
                                                 std::span<const std::vector<float>> logits,
                                                 std::span<const std::string> label_space);

struct ClassificationFeature {
  std::size_t example = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> labels;  // label-space indices
};

/// [CLS] text [SEP], truncated to max_seq_len.
std::vector<ClassificationFeature> preprocess_classification(const TaskDataset& dataset, const Vocabulary& vocab,
                                                             std::span<const std::string> label_space,
                                                             std::size_t max_seq_len);

struct QaFeature {
  std::size_t example = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> segment_ids;
  std::size_t context_start = 0;  // sequence position of the first context subword
  std::vector<std::pair<std::size_t, std::size_t>> context_bytes;  // per context subword
  std::int32_t start_position = 0;  // 0 ([CLS]) when the window lacks the answer
  std::int32_t end_position = 0;
};

struct QaFeatures {
  std::vector<QaFeature> features;
  std::size_t dropped = 0;
};

inline constexpr std::size_t kMaxQueryTokens = 64;
inline constexpr std::size_t kDefaultDocStride = 128;
inline constexpr std::size_t kMaxAnswerTokens = 30;

/// [CLS] question [SEP] context-window [SEP]. Consecutive windows overlap by
/// doc_stride subwords. Examples whose first answer cannot be located in the
/// context are dropped and counted.
QaFeatures preprocess_qa(const TaskDataset& dataset, const Vocabulary& vocab, std::size_t max_seq_len,
                         std::size_t doc_stride = kDefaultDocStride);

/// Up to n distinct answer strings per example, best first, from start/end
/// logits per feature (one vector each, indexed by sequence position).
std::vector<std::vector<std::string>> decode_qa(const TaskDataset& dataset, std::span<const QaFeature> features,
                                                std::span<const std::vector<float>> start_logits,
                                                std::span<const std::vector<float>> end_logits, std::size_t n = 5);

/// Synthetic NER data whose tags are a fixed function of each word's form.
TaskDataset make_toy_ner(std::size_t sentences, std::uint64_t seed);
/// Synthetic extractive QA over templated contexts.
TaskDataset make_toy_qa(std::size_t examples, std::uint64_t seed);
/// Raw-text corpus (blank-line separated documents) built from a dataset's sentences.
std::string toy_corpus_text(const TaskDataset& dataset, std::size_t sentences_per_doc);

}  // namespace forge
