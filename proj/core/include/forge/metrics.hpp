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

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace forge {

/// Typed word span [begin, end) within one sentence.
struct EntitySpan {
  std::size_t sentence = 0;
  std::string type;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

/// Precision, recall and F1 on a 0-100 scale.
struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// CoNLL-style chunking: an I-X that does not continue an X entity opens a new one.
std::vector<EntitySpan> bio_to_spans(std::size_t sentence, std::span<const std::string> tags);

/// Exact match on (sentence, type, begin, end). F1 is 0 when P + R = 0.
Prf entity_f1(std::span<const EntitySpan> gold, std::span<const EntitySpan> predicted);
/// Per-sentence tag sequences; sentences must align in count and length.
Prf entity_f1(std::span<const std::vector<std::string>> gold_tags,
              std::span<const std::vector<std::string>> predicted_tags);

enum class F1Mode { kMicro, kMacro };

/// Micro F1 pools TP/FP/FN over `labels`; macro averages per-label F1 with
/// F1 = 0 for labels that are never gold nor predicted correctly. In
/// single-label mode each example has exactly one gold and at most one
/// predicted label. Throws InvalidArgument on labels outside `labels`.
double micro_macro_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> predicted,
                      std::span<const std::string> labels, F1Mode mode, bool multi_label);

struct FactoidScores {
  double strict_accuracy = 0;
  double lenient_accuracy = 0;
  double mrr = 0;

  double mean() const { return (strict_accuracy + lenient_accuracy + mrr) / 3.0; }
};

/// Case-insensitive, whitespace-trimmed matching of up to five ranked
/// candidates against each question's gold answers.
FactoidScores bioasq_factoid(std::span<const std::vector<std::string>> gold_answers,
                             std::span<const std::vector<std::string>> ranked_candidates);

/// Trims surrounding whitespace and lower-cases ASCII letters.
std::string normalize_answer(std::string_view s);

/// (8 * NER + 4 * RE + 2 * DC + QA) / 15.
double overall_average(double ner_average, double re_average, double dc_average, double qa_average);
/// Mean of the QA cells (three metrics for each of the two QA settings).
double qa_average(std::span<const double> cells);

}  // namespace forge
