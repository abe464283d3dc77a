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
#include <unordered_map>
#include <vector>

namespace forge {

/// Cased WordPiece vocabulary. Token index is the id. Immutable once built.
class Vocabulary {
 public:
  static constexpr std::string_view kContinuationPrefix = "##";
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";

  /// Validates: unique tokens, all five specials with [PAD] at id 0, and no
  /// whitespace inside ordinary tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// One token per line, newline terminated; the exact bytes `save` writes.
  std::string serialize() const;
  std::string hash() const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::int32_t id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<std::int32_t> find(const std::string& token) const;
  bool contains(const std::string& token) const { return find(token).has_value(); }
  bool is_special(std::int32_t id) const noexcept;

  std::int32_t pad_id() const noexcept { return pad_; }
  std::int32_t unk_id() const noexcept { return unk_; }
  std::int32_t cls_id() const noexcept { return cls_; }
  std::int32_t sep_id() const noexcept { return sep_; }
  std::int32_t mask_id() const noexcept { return mask_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::int32_t pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, mask_ = 0;
};

/// One subword of tokenized text.
struct TokenSpan {
  std::int32_t token_id = 0;
  /// Index of the source word (whitespace/punctuation delimited).
  std::size_t word_index = 0;
  /// Half-open byte range in the source text.
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

inline constexpr std::size_t kMaxCharsPerWord = 100;
inline constexpr std::size_t kDefaultMinFrequency = 2;

struct VocabTrainResult {
  Vocabulary vocab;
  /// False when merges ran out before reaching the requested size.
  bool reached_target = false;
  /// Number of single-character units (word-initial and continuation forms).
  std::size_t alphabet_size = 0;
  std::size_t merges = 0;
};

/// Trains a WordPiece vocabulary: all characters seed the alphabet, then the
/// adjacent unit pair maximising count(pair) / (count(left) * count(right))
/// is merged repeatedly (ties: smallest (left, right) in byte order). Pairs
/// seen fewer than `min_frequency` times are never merged.
VocabTrainResult train_vocabulary(std::span<const std::string> corpus, std::size_t target_size,
                                  std::size_t min_frequency = kDefaultMinFrequency);

/// Greedy longest-match-first segmentation. Words with an unmatchable
/// remainder, or longer than kMaxCharsPerWord, become a single [UNK].
std::vector<TokenSpan> tokenize(std::string_view text, const Vocabulary& vocab);

/// Joins subwords of a word without spaces and words with single spaces
/// (no space between words that were adjacent in the source).
std::string detokenize(std::span<const TokenSpan> spans, const Vocabulary& vocab);

/// Detokenizes bare ids: a continuation-prefixed token extends the previous word.
std::string detokenize_ids(std::span<const std::int32_t> ids, const Vocabulary& vocab);

}  // namespace forge
