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

#include "forge/wordpiece.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/text.hpp"

namespace forge {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw FormatError("vocabulary: empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw FormatError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
  auto special = [&](std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw FormatError("vocabulary: missing special token " + std::string(name));
    return it->second;
  };
  pad_ = special(kPad);
  unk_ = special(kUnk);
  cls_ = special(kCls);
  sep_ = special(kSep);
  mask_ = special(kMask);
  if (pad_ != 0) throw FormatError("vocabulary: [PAD] must have id 0");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (is_special(static_cast<std::int32_t>(i))) continue;
    for (const auto& c : text::decode_utf8(tokens_[i])) {
      if (text::is_space(c.value)) throw FormatError("vocabulary: token with whitespace at id " + std::to_string(i));
    }
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << serialize();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string Vocabulary::hash() const { return sha256_hex(serialize()); }

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("token id " + std::to_string(id) + " out of range for vocabulary of " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<std::int32_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_special(std::int32_t id) const noexcept {
  return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
}

namespace {

using PairKey = std::uint64_t;

constexpr PairKey make_key(std::uint32_t l, std::uint32_t r) { return (static_cast<PairKey>(l) << 32) | r; }
constexpr std::uint32_t key_left(PairKey k) { return static_cast<std::uint32_t>(k >> 32); }
constexpr std::uint32_t key_right(PairKey k) { return static_cast<std::uint32_t>(k & 0xFFFFFFFFu); }

struct WordEntry {
  std::vector<std::uint32_t> units;
  std::int64_t freq;
};

struct Candidate {
  std::int64_t count;
  std::int64_t left_freq;
  std::int64_t right_freq;
  PairKey key;
};

/// Incremental merge state. Scores change when either the pair count or a
/// unit count changes, so a fresh heap entry is pushed on every such change
/// and stale entries are discarded when popped.
class MergeTrainer {
 public:
  MergeTrainer(std::vector<WordEntry> words, std::vector<std::string> unit_strings, std::int64_t min_frequency)
      : words_(std::move(words)), units_(std::move(unit_strings)), min_frequency_(min_frequency),
        heap_([this](const Candidate& a, const Candidate& b) { return worse(a, b); }) {
    for (std::size_t i = 0; i < units_.size(); ++i) unit_index_.emplace(units_[i], static_cast<std::uint32_t>(i));
    unit_freq_.assign(units_.size(), 0);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      for (auto u : words_[w].units) unit_freq_[u] += words_[w].freq;
      add_pairs(w, +1);
    }
    for (const auto& [key, count] : pair_count_) push(key);
  }

  /// Performs one merge; returns the new unit string, or nullopt when no
  /// eligible pair remains.
  std::optional<std::string> merge_next(bool& created_new) {
    while (!heap_.empty()) {
      Candidate top = heap_.top();
      heap_.pop();
      auto it = pair_count_.find(top.key);
      if (it == pair_count_.end() || it->second != top.count) continue;
      if (unit_freq_[key_left(top.key)] != top.left_freq || unit_freq_[key_right(top.key)] != top.right_freq) continue;
      if (top.count < min_frequency_) continue;
      return apply(top.key, created_new);
    }
    return std::nullopt;
  }

 private:
  // Strict weak order for the max-heap: true when a ranks below b.
  bool worse(const Candidate& a, const Candidate& b) const {
    const __int128 lhs = static_cast<__int128>(a.count) * b.left_freq * b.right_freq;
    const __int128 rhs = static_cast<__int128>(b.count) * a.left_freq * a.right_freq;
    if (lhs != rhs) return lhs < rhs;
    const auto& al = units_[key_left(a.key)];
    const auto& bl = units_[key_left(b.key)];
    if (al != bl) return al > bl;
    return units_[key_right(a.key)] > units_[key_right(b.key)];
  }

  void push(PairKey key) {
    auto it = pair_count_.find(key);
    if (it == pair_count_.end() || it->second < min_frequency_) return;
    heap_.push({it->second, unit_freq_[key_left(key)], unit_freq_[key_right(key)], key});
  }

  void add_pairs(std::size_t w, int sign) {
    const auto& units = words_[w].units;
    const std::int64_t delta = sign * words_[w].freq;
    for (std::size_t i = 0; i + 1 < units.size(); ++i) {
      const PairKey key = make_key(units[i], units[i + 1]);
      auto& count = pair_count_[key];
      const bool was_zero = count == 0;
      count += delta;
      touched_pairs_.insert(key);
      if (was_zero && count > 0) {
        unit_pairs_[units[i]].insert(key);
        unit_pairs_[units[i + 1]].insert(key);
        pair_words_[key].push_back(static_cast<std::uint32_t>(w));
      } else if (sign > 0) {
        pair_words_[key].push_back(static_cast<std::uint32_t>(w));
      }
      if (count == 0) {
        pair_count_.erase(key);
        unit_pairs_[units[i]].erase(key);
        unit_pairs_[units[i + 1]].erase(key);
      }
    }
  }

  std::string apply(PairKey key, bool& created_new) {
    const std::uint32_t left = key_left(key);
    const std::uint32_t right = key_right(key);
    std::string merged = units_[left];
    std::string_view rhs = units_[right];
    if (rhs.starts_with(Vocabulary::kContinuationPrefix)) rhs.remove_prefix(Vocabulary::kContinuationPrefix.size());
    merged += rhs;

    std::uint32_t merged_id;
    auto found = unit_index_.find(merged);
    created_new = found == unit_index_.end();
    if (created_new) {
      merged_id = static_cast<std::uint32_t>(units_.size());
      units_.push_back(merged);
      unit_freq_.push_back(0);
      unit_index_.emplace(merged, merged_id);
    } else {
      merged_id = found->second;
    }

    std::vector<std::uint32_t> affected = std::move(pair_words_[key]);
    pair_words_.erase(key);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());

    touched_pairs_.clear();
    for (auto w : affected) {
      auto& units = words_[w].units;
      bool present = false;
      for (std::size_t i = 0; i + 1 < units.size(); ++i) {
        if (units[i] == left && units[i + 1] == right) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      add_pairs(w, -1);
      std::vector<std::uint32_t> next;
      next.reserve(units.size());
      for (std::size_t i = 0; i < units.size(); ++i) {
        if (i + 1 < units.size() && units[i] == left && units[i + 1] == right) {
          next.push_back(merged_id);
          unit_freq_[left] -= words_[w].freq;
          unit_freq_[right] -= words_[w].freq;
          unit_freq_[merged_id] += words_[w].freq;
          ++i;
        } else {
          next.push_back(units[i]);
        }
      }
      units = std::move(next);
      add_pairs(w, +1);
    }

    std::unordered_set<PairKey> refresh(touched_pairs_.begin(), touched_pairs_.end());
    for (auto unit : {left, right, merged_id}) {
      auto it = unit_pairs_.find(unit);
      if (it != unit_pairs_.end()) refresh.insert(it->second.begin(), it->second.end());
    }
    std::vector<PairKey> ordered(refresh.begin(), refresh.end());
    std::sort(ordered.begin(), ordered.end());
    for (auto k : ordered) push(k);
    return merged;
  }

  std::vector<WordEntry> words_;
  std::vector<std::string> units_;
  std::unordered_map<std::string, std::uint32_t> unit_index_;
  std::vector<std::int64_t> unit_freq_;
  std::unordered_map<PairKey, std::int64_t> pair_count_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> pair_words_;
  std::unordered_map<std::uint32_t, std::unordered_set<PairKey>> unit_pairs_;
  std::unordered_set<PairKey> touched_pairs_;
  std::int64_t min_frequency_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::function<bool(const Candidate&, const Candidate&)>> heap_;
};

std::vector<std::string> special_tokens() {
  return {std::string(Vocabulary::kPad), std::string(Vocabulary::kUnk), std::string(Vocabulary::kCls),
          std::string(Vocabulary::kSep), std::string(Vocabulary::kMask)};
}

}  // namespace

VocabTrainResult train_vocabulary(std::span<const std::string> corpus, std::size_t target_size,
                                  std::size_t min_frequency) {
  if (min_frequency == 0) throw InvalidArgument("min_frequency must be positive");
  std::map<std::string, std::int64_t> word_counts;
  for (const auto& doc : corpus) {
    for (const auto& w : text::split_words(doc)) ++word_counts[doc.substr(w.begin, w.end - w.begin)];
  }
  if (word_counts.empty()) throw InvalidArgument("cannot train a vocabulary on an empty corpus");

  std::set<std::string> alphabet;
  std::vector<std::vector<std::string>> split_words;
  split_words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    std::vector<std::string> pieces;
    const auto cps = text::decode_utf8(word);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string piece = i == 0 ? std::string() : std::string(Vocabulary::kContinuationPrefix);
      piece.append(word, cps[i].begin, cps[i].end - cps[i].begin);
      alphabet.insert(piece);
      pieces.push_back(std::move(piece));
    }
    split_words.push_back(std::move(pieces));
  }

  const std::size_t min_size = alphabet.size() + special_tokens().size();
  if (target_size < min_size) {
    throw InvalidArgument("target vocabulary size " + std::to_string(target_size) +
                          " is below the minimum feasible size " + std::to_string(min_size) + " (alphabet of " +
                          std::to_string(alphabet.size()) + " units plus 5 specials)");
  }

  std::vector<std::string> tokens = special_tokens();
  std::vector<std::string> unit_strings(alphabet.begin(), alphabet.end());
  for (const auto& u : unit_strings) {
    if (std::find(tokens.begin(), tokens.end(), u) != tokens.end()) {
      throw InvalidArgument("corpus alphabet collides with a special token: " + u);
    }
  }
  tokens.insert(tokens.end(), unit_strings.begin(), unit_strings.end());

  std::unordered_map<std::string, std::uint32_t> unit_id;
  for (std::size_t i = 0; i < unit_strings.size(); ++i) unit_id.emplace(unit_strings[i], static_cast<std::uint32_t>(i));
  std::vector<WordEntry> words;
  words.reserve(word_counts.size());
  std::size_t wi = 0;
  for (const auto& [word, count] : word_counts) {
    WordEntry entry{{}, count};
    for (const auto& piece : split_words[wi++]) entry.units.push_back(unit_id.at(piece));
    words.push_back(std::move(entry));
  }

  VocabTrainResult result{Vocabulary(tokens), false, alphabet.size(), 0};
  MergeTrainer trainer(std::move(words), std::move(unit_strings), static_cast<std::int64_t>(min_frequency));
  while (tokens.size() < target_size) {
    bool created = false;
    auto merged = trainer.merge_next(created);
    if (!merged) break;
    ++result.merges;
    if (created) tokens.push_back(std::move(*merged));
  }
  result.reached_target = tokens.size() == target_size;
  result.vocab = Vocabulary(std::move(tokens));
  return result;
}

std::vector<TokenSpan> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenSpan> spans;
  std::size_t word_index = 0;
  std::string candidate;
  for (const auto& word : text::split_words(text)) {
    const std::string_view w = text.substr(word.begin, word.end - word.begin);
    const auto cps = text::decode_utf8(w);
    const std::size_t first = spans.size();
    bool unknown = cps.size() > kMaxCharsPerWord;
    std::size_t start = 0;
    while (!unknown && start < cps.size()) {
      std::size_t end = cps.size();
      std::optional<std::int32_t> match;
      while (end > start) {
        candidate.assign(start > 0 ? Vocabulary::kContinuationPrefix : std::string_view());
        candidate.append(w.substr(cps[start].begin, cps[end - 1].end - cps[start].begin));
        match = vocab.find(candidate);
        if (match) break;
        --end;
      }
      if (!match) {
        unknown = true;
        break;
      }
      spans.push_back({*match, word_index, word.begin + cps[start].begin, word.begin + cps[end - 1].end});
      start = end;
    }
    if (unknown) {
      spans.resize(first);
      spans.push_back({vocab.unk_id(), word_index, word.begin, word.end});
    }
    ++word_index;
  }
  return spans;
}

namespace {

std::string_view strip_continuation(std::string_view token) {
  if (token.starts_with(Vocabulary::kContinuationPrefix) && token.size() > Vocabulary::kContinuationPrefix.size()) {
    token.remove_prefix(Vocabulary::kContinuationPrefix.size());
  }
  return token;
}

}  // namespace

std::string detokenize(std::span<const TokenSpan> spans, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string& tok = vocab.token(spans[i].token_id);
    if (i == 0) {
      out += tok;
      continue;
    }
    const TokenSpan& prev = spans[i - 1];
    if (spans[i].word_index == prev.word_index) {
      out += vocab.is_special(spans[i].token_id) ? std::string_view(tok) : strip_continuation(tok);
      continue;
    }
    const bool anchored = prev.byte_end > prev.byte_begin;
    if (!(anchored && prev.byte_end == spans[i].byte_begin)) out += ' ';
    out += tok;
  }
  return out;
}

std::string detokenize_ids(std::span<const std::int32_t> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& tok = vocab.token(ids[i]);
    const bool continuation = !vocab.is_special(ids[i]) && tok.starts_with(Vocabulary::kContinuationPrefix) &&
                              tok.size() > Vocabulary::kContinuationPrefix.size();
    if (continuation && i > 0) {
      out += strip_continuation(tok);
    } else {
      if (i > 0) out += ' ';
      out += tok;
    }
  }
  return out;
}

}  // namespace forge
