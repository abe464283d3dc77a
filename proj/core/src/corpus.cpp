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

#include "forge/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/rng.hpp"
#include "forge/text.hpp"

namespace forge {
namespace {

constexpr std::array<std::string_view, 31> kAbbreviations = {
    "e.g", "i.e", "al", "Fig", "Figs", "fig", "Dr", "Drs", "Mr", "Mrs", "Ms", "Prof", "vs", "cf", "approx",
    "No", "no", "Nos", "St", "Inc", "Ltd", "Co", "Eq", "Eqs", "Ref", "Refs", "ca", "resp", "Suppl", "Vol", "et"};

constexpr std::size_t kMaxProtectedParenthetical = 60;

bool is_abbreviation(std::string_view token) {
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), token) != kAbbreviations.end();
}

/// A single capital letter such as the "J" in "Smith J. A.".
bool is_initial(std::string_view token) {
  const auto cps = text::decode_utf8(token);
  return cps.size() == 1 && text::is_upper(cps[0].value);
}

bool is_capitalized(std::string_view token) {
  const auto cps = text::decode_utf8(token);
  return !cps.empty() && text::is_upper(cps[0].value);
}

/// Whitespace-delimited token ending right before byte `end` (punctuation
/// at `end` excluded).
std::string_view token_before(std::string_view s, std::size_t end) {
  std::size_t begin = end;
  while (begin > 0 && !std::isspace(static_cast<unsigned char>(s[begin - 1]))) --begin;
  return s.substr(begin, end - begin);
}

/// The whitespace-delimited token starting at byte `begin`.
std::string_view token_at(std::string_view s, std::size_t begin) {
  std::size_t end = begin;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
  return s.substr(begin, end - begin);
}

std::vector<bool> protected_bytes(std::string_view s) {
  std::vector<bool> prot(s.size(), false);
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') {
      open.push_back(i);
    } else if (s[i] == ')' && !open.empty()) {
      const std::size_t start = open.back();
      open.pop_back();
      if (i - start < kMaxProtectedParenthetical) {
        for (std::size_t k = start; k <= i; ++k) prot[k] = true;
      }
    }
  }
  return prot;
}

}  // namespace

Document segment_sentences(std::string_view text) {
  const std::string normalized = text::normalize_whitespace(text);
  if (normalized.empty()) throw InvalidArgument("cannot segment empty or whitespace-only text");
  const std::string_view s = normalized;
  const auto prot = protected_bytes(s);

  Document doc;
  std::size_t sentence_start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 2 >= s.size() || s[i + 1] != ' ') continue;
    if (prot[i]) continue;
    const auto next_cps = text::decode_utf8(s.substr(i + 2, 4));
    if (next_cps.empty() || !(text::is_upper(next_cps[0].value) || text::is_digit(next_cps[0].value))) continue;
    if (c == '.') {
      const std::string_view prev = token_before(s, i);
      if (is_abbreviation(prev)) continue;
      if (is_initial(prev)) {
        // Initials chain ("J. A.") or follow a capitalised surname ("Smith J.").
        const std::string_view next = token_at(s, i + 2);
        const std::size_t prev_begin = i - prev.size();
        const std::string_view before = prev_begin >= 2 ? token_before(s, prev_begin - 1) : std::string_view();
        const bool next_is_initial = next.size() >= 2 && next.back() == '.' && is_initial(next.substr(0, next.size() - 1));
        std::string_view before_word = before;
        if (!before_word.empty() && before_word.back() == '.') before_word.remove_suffix(1);
        const bool after_name = !before.empty() && (is_capitalized(before_word) || is_initial(before_word));
        if (next_is_initial || after_name) continue;
      }
    }
    doc.sentences.emplace_back(s.substr(sentence_start, i + 1 - sentence_start));
    sentence_start = i + 2;
  }
  if (sentence_start < s.size()) doc.sentences.emplace_back(s.substr(sentence_start));
  return doc;
}

std::vector<Document> parse_corpus(std::string_view contents) {
  std::vector<Document> docs;
  std::string current;
  auto flush = [&] {
    if (!text::normalize_whitespace(current).empty()) docs.push_back(segment_sentences(current));
    current.clear();
  };
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    const std::string_view line = contents.substr(pos, nl - pos);
    if (text::normalize_whitespace(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current.push_back(' ');
      current.append(line);
    }
    pos = nl + 1;
  }
  flush();
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

namespace {

struct TokenizedSentence {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> words;  // sentence-local word index
};

using TokenizedDoc = std::vector<TokenizedSentence>;

void append_sentence(const TokenizedSentence& s, std::vector<std::int32_t>& ids, std::vector<std::int32_t>& words) {
  const std::int32_t base = words.empty() ? 0 : words.back() + 1;
  ids.insert(ids.end(), s.ids.begin(), s.ids.end());
  for (auto w : s.words) words.push_back(base + w);
}

void truncate_pair(SegmentPair& p, std::size_t max_tokens) {
  while (p.tokens_a.size() + p.tokens_b.size() > max_tokens) {
    if (p.tokens_a.size() > p.tokens_b.size()) {
      p.tokens_a.pop_back();
      p.words_a.pop_back();
    } else {
      p.tokens_b.pop_back();
      p.words_b.pop_back();
    }
  }
}

void pairs_from_document(std::span<const TokenizedDoc> docs, std::size_t doc_index, const NspOptions& options,
                         std::vector<SegmentPair>& out) {
  const TokenizedDoc& doc = docs[doc_index];
  Rng rng(derive_seed(options.seed, doc_index));
  const std::size_t max_tokens = options.max_seq_len - 3;
  std::size_t target = max_tokens;
  if (rng.bernoulli(options.short_seq_prob)) target = static_cast<std::size_t>(rng.range(2, static_cast<std::int64_t>(max_tokens)));

  std::vector<std::size_t> chunk;
  std::size_t chunk_len = 0;
  std::size_t i = 0;
  while (i < doc.size()) {
    chunk.push_back(i);
    chunk_len += doc[i].ids.size();
    if (i + 1 == doc.size() || chunk_len >= target) {
      const bool is_next = rng.bernoulli(0.5);
      // A lone long sentence still gets its continuation as segment B.
      if (is_next && chunk.size() == 1 && i + 1 < doc.size()) {
        chunk.push_back(++i);
      } else if (is_next && chunk.size() == 1 && i > 0) {
        chunk.insert(chunk.begin(), i - 1);
      }
      std::size_t a_end = 1;
      if (chunk.size() >= 2) a_end = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(chunk.size()) - 1));
      SegmentPair pair;
      for (std::size_t k = 0; k < a_end; ++k) append_sentence(doc[chunk[k]], pair.tokens_a, pair.words_a);
      if (chunk.size() == 1 || !is_next) {
        pair.label = NspLabel::kNotNext;
        const std::size_t target_b = target > pair.tokens_a.size() ? target - pair.tokens_a.size() : 1;
        std::size_t other = static_cast<std::size_t>(rng.below(docs.size() - 1));
        if (other >= doc_index) ++other;
        const TokenizedDoc& rdoc = docs[other];
        const std::size_t start = static_cast<std::size_t>(rng.below(rdoc.size()));
        for (std::size_t j = start; j < rdoc.size(); ++j) {
          append_sentence(rdoc[j], pair.tokens_b, pair.words_b);
          if (pair.tokens_b.size() >= target_b) break;
        }
        // Unused sentences of this chunk are revisited by the next pair.
        i -= chunk.size() - a_end;
      } else {
        pair.label = NspLabel::kIsNext;
        for (std::size_t k = a_end; k < chunk.size(); ++k) append_sentence(doc[chunk[k]], pair.tokens_b, pair.words_b);
      }
      truncate_pair(pair, max_tokens);
      if (!pair.tokens_a.empty() && !pair.tokens_b.empty()) out.push_back(std::move(pair));
      chunk.clear();
      chunk_len = 0;
    }
    ++i;
  }
}

}  // namespace

std::vector<SegmentPair> build_nsp_pairs(std::span<const Document> docs, const Vocabulary& vocab,
                                         const NspOptions& options) {
  if (docs.size() < 2) throw InvalidArgument("NSP pairing needs at least two documents for NotNext sampling");
  if (options.max_seq_len < 5) throw InvalidArgument("max_seq_len must be at least 5");

  std::vector<TokenizedDoc> tokenized(docs.size());
  parallel_for(docs.size(), [&](std::size_t d) {
    for (const auto& sentence : docs[d].sentences) {
      TokenizedSentence ts;
      for (const auto& span : tokenize(sentence, vocab)) {
        ts.ids.push_back(span.token_id);
        ts.words.push_back(static_cast<std::int32_t>(span.word_index));
      }
      if (!ts.ids.empty()) tokenized[d].push_back(std::move(ts));
    }
  });
  for (std::size_t d = 0; d < tokenized.size(); ++d) {
    if (tokenized[d].empty()) throw InvalidArgument("document " + std::to_string(d) + " has no tokens");
  }

  std::vector<std::vector<SegmentPair>> per_doc(docs.size());
  parallel_for(docs.size(), [&](std::size_t d) { pairs_from_document(tokenized, d, options, per_doc[d]); });
  std::vector<SegmentPair> pairs;
  for (auto& v : per_doc) {
    for (auto& p : v) {
      p.pair_id = static_cast<std::uint32_t>(pairs.size());
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

UnmaskedInstance frame_pair(const SegmentPair& pair, const Vocabulary& vocab) {
  UnmaskedInstance inst;
  inst.pair_id = pair.pair_id;
  inst.nsp_label = pair.label;
  const std::int32_t b_offset = pair.words_a.empty() ? 0 : pair.words_a.back() + 1;
  inst.input_ids.push_back(vocab.cls_id());
  inst.segment_ids.push_back(0);
  inst.word_ids.push_back(-1);
  for (std::size_t i = 0; i < pair.tokens_a.size(); ++i) {
    inst.input_ids.push_back(pair.tokens_a[i]);
    inst.segment_ids.push_back(0);
    inst.word_ids.push_back(pair.words_a[i]);
  }
  inst.input_ids.push_back(vocab.sep_id());
  inst.segment_ids.push_back(0);
  inst.word_ids.push_back(-1);
  for (std::size_t i = 0; i < pair.tokens_b.size(); ++i) {
    inst.input_ids.push_back(pair.tokens_b[i]);
    inst.segment_ids.push_back(1);
    inst.word_ids.push_back(b_offset + pair.words_b[i]);
  }
  inst.input_ids.push_back(vocab.sep_id());
  inst.segment_ids.push_back(1);
  inst.word_ids.push_back(-1);
  return inst;
}

PretrainInstance apply_whole_word_masking(const UnmaskedInstance& instance, const Vocabulary& vocab,
                                          const MaskingOptions& options, std::uint32_t duplicate_index) {
  const auto& ids = instance.input_ids;
  if (instance.segment_ids.size() != ids.size() || instance.word_ids.size() != ids.size()) {
    throw InvalidArgument("masking: instance fields differ in length");
  }
  // Whole-word candidate groups of contiguous positions.
  std::vector<std::vector<std::int32_t>> words;
  std::size_t maskable = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (instance.word_ids[i] < 0 || vocab.is_special(ids[i])) continue;
    ++maskable;
    const bool continues = !words.empty() && i > 0 && instance.word_ids[i - 1] == instance.word_ids[i] &&
                           static_cast<std::size_t>(words.back().back()) == i - 1;
    if (continues) {
      words.back().push_back(static_cast<std::int32_t>(i));
    } else {
      words.push_back({static_cast<std::int32_t>(i)});
    }
  }
  if (maskable == 0) throw InvalidArgument("masking: instance has no maskable token");

  Rng rng(derive_seed(options.seed, instance.pair_id, duplicate_index));
  const auto rounded = static_cast<std::size_t>(std::lround(options.masking_rate * static_cast<double>(maskable)));
  const std::size_t budget = std::min(options.max_predictions, std::max<std::size_t>(1, rounded));

  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::int32_t> positions;
  for (auto w : order) {
    if (positions.size() >= budget) break;
    if (positions.size() + words[w].size() > budget) continue;
    positions.insert(positions.end(), words[w].begin(), words[w].end());
  }
  if (positions.empty()) {
    for (auto w : order) {
      if (words[w].size() <= options.max_predictions) {
        positions = words[w];
        break;
      }
    }
  }
  std::sort(positions.begin(), positions.end());

  PretrainInstance out;
  out.pair_id = instance.pair_id;
  out.duplicate_index = duplicate_index;
  out.input_ids = ids;
  out.segment_ids = instance.segment_ids;
  out.nsp_label = instance.nsp_label;
  out.masked_positions = positions;
  for (auto p : positions) {
    const auto idx = static_cast<std::size_t>(p);
    out.mlm_labels.push_back(ids[idx]);
    if (rng.bernoulli(0.8)) {
      out.input_ids[idx] = vocab.mask_id();
    } else if (rng.bernoulli(0.5)) {
      // kept unchanged
    } else {
      out.input_ids[idx] = static_cast<std::int32_t>(rng.below(vocab.size()));
    }
  }
  return out;
}

std::size_t PretrainSetOptions::resolved_max_predictions() const {
  if (max_predictions > 0) return max_predictions;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(masking_rate * static_cast<double>(max_seq_len))));
}

std::vector<PretrainInstance> generate_pretraining_set(std::span<const Document> docs, const Vocabulary& vocab,
                                                       const PretrainSetOptions& options) {
  if (options.dup_factor == 0) throw InvalidArgument("dup_factor must be positive");
  const auto pairs = build_nsp_pairs(docs, vocab, {options.max_seq_len, options.seed, options.short_seq_prob});
  const MaskingOptions masking{options.masking_rate, options.resolved_max_predictions(), options.seed};
  std::vector<PretrainInstance> out(pairs.size() * options.dup_factor);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const UnmaskedInstance framed = frame_pair(pairs[p], vocab);
    for (std::size_t d = 0; d < options.dup_factor; ++d) {
      out[p * options.dup_factor + d] = apply_whole_word_masking(framed, vocab, masking, static_cast<std::uint32_t>(d));
    }
  });
  return out;
}

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string_view data, std::string_view what) : data_(data), what_(what) {}
  bool done() const { return pos_ == data_.size(); }
  std::uint32_t u32() {
    if (data_.size() - pos_ < 4) throw FormatError(std::string(what_) + ": truncated record");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::vector<std::int32_t> ids(std::size_t n) {
    std::vector<std::int32_t> out(n);
    for (auto& v : out) v = static_cast<std::int32_t>(u32());
    return out;
  }

 private:
  std::string_view data_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_pretraining_set(const std::filesystem::path& path, std::span<const PretrainInstance> instances,
                           const PretrainSetOptions& options, const Vocabulary& vocab) {
  std::string buf;
  std::string rec;
  for (const auto& inst : instances) {
    rec.clear();
    put_u32(rec, inst.pair_id);
    put_u32(rec, inst.duplicate_index);
    put_u32(rec, static_cast<std::uint32_t>(inst.nsp_label));
    put_u32(rec, static_cast<std::uint32_t>(inst.input_ids.size()));
    for (auto v : inst.input_ids) put_u32(rec, static_cast<std::uint32_t>(v));
    for (auto v : inst.segment_ids) put_u32(rec, static_cast<std::uint32_t>(v));
    put_u32(rec, static_cast<std::uint32_t>(inst.masked_positions.size()));
    for (auto v : inst.masked_positions) put_u32(rec, static_cast<std::uint32_t>(v));
    for (auto v : inst.mlm_labels) put_u32(rec, static_cast<std::uint32_t>(v));
    put_u32(buf, static_cast<std::uint32_t>(rec.size()));
    buf += rec;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());

  nlohmann::json meta = {
      {"format", "forge-pretrain-v1"},
      {"seed", options.seed},
      {"masking_rate", options.masking_rate},
      {"dup_factor", options.dup_factor},
      {"max_seq_len", options.max_seq_len},
      {"max_predictions", options.resolved_max_predictions()},
      {"short_seq_prob", options.short_seq_prob},
      {"vocab_hash", vocab.hash()},
      {"instances", instances.size()},
  };
  std::ofstream side(path.string() + ".json", std::ios::binary);
  if (!side) throw IoError("cannot write sidecar for " + path.string());
  side << meta.dump(2) << '\n';
}

std::vector<PretrainInstance> read_pretraining_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  Reader outer(data, path.string());
  std::vector<PretrainInstance> out;
  std::size_t offset = 0;
  while (!outer.done()) {
    const std::uint32_t len = outer.u32();
    offset += 4;
    if (data.size() - offset < len) throw FormatError(path.string() + ": truncated record");
    Reader r(std::string_view(data).substr(offset, len), path.string());
    PretrainInstance inst;
    inst.pair_id = r.u32();
    inst.duplicate_index = r.u32();
    const std::uint32_t label = r.u32();
    if (label > 1) throw FormatError(path.string() + ": bad NSP label");
    inst.nsp_label = static_cast<NspLabel>(label);
    const std::uint32_t n = r.u32();
    inst.input_ids = r.ids(n);
    inst.segment_ids = r.ids(n);
    const std::uint32_t m = r.u32();
    inst.masked_positions = r.ids(m);
    inst.mlm_labels = r.ids(m);
    if (!r.done()) throw FormatError(path.string() + ": record length mismatch");
    out.push_back(std::move(inst));
    offset += len;
    outer = Reader(std::string_view(data).substr(offset), path.string());
  }
  return out;
}

}  // namespace forge
