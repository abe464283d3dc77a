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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "forge/error.hpp"
#include "forge/rng.hpp"
#include "forge/text.hpp"
#include "forge/wordpiece.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

const std::vector<std::string> kSpecials{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

// Recomputes every pair count and unit count from scratch on each iteration.
std::vector<std::string> brute_force_vocab(const std::vector<std::string>& corpus, std::size_t target,
                                           std::int64_t min_frequency) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& w : text::split_words(doc)) ++counts[doc.substr(w.begin, w.end - w.begin)];
  }
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  std::set<std::string> alphabet;
  for (const auto& [word, n] : counts) {
    std::vector<std::string> units;
    for (const auto& cp : text::decode_utf8(word)) {
      units.push_back((units.empty() ? "" : "##") + word.substr(cp.begin, cp.end - cp.begin));
      alphabet.insert(units.back());
    }
    words.emplace_back(units, n);
  }
  std::vector<std::string> vocab = kSpecials;
  vocab.insert(vocab.end(), alphabet.begin(), alphabet.end());
  while (vocab.size() < target) {
    std::map<std::string, std::int64_t> unit_freq;
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_freq;
    for (const auto& [units, n] : words) {
      for (std::size_t i = 0; i < units.size(); ++i) {
        unit_freq[units[i]] += n;
        if (i + 1 < units.size()) pair_freq[{units[i], units[i + 1]}] += n;
      }
    }
    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 0;
    for (const auto& [pair, n] : pair_freq) {
      if (n < min_frequency) continue;
      if (best) {
        const auto lhs = static_cast<__int128>(n) * unit_freq[best->first] * unit_freq[best->second];
        const auto rhs = static_cast<__int128>(best_count) * unit_freq[pair.first] * unit_freq[pair.second];
        if (lhs <= rhs) continue;  // map order already visits the smaller pair first
      }
      best = &pair;
      best_count = n;
    }
    if (!best) break;
    const auto [left, right] = *best;
    const std::string merged = left + right.substr(right.starts_with("##") ? 2 : 0);
    for (auto& [units, n] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < units.size(); ++i) {
        if (i + 1 < units.size() && units[i] == left && units[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(units[i]);
        }
      }
      units = std::move(next);
    }
    if (std::find(vocab.begin(), vocab.end(), merged) == vocab.end()) vocab.push_back(merged);
  }
  return vocab;
}

std::vector<std::string> token_strings(std::span<const TokenSpan> spans, const Vocabulary& v) {
  std::vector<std::string> out;
  for (const auto& s : spans) out.push_back(v.token(s.token_id));
  return out;
}

Vocabulary vocab_with(std::vector<std::string> extra) {
  std::vector<std::string> tokens = kSpecials;
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return Vocabulary(tokens);
}

TEST(Vocabulary, ValidatesSpecialsAndUniqueness) {
  EXPECT_NO_THROW(vocab_with({"a"}));
  EXPECT_THROW(Vocabulary({"[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]"}), FormatError);
  EXPECT_THROW(vocab_with({"a", "a"}), FormatError);
  EXPECT_THROW(vocab_with({"a b"}), FormatError);
  EXPECT_THROW(Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]"}), FormatError);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  testing::TempDir dir("vocab");
  auto v = vocab_with({"β", "##ab", "x"});
  v.save(dir / "v.txt");
  auto w = Vocabulary::load(dir / "v.txt");
  EXPECT_EQ(v.tokens(), w.tokens());
  EXPECT_EQ(testing::read_file(dir / "v.txt"), v.serialize());
  EXPECT_EQ(v.hash(), w.hash());
}

TEST(TrainVocabulary, SmallCorpusMatchesBruteForce) {
  std::vector<std::string> corpus{"aaab aaab aab"};
  auto result = train_vocabulary(corpus, 10, 1);
  EXPECT_EQ(result.vocab.tokens(), brute_force_vocab(corpus, 10, 1));
  EXPECT_TRUE(result.vocab.contains("a"));
  EXPECT_TRUE(result.vocab.contains("##a"));
  EXPECT_TRUE(result.vocab.contains("##b"));
}

TEST(TrainVocabulary, RandomCorporaMatchBruteForce) {
  Rng rng(17);
  const std::string letters = "abcdeé";
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::string> corpus;
    for (int d = 0; d < 3; ++d) {
      std::string doc;
      for (int w = 0; w < 12; ++w) {
        const auto len = rng.range(1, 6);
        for (int c = 0; c < len; ++c) {
          const auto k = rng.below(5);
          doc += k == 4 && rng.bernoulli(0.3) ? std::string("é") : std::string(1, letters[k]);
        }
        doc += rng.bernoulli(0.1) ? ", " : " ";
      }
      corpus.push_back(doc);
    }
    const std::size_t target = 20 + rng.below(30);
    const std::int64_t min_freq = 1 + static_cast<std::int64_t>(rng.below(3));
    auto result = train_vocabulary(corpus, target, static_cast<std::size_t>(min_freq));
    EXPECT_EQ(result.vocab.tokens(), brute_force_vocab(corpus, target, min_freq)) << "trial " << trial;
  }
}

TEST(TrainVocabulary, SingleCharacterCorpus) {
  std::vector<std::string> corpus{"x"};
  auto result = train_vocabulary(corpus, 6);
  std::vector<std::string> expected = kSpecials;
  expected.push_back("x");
  EXPECT_EQ(result.vocab.tokens(), expected);
  EXPECT_TRUE(result.reached_target);
}

TEST(TrainVocabulary, TargetBelowAlphabetRejected) {
  std::vector<std::string> corpus{"abc"};
  EXPECT_THROW(train_vocabulary(corpus, 6), InvalidArgument);
  EXPECT_THROW(train_vocabulary(corpus, 100, 0), InvalidArgument);
  std::vector<std::string> empty{"   "};
  EXPECT_THROW(train_vocabulary(empty, 100), InvalidArgument);
}

TEST(TrainVocabulary, ByteIdenticalAcrossRuns) {
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back("Protein kinase " + std::to_string(i * 37) + " binds receptor-like EGFR.");
  auto a = train_vocabulary(corpus, 150);
  auto b = train_vocabulary(corpus, 150);
  EXPECT_EQ(a.vocab.serialize(), b.vocab.serialize());
}

TEST(Tokenize, EmptyInput) {
  EXPECT_TRUE(tokenize("", vocab_with({"a"})).empty());
  EXPECT_EQ(detokenize(std::span<const TokenSpan>{}, vocab_with({"a"})), "");
}

TEST(Tokenize, LongestMatchFirst) {
  auto v = vocab_with({"un", "##aff", "##able", "u", "##n", "##a", "##f", "##b", "##l", "##e"});
  auto spans = tokenize("unaffable", v);
  EXPECT_EQ(token_strings(spans, v), (std::vector<std::string>{"un", "##aff", "##able"}));
  for (const auto& s : spans) EXPECT_EQ(s.word_index, 0u);
  EXPECT_EQ(spans[0].byte_begin, 0u);
  EXPECT_EQ(spans[1].byte_begin, 2u);
  EXPECT_EQ(spans[2].byte_end, 9u);
  EXPECT_EQ(detokenize(spans, v), "unaffable");
}

TEST(Tokenize, UnmatchableWordBecomesSingleUnk) {
  auto v = vocab_with({"blocker", "-"});
  auto spans = tokenize("β-blocker", v);
  EXPECT_EQ(token_strings(spans, v), (std::vector<std::string>{"[UNK]", "-", "blocker"}));
  EXPECT_EQ(spans[0].byte_end, 2u);  // β is two bytes
  std::vector<TokenSpan> unk{{v.unk_id(), 0, 0, 2}};
  EXPECT_EQ(detokenize(unk, v), "[UNK]");
  auto long_word = std::string(kMaxCharsPerWord + 1, 'a');
  auto w = vocab_with({"a", "##a"});
  EXPECT_EQ(token_strings(tokenize(long_word, w), w), std::vector<std::string>{"[UNK]"});
}

TEST(Tokenize, SpansAreContiguousAndMonotone) {
  std::vector<std::string> corpus{"The β-blocker (propranolol) reduced IL-6 levels by 40%. Hélène agreed."};
  auto v = train_vocabulary(corpus, 60, 1).vocab;
  auto spans = tokenize(corpus[0], v);
  for (std::size_t i = 1; i < spans.size(); ++i) {
    EXPECT_LE(spans[i - 1].byte_end, spans[i].byte_begin);
    EXPECT_GE(spans[i].word_index, spans[i - 1].word_index);
    const auto& tok = v.token(spans[i].token_id);
    EXPECT_EQ(tok.starts_with("##"), spans[i].word_index == spans[i - 1].word_index) << tok;
  }
}

TEST(Tokenize, RoundTripOnUnkFreeText) {
  std::vector<std::string> corpus{"Kinase-3 inhibitors (e.g. imatinib) block BCR-ABL; see Fig. 2.",
                                  "Naïve T cells express CD45RA and CCR7."};
  auto v = train_vocabulary(corpus, 80, 1).vocab;
  for (const auto& s : corpus) {
    auto spans = tokenize(s, v);
    for (const auto& t : spans) ASSERT_NE(t.token_id, v.unk_id());
    EXPECT_EQ(detokenize(spans, v), text::normalize_whitespace(s));
    std::vector<std::int32_t> ids;
    for (const auto& t : spans) ids.push_back(t.token_id);
    const auto words = detokenize_ids(ids, v);
    EXPECT_EQ(tokenize(words, v).size(), spans.size());
  }
}

}  // namespace
}  // namespace forge
