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

#include "forge/error.hpp"
#include "forge/ops.hpp"
#include "forge/task_data.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

Vocabulary make_vocab(std::vector<std::string> extra) {
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return Vocabulary(tokens);
}

TaskDataset ner_dataset(std::vector<NerSentence> sentences) {
  TaskDataset d;
  d.kind = TaskKind::kNer;
  d.ner = std::move(sentences);
  return d;
}

TEST(TaskKind, ParsesNames) {
  EXPECT_EQ(parse_task_kind("NER"), TaskKind::kNer);
  EXPECT_EQ(parse_task_kind("qa"), TaskKind::kQa);
  EXPECT_EQ(task_kind_name(TaskKind::kDc), "dc");
  EXPECT_THROW(parse_task_kind("pos"), InvalidArgument);
  EXPECT_EQ(default_max_seq_len(TaskKind::kDc), 512u);
  EXPECT_EQ(default_max_seq_len(TaskKind::kQa), 384u);
}

TEST(Conll, ParseFormatRoundTrip) {
  const std::string text = "EGFR\tB-GENE\nmutation\tO\n\nlung\tB-DISEASE\ncancer\tI-DISEASE\n";
  auto d = parse_conll(text);
  ASSERT_EQ(d.ner.size(), 2u);
  EXPECT_EQ(d.ner[1].tags, (std::vector<std::string>{"B-DISEASE", "I-DISEASE"}));
  EXPECT_EQ(d.ner[1].line, 4u);
  EXPECT_EQ(format_conll(d), text);
  EXPECT_EQ(d.label_space(), (std::vector<std::string>{"O", "B-DISEASE", "B-GENE", "I-DISEASE"}));
}

TEST(Conll, InvalidBioNamesLine) {
  try {
    parse_conll("a\tO\nb\tI-GENE\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_conll("a\tX-GENE\n"), FormatError);
  EXPECT_THROW(parse_conll("a b c\n"), FormatError);
}

TEST(TextTsv, ParseFormatRoundTrip) {
  const std::string text = "d1\tBRCA1 causes cancer\tpositive\t0:5:GENE;13:19:DISEASE\nd2\tno entities\tA,B\n";
  auto d = parse_text_tsv(text, TaskKind::kDc);
  ASSERT_EQ(d.text.size(), 2u);
  EXPECT_EQ(d.text[0].entities.size(), 2u);
  EXPECT_EQ(d.text[1].labels, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(format_text_tsv(d), text);
}

TEST(ReplaceEntities, TagsAndOrder) {
  std::vector<EntityMention> m{{0, 5, "GENE"}, {13, 19, "DISEASE"}};
  EXPECT_EQ(replace_entities("BRCA1 causes cancer", m), "@GENE$ causes @DISEASE$");
  EXPECT_EQ(replace_entities("nothing here", {}), "nothing here");
  std::vector<EntityMention> same{{0, 4, "GENE"}, {9, 13, "GENE"}};
  EXPECT_EQ(replace_entities("EGFR and KRAS", same), "@GENE$ and @GENE$");
  std::vector<EntityMention> overlap{{0, 4, "GENE"}, {2, 6, "GENE"}};
  EXPECT_THROW(replace_entities("EGFR and KRAS", overlap), InvalidArgument);
  std::vector<EntityMention> outside{{0, 40, "GENE"}};
  EXPECT_THROW(replace_entities("EGFR", outside), InvalidArgument);
}

TEST(PreprocessRe, ReplacesAndDropsMentions) {
  auto d = parse_text_tsv("d1\tBRCA1 causes cancer\tpositive\t13:19:DISEASE;0:5:GENE\n", TaskKind::kRe);
  auto p = preprocess_re(d);
  EXPECT_EQ(p.text[0].text, "@GENE$ causes @DISEASE$");
  EXPECT_TRUE(p.text[0].entities.empty());
}

TEST(PreprocessNer, FirstSubwordLabelling) {
  auto vocab = make_vocab({"EG", "##FR", "mutation"});
  auto d = ner_dataset({{{"EGFR", "mutation"}, {"B-GENE", "O"}, 1}});
  std::vector<std::string> labels{"O", "B-GENE"};
  auto f = preprocess_ner(d, vocab, labels, 16);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].input_ids, (std::vector<std::int32_t>{2, 5, 6, 7, 3}));
  EXPECT_EQ(f[0].labels, (std::vector<std::int32_t>{ops::kIgnoreIndex, 1, ops::kIgnoreIndex, 0, ops::kIgnoreIndex}));
  EXPECT_EQ(f[0].word_starts, (std::vector<std::size_t>{1, 3}));
}

TEST(PreprocessNer, EmptySentenceSkippedAllOKept) {
  auto vocab = make_vocab({"a", "b"});
  auto d = ner_dataset({{{}, {}, 1}, {{"a", "b"}, {"O", "O"}, 3}});
  std::vector<std::string> labels{"O"};
  std::vector<std::string> warnings;
  auto f = preprocess_ner(d, vocab, labels, 16, &warnings);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].example, 1u);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(f[0].labels, (std::vector<std::int32_t>{ops::kIgnoreIndex, 0, 0, ops::kIgnoreIndex}));
}

TEST(PreprocessNer, LongSentencesChunkAtWordBoundaries) {
  auto vocab = make_vocab({"EG", "##FR", "x"});
  NerSentence s;
  for (int i = 0; i < 7; ++i) {
    s.words.push_back(i % 2 ? "x" : "EGFR");
    s.tags.push_back(i % 2 ? "O" : "B-GENE");
  }
  auto d = ner_dataset({s});
  std::vector<std::string> labels{"O", "B-GENE"};
  auto f = preprocess_ner(d, vocab, labels, 6);
  std::size_t words = 0;
  for (const auto& c : f) {
    EXPECT_LE(c.input_ids.size(), 6u);
    words += c.word_starts.size();
  }
  EXPECT_EQ(words, 7u);
  // Decoding logits that favour the gold label restores the tags.
  std::vector<std::vector<float>> logits;
  for (const auto& c : f) {
    std::vector<float> l(c.input_ids.size() * 2, 0.0f);
    for (std::size_t p = 0; p < c.input_ids.size(); ++p) {
      if (c.labels[p] != ops::kIgnoreIndex) l[p * 2 + static_cast<std::size_t>(c.labels[p])] = 1.0f;
    }
    logits.push_back(l);
  }
  EXPECT_EQ(decode_ner(d, f, logits, labels)[0], s.tags);
}

TEST(DecodeNer, OrphanInsideTagsOpenEntities) {
  auto vocab = make_vocab({"a", "b", "c", "d"});
  NerSentence s;
  s.words = {"a", "b", "c", "d"};
  s.tags = {"O", "O", "O", "O"};
  auto d = ner_dataset({s});
  std::vector<std::string> labels{"O", "B-GENE", "I-GENE", "I-DISEASE"};
  auto f = preprocess_ner(d, vocab, labels, 16);
  ASSERT_EQ(f.size(), 1u);
  // Argmax per word: I-GENE, I-GENE, I-DISEASE, O.
  const std::size_t picks[] = {2, 2, 3, 0};
  std::vector<float> l(f[0].input_ids.size() * 4, 0.0f);
  for (std::size_t j = 0; j < 4; ++j) l[f[0].word_starts[j] * 4 + picks[j]] = 1.0f;
  std::vector<std::vector<float>> logits{l};
  const auto tags = decode_ner(d, f, logits, labels)[0];
  EXPECT_EQ(tags, (std::vector<std::string>{"B-GENE", "I-GENE", "B-DISEASE", "O"}));
  EXPECT_NO_THROW(validate_bio(tags, 1));
}

TEST(Squad, ParseFormatRoundTrip) {
  const std::string json = R"({"data":[{"paragraphs":[{"context":"β-catenin binds TCF.","qas":[{"id":"q1","question":"What binds TCF?","answers":[{"text":"β-catenin","answer_start":0}]}]}]}]})";
  auto d = parse_squad(json);
  ASSERT_EQ(d.qa.size(), 1u);
  EXPECT_EQ(d.qa[0].answers[0].text, "β-catenin");
  auto again = parse_squad(format_squad(d));
  EXPECT_EQ(again.qa[0].context, d.qa[0].context);
  EXPECT_EQ(again.qa[0].answers[0].answer_start, 0u);
}

TEST(PreprocessQa, ShortContextSingleFeature) {
  auto vocab = make_vocab({"what", "gene", "?", "BRCA1", "is", "here", "."});
  TaskDataset d;
  d.kind = TaskKind::kQa;
  d.qa.push_back({"q", "what gene ?", "BRCA1 is here .", {{"BRCA1", 0}}});
  auto f = preprocess_qa(d, vocab, 64, 16);
  ASSERT_EQ(f.features.size(), 1u);
  EXPECT_EQ(f.features[0].context_start, 5u);
  EXPECT_EQ(f.features[0].start_position, 5);
  EXPECT_EQ(f.features[0].end_position, 5);
}

TEST(PreprocessQa, AnswerInSecondWindow) {
  auto vocab = make_vocab({"q", "w", "ANSWER"});
  std::string context;
  for (int i = 0; i < 600; ++i) {
    if (i) context += ' ';
    context += i == 500 ? "ANSWER" : "w";
  }
  TaskDataset d;
  d.kind = TaskKind::kQa;
  d.qa.push_back({"q1", "q", context, {{"ANSWER", 1000}}});
  auto f = preprocess_qa(d, vocab, 384, 128);
  ASSERT_EQ(f.features.size(), 2u);
  EXPECT_EQ(f.features[0].start_position, 0);
  EXPECT_EQ(f.features[0].end_position, 0);
  ASSERT_GT(f.features[1].start_position, 0);
  EXPECT_EQ(f.features[1].input_ids[static_cast<std::size_t>(f.features[1].start_position)], 7);
  // The two windows share exactly doc_stride context tokens.
  const auto& a = f.features[0].context_bytes;
  const auto& b = f.features[1].context_bytes;
  std::size_t shared = 0;
  for (const auto& x : b) shared += std::find(a.begin(), a.end(), x) != a.end();
  EXPECT_EQ(shared, 128u);
}

TEST(PreprocessQa, UnlocatableAnswerDropped) {
  auto vocab = make_vocab({"q", "w"});
  TaskDataset d;
  d.kind = TaskKind::kQa;
  d.qa.push_back({"q1", "q", "w w", {{"zzz", 0}}});
  auto f = preprocess_qa(d, vocab, 64, 16);
  EXPECT_TRUE(f.features.empty());
  EXPECT_EQ(f.dropped, 1u);
}

TEST(DecodeQa, BestSpanFirst) {
  auto vocab = make_vocab({"what", "BRCA1", "is", "here"});
  TaskDataset d;
  d.kind = TaskKind::kQa;
  d.qa.push_back({"q", "what", "BRCA1 is here", {{"BRCA1", 0}}});
  auto f = preprocess_qa(d, vocab, 32, 8);
  const auto& feat = f.features[0];
  std::vector<float> s(feat.input_ids.size(), 0.0f), e(feat.input_ids.size(), 0.0f);
  s[feat.context_start + 1] = 5;
  e[feat.context_start + 2] = 5;
  std::vector<std::vector<float>> sl{s}, el{e};
  auto ranked = decode_qa(d, f.features, sl, el);
  ASSERT_FALSE(ranked[0].empty());
  EXPECT_EQ(ranked[0][0], "is here");
  EXPECT_LE(ranked[0].size(), 5u);
}

TEST(ToyData, NerTagsFollowSurfaceForm) {
  auto a = make_toy_ner(50, 3);
  auto b = make_toy_ner(50, 3);
  EXPECT_EQ(format_conll(a), format_conll(b));
  std::map<std::string, std::string> tag_of;
  for (const auto& s : a.ner) {
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      const std::string type = s.tags[i] == "O" ? "O" : s.tags[i].substr(2);
      auto [it, inserted] = tag_of.emplace(s.words[i], type);
      EXPECT_EQ(it->second, type) << s.words[i];
    }
  }
  auto qa = make_toy_qa(10, 1);
  EXPECT_EQ(preprocess_qa(qa, train_vocabulary(std::vector<std::string>{toy_corpus_text(qa, 2)}, 200).vocab, 128, 32).dropped,
            0u);
}

TEST(LoadTaskDataset, FromFiles) {
  testing::TempDir dir("data");
  testing::write_file(dir / "x.conll", "a\tO\n");
  EXPECT_EQ(load_task_dataset(dir / "x.conll", TaskKind::kNer).size(), 1u);
  auto d = make_toy_qa(3, 2);
  save_task_dataset(d, dir / "qa.json");
  EXPECT_EQ(load_task_dataset(dir / "qa.json", TaskKind::kQa).size(), 3u);
  EXPECT_THROW(load_task_dataset(dir / "missing.tsv", TaskKind::kRe), IoError);
}

}  // namespace
}  // namespace forge
