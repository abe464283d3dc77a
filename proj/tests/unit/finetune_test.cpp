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

#include <map>

#include "forge/error.hpp"
#include "forge/finetune.hpp"
#include "forge/pretrain.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

// Deterministic stand-in: the state is the epoch counter, dev and test scores
// are read from tables keyed by epoch.
class ScriptedJob : public FineTuneJob {
 public:
  std::vector<double> dev_by_epoch;
  std::vector<double> test_by_epoch;
  std::map<float, bool> diverging_lr;
  std::size_t epoch = 0;
  std::size_t begins = 0;

  void begin(std::uint64_t, std::size_t, float lr, std::size_t) override {
    epoch = 0;
    ++begins;
    lr_ = lr;
  }
  double train_epoch(std::size_t e) override {
    if (diverging_lr.count(lr_)) throw DivergenceError("loss is NaN");
    epoch = e;
    return 1.0 / static_cast<double>(e);
  }
  double score(Split split) override {
    return (split == Split::kDev ? dev_by_epoch : test_by_epoch).at(epoch - 1) + lr_;
  }
  std::vector<Tensor> snapshot() const override { return {Tensor::scalar(static_cast<float>(epoch))}; }
  void restore(std::span<const Tensor> s) override { epoch = static_cast<std::size_t>(s[0].item()); }

 private:
  float lr_ = 0;
};

TuneProtocol small_protocol() {
  TuneProtocol p;
  p.batch_sizes = {4};
  p.learning_rates = {1e-3f};
  p.max_epochs = 5;
  p.seeds = {1};
  return p;
}

TEST(TuneProtocol, DefaultsAndValidation) {
  auto p = TuneProtocol::standard();
  EXPECT_EQ(p.batch_sizes, (std::vector<std::size_t>{8, 16, 32}));
  EXPECT_EQ(p.learning_rates.size(), 3u);
  EXPECT_EQ(p.max_epochs, 20u);
  EXPECT_EQ(p.seeds.size(), 5u);
  p.seeds = {1, 1};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = TuneProtocol::standard();
  p.max_epochs = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  nlohmann::json j = TuneProtocol::standard();
  EXPECT_EQ(j.get<TuneProtocol>().learning_rates, TuneProtocol::standard().learning_rates);
  EXPECT_EQ(load_protocol("default").seeds, TuneProtocol::standard().seeds);
  EXPECT_THROW((nlohmann::json::parse(R"({"epochs":3})").get<TuneProtocol>()), InvalidArgument);
}

TEST(DevSelection, BestEpochIsEvaluatedOnTest) {
  ScriptedJob job;
  job.dev_by_epoch = {10, 20, 50, 40, 50};
  job.test_by_epoch = {1, 2, 3, 4, 5};
  auto report = run_protocol(job, small_protocol());
  ASSERT_EQ(report.seeds.size(), 1u);
  EXPECT_EQ(report.seeds[0].best_epoch, 3u);
  EXPECT_DOUBLE_EQ(report.seeds[0].test_score, 3.0 + static_cast<double>(1e-3f));
  EXPECT_DOUBLE_EQ(report.mean_test, report.seeds[0].test_score);
}

TEST(RunProtocol, GridPicksBestCellAndSkipsDivergence) {
  ScriptedJob job;
  job.dev_by_epoch = {1, 2};
  job.test_by_epoch = {0, 0};
  job.diverging_lr[0.5f] = true;
  TuneProtocol p = small_protocol();
  p.max_epochs = 2;
  p.batch_sizes = {4, 8};
  p.learning_rates = {0.1f, 0.3f, 0.5f};
  p.seeds = {1, 2, 3};
  std::vector<EpochLog> logs;
  auto report = run_protocol(job, p, [&](const EpochLog& e) { logs.push_back(e); });
  ASSERT_EQ(report.grid.size(), 6u);
  EXPECT_TRUE(report.grid[2].failed);
  EXPECT_TRUE(report.grid[5].failed);
  EXPECT_EQ(report.warnings.size(), 2u);
  EXPECT_EQ(report.best_cell, 1u);  // earliest cell wins the tie with batch 8
  EXPECT_EQ(report.seeds.size(), 3u);
  EXPECT_EQ(job.begins, 6u + 3u);
  EXPECT_EQ(logs.size(), 4u * 2u + 3u * 2u);
  EXPECT_EQ(logs.back().phase, "seed");

  job.diverging_lr[0.1f] = job.diverging_lr[0.3f] = true;
  EXPECT_THROW(run_protocol(job, p), DivergenceError);
}

TEST(SynthesizeDev, HoldsOutTenPercent) {
  TaskSplits s;
  s.train = make_toy_ner(25, 4);
  synthesize_dev_split(s, 0.1, 9);
  EXPECT_EQ(s.dev.size(), 3u);
  EXPECT_EQ(s.train.size(), 22u);
  TaskSplits again;
  again.train = make_toy_ner(25, 4);
  synthesize_dev_split(again, 0.1, 9);
  EXPECT_EQ(format_conll(again.dev), format_conll(s.dev));
}

TEST(EvaluatePredictions, PerTaskMetrics) {
  auto gold = parse_conll("EGFR\tB-GENE\nbinds\tO\n");
  auto pred = parse_conll("EGFR\tB-GENE\nbinds\tO\n");
  EXPECT_DOUBLE_EQ(evaluate_predictions(gold, pred)["entity_f1"].get<double>(), 100.0);

  auto dc_gold = parse_text_tsv("a\tx\tA,B\nb\ty\tB\n", TaskKind::kDc);
  auto dc_pred = parse_text_tsv("b\ty\tB\na\tx\tA\n", TaskKind::kDc);
  auto dc = evaluate_predictions(dc_gold, dc_pred);
  EXPECT_NEAR(dc["micro_f1"].get<double>(), 80.0, 1e-9);  // TP 2, FN 1

  auto missing = parse_text_tsv("a\tx\tA\n", TaskKind::kDc);
  EXPECT_THROW(evaluate_predictions(dc_gold, missing), InvalidArgument);
  EXPECT_THROW(evaluate_predictions(gold, dc_gold), InvalidArgument);
}

struct Pretrained {
  Vocabulary vocab;
  Checkpoint ckpt;
};

const Pretrained& tiny_pretrained() {
  static const Pretrained p = [] {
    testing::TempDir dir("ft");
    auto ner = make_toy_ner(40, 1);
    auto qa = make_toy_qa(20, 1);
    const std::string text = toy_corpus_text(ner, 4) + "\n" + toy_corpus_text(qa, 2);
    auto docs = parse_corpus(text);
    std::vector<std::string> sentences;
    for (const auto& d : docs) sentences.insert(sentences.end(), d.sentences.begin(), d.sentences.end());
    auto vocab = train_vocabulary(sentences, 300).vocab;
    PretrainRunConfig c;
    c.model = make_config(1, 16, 2, vocab.size(), 128);
    c.steps = 5;
    c.batch_size = 4;
    c.max_seq_len = 64;
    c.lr = 1e-3f;
    c.dup_factor = 1;
    PretrainSetOptions opt = c.set_options();
    auto result = run_pretraining(c, generate_pretraining_set(docs, vocab, opt), vocab, dir.path());
    return Pretrained{vocab, load_checkpoint(result.final_checkpoint)};
  }();
  return p;
}

TuneProtocol quick_protocol() {
  TuneProtocol p;
  p.batch_sizes = {8};
  p.learning_rates = {1e-3f};
  p.max_epochs = 2;
  p.seeds = {1, 2};
  p.max_seq_len = 64;
  p.doc_stride = 16;
  return p;
}

TEST(FinetuneTask, RunsEveryTaskKind) {
  const auto& pre = tiny_pretrained();
  TaskSplits ner;
  ner.train = make_toy_ner(30, 2);
  ner.test = make_toy_ner(8, 3);
  TaskSplits qa;
  qa.train = make_toy_qa(16, 2);
  qa.test = make_toy_qa(6, 3);
  TaskSplits re;
  re.train = parse_text_tsv(
      "1\tEGFR binds cancer\tpos\t0:4:GENE;11:17:DISEASE\n2\tKRAS avoids asthma\tneg\t0:4:GENE;12:18:DISEASE\n"
      "3\tTP53 binds asthma\tpos\t0:4:GENE;11:17:DISEASE\n4\tBRCA avoids cancer\tneg\t0:4:GENE;12:18:DISEASE\n",
      TaskKind::kRe);
  re.dev = re.train;
  re.test = re.train;
  TaskSplits dc;
  dc.train = parse_text_tsv("1\tEGFR binds cancer\tA,B\n2\tKRAS avoids asthma\tB\n3\tTP53 binds\tA\n", TaskKind::kDc);
  dc.dev = dc.train;
  dc.test = dc.train;
  for (auto* splits : {&ner, &qa, &re, &dc}) {
    Checkpoint best;
    auto result = finetune_task(*splits, pre.vocab, pre.ckpt.config, pre.ckpt, quick_protocol(), std::nullopt, {}, &best);
    EXPECT_EQ(result.report.seeds.size(), 2u) << task_kind_name(splits->train.kind);
    EXPECT_FALSE(result.test_metrics.empty());
    EXPECT_EQ(result.test_predictions.size(), splits->test.size());
    EXPECT_FALSE(best.tensors.empty());
  }
}

TEST(FinetuneTask, SameSeedsSameScoresAndStaging) {
  const auto& pre = tiny_pretrained();
  TaskSplits s;
  s.train = make_toy_ner(30, 2);
  s.test = make_toy_ner(8, 3);
  Checkpoint best;
  std::vector<double> a, b;
  auto r1 = finetune_task(s, pre.vocab, pre.ckpt.config, pre.ckpt, quick_protocol(), std::nullopt,
                          [&](const EpochLog& e) { a.push_back(e.train_loss); }, &best);
  auto r2 = finetune_task(s, pre.vocab, pre.ckpt.config, pre.ckpt, quick_protocol(), std::nullopt,
                          [&](const EpochLog& e) { b.push_back(e.train_loss); });
  EXPECT_EQ(a, b);
  EXPECT_EQ(r1.report.mean_test, r2.report.mean_test);
  // A fine-tuned checkpoint can initialise a later stage on the same task.
  auto staged = finetune_task(s, pre.vocab, pre.ckpt.config, pre.ckpt, quick_protocol(), best);
  EXPECT_EQ(staged.report.seeds.size(), 2u);
  // Staging from a different-shape checkpoint is rejected.
  Checkpoint wrong = best;
  wrong.config.hidden = 32;
  EXPECT_THROW(finetune_task(s, pre.vocab, pre.ckpt.config, pre.ckpt, quick_protocol(), wrong), ConfigMismatchError);
}

}  // namespace
}  // namespace forge
