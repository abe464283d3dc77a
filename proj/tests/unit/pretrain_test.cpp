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

#include <cmath>

#include "forge/error.hpp"
#include "forge/pretrain.hpp"
#include "forge/task_data.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

struct Toy {
  Vocabulary vocab;
  std::vector<PretrainInstance> instances;
};

const Toy& toy() {
  static const Toy t = [] {
    auto docs = parse_corpus(toy_corpus_text(make_toy_ner(24, 1), 4));
    std::vector<std::string> sentences;
    for (const auto& d : docs) sentences.insert(sentences.end(), d.sentences.begin(), d.sentences.end());
    auto vocab = train_vocabulary(sentences, 120).vocab;
    PretrainSetOptions opt;
    opt.max_seq_len = 48;
    opt.dup_factor = 2;
    auto inst = generate_pretraining_set(docs, vocab, opt);
    return Toy{vocab, inst};
  }();
  return t;
}

PretrainRunConfig tiny_run(const Vocabulary& vocab) {
  PretrainRunConfig c;
  c.model = make_config(1, 16, 2, vocab.size(), 48);
  c.steps = 12;
  c.batch_size = 4;
  c.max_seq_len = 48;
  c.lr = 1e-3f;
  c.seed = 5;
  c.dup_factor = 2;
  c.record_throughput = false;
  return c;
}

TEST(PretrainConfig, ValidatesAndParses) {
  PretrainRunConfig c;
  c.steps = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.steps = 10;
  c.warmup_steps = 11;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.warmup_steps.reset();
  EXPECT_EQ(c.resolved_warmup(), 1);
  auto j = nlohmann::json::parse(R"({"model":"bioformer-8L","steps":2000000,"batch_size":256,"max_seq_len":512})");
  auto parsed = j.get<PretrainRunConfig>();
  EXPECT_EQ(parsed.model, bioformer_8l_config());
  EXPECT_EQ(parsed.resolved_warmup(), 20000);
  EXPECT_THROW((nlohmann::json::parse(R"({"stepz":3})").get<PretrainRunConfig>()), InvalidArgument);
  EXPECT_THROW((nlohmann::json::parse(R"({"model":"huge"})").get<PretrainRunConfig>()), InvalidArgument);
  nlohmann::json round = parsed;
  EXPECT_EQ(round.get<PretrainRunConfig>().steps, parsed.steps);
  EXPECT_EQ(PretrainRunConfig::full_scale().batch_size, 256u);
}

TEST(PretrainBatch, TargetsLineUpWithMaskedPositions) {
  const auto& t = toy();
  std::vector<const PretrainInstance*> batch{&t.instances[0], &t.instances[1]};
  auto b = prepare_pretrain_batch(batch, t.vocab);
  EXPECT_EQ(b.input.batch, 2u);
  EXPECT_EQ(b.mlm_rows.size(), t.instances[0].masked_positions.size() + t.instances[1].masked_positions.size());
  EXPECT_EQ(b.mlm_rows.front(), static_cast<std::size_t>(t.instances[0].masked_positions.front()));
  EXPECT_EQ(b.nsp_labels[0], static_cast<std::int32_t>(t.instances[0].nsp_label));
}

TEST(PretrainLoss, UntrainedLossesNearChance) {
  const auto& t = toy();
  PretrainModel m(tiny_run(t.vocab).model, 1);
  auto eval = evaluate_pretraining(m, t.instances, t.vocab);
  EXPECT_NEAR(eval.mlm_loss / std::log(static_cast<double>(t.vocab.size())), 1.0, 0.1);
  EXPECT_NEAR(eval.nsp_loss, std::log(2.0), 0.1);
}

TEST(PretrainLoss, ArgmaxLabelsBeatUniform) {
  const auto& t = toy();
  PretrainModel m(tiny_run(t.vocab).model, 1);
  std::vector<const PretrainInstance*> ptrs{&t.instances[0], &t.instances[2]};
  auto batch = prepare_pretrain_batch(ptrs, t.vocab);
  auto logits = pretrain_losses(m, batch, false, nullptr).mlm_logits.value();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols(); ++k) {
      if (logits.at(r, k) > logits.at(r, best)) best = k;
    }
    batch.mlm_labels[r] = static_cast<std::int32_t>(best);
  }
  auto loss = pretrain_losses(m, batch, false, nullptr).mlm.value().item();
  EXPECT_LT(loss, std::log(static_cast<double>(t.vocab.size())));
}

TEST(PretrainStep, RejectsOverlongInstances) {
  const auto& t = toy();
  PretrainModel m(tiny_run(t.vocab).model, 1);
  AdamW opt;
  Rng rng(1);
  std::vector<const PretrainInstance*> ptrs{&t.instances[0]};
  auto batch = prepare_pretrain_batch(ptrs, t.vocab);
  EXPECT_THROW(pretrain_step(m, batch, opt, 1e-3f, 4, rng), InvalidArgument);
}

TEST(RunPretraining, SameSeedSameLog) {
  testing::TempDir dir("pt");
  const auto& t = toy();
  auto c = tiny_run(t.vocab);
  run_pretraining(c, t.instances, t.vocab, dir / "a");
  run_pretraining(c, t.instances, t.vocab, dir / "b");
  const auto log = testing::read_file(dir / "a" / "metrics.csv");
  EXPECT_EQ(log, testing::read_file(dir / "b" / "metrics.csv"));
  EXPECT_EQ(testing::read_file(dir / "a" / "final.ckpt"), testing::read_file(dir / "b" / "final.ckpt"));
  EXPECT_TRUE(log.starts_with(std::string(kMetricsHeader) + "\n"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), c.steps + 1);
  c.seed = 6;
  run_pretraining(c, t.instances, t.vocab, dir / "c");
  EXPECT_NE(log, testing::read_file(dir / "c" / "metrics.csv"));
}

TEST(RunPretraining, ResumeMatchesUninterruptedRun) {
  testing::TempDir dir("pt");
  const auto& t = toy();
  auto c = tiny_run(t.vocab);
  c.checkpoint_every = 4;
  run_pretraining(c, t.instances, t.vocab, dir / "full");
  PretrainRunOptions stop;
  stop.stop_after = 5;
  auto partial = run_pretraining(c, t.instances, t.vocab, dir / "resumed", stop);
  EXPECT_EQ(partial.steps_done, 5);
  PretrainRunOptions resume;
  resume.resume_from = partial.final_checkpoint;
  run_pretraining(c, t.instances, t.vocab, dir / "resumed", resume);
  EXPECT_EQ(testing::read_file(dir / "full" / "metrics.csv"), testing::read_file(dir / "resumed" / "metrics.csv"));
  EXPECT_EQ(testing::read_file(dir / "full" / "final.ckpt"), testing::read_file(dir / "resumed" / "final.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "full" / "checkpoint-8.ckpt"));
}

TEST(RunPretraining, LossFallsOnMemorisableCorpus) {
  testing::TempDir dir("pt");
  const auto& t = toy();
  auto c = tiny_run(t.vocab);
  c.steps = 150;
  c.model.dropout = 0.0f;
  auto result = run_pretraining(c, t.instances, t.vocab, dir.path());
  std::ifstream in(result.metrics_log);
  std::string line;
  std::getline(in, line);
  std::vector<double> mlm;
  while (std::getline(in, line)) mlm.push_back(std::stod(line.substr(line.find(',') + 1)));
  ASSERT_EQ(mlm.size(), 150u);
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += mlm[i];
    late += mlm[mlm.size() - 1 - i];
  }
  EXPECT_LT(late, 0.8 * early);
}

TEST(RunPretraining, ReadsRawCorpusAndPretrainingSet) {
  testing::TempDir dir("pt");
  const auto& t = toy();
  t.vocab.save(dir / "vocab.txt");
  testing::write_file(dir / "corpus.txt", toy_corpus_text(make_toy_ner(24, 1), 4));
  auto c = tiny_run(t.vocab);
  c.steps = 3;
  auto raw = run_pretraining(c, dir / "corpus.txt", dir / "vocab.txt", dir / "raw");
  const auto docs = read_corpus(dir / "corpus.txt");
  write_pretraining_set(dir / "set.bin", generate_pretraining_set(docs, t.vocab, c.set_options()), c.set_options(),
                        t.vocab);
  auto packed = run_pretraining(c, dir / "set.bin", dir / "vocab.txt", dir / "packed");
  EXPECT_EQ(testing::read_file(raw.metrics_log), testing::read_file(packed.metrics_log));
}

}  // namespace
}  // namespace forge
