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

#include <sstream>

#include "cli.hpp"
#include "forge/manifest.hpp"
#include "forge/task_data.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run forge_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, NoArgumentsPrintsUsage) {
  auto r = forge_cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train-vocab"), std::string::npos);
  EXPECT_NE(r.err.find("param-count"), std::string::npos);
}

TEST(Cli, UnknownSubcommandAndFlag) {
  auto r = forge_cli({"frobnicate"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  auto f = forge_cli({"param-count", "--bogus"});
  EXPECT_NE(f.code, 0);
  EXPECT_NE(f.err.find("--bogus"), std::string::npos);
}

TEST(Cli, HelpDocumentsFormats) {
  auto r = forge_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("JSON"), std::string::npos);
  EXPECT_NE(r.out.find("CSV"), std::string::npos);
  EXPECT_NE(r.out.find("FORGE_THREADS"), std::string::npos);
}

TEST(Cli, ParamCountPresets) {
  auto r = forge_cli({"param-count", "--preset", "bioformer-8L"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("42260480"), std::string::npos);
  EXPECT_NE(r.out.find("≈43M"), std::string::npos);
  EXPECT_NE(forge_cli({"param-count", "--preset", "bioformer-16L"}).out.find("≈42M"), std::string::npos);
  EXPECT_NE(forge_cli({"param-count", "--preset", "bert-base"}).out.find("≈110M"), std::string::npos);
  auto bad = forge_cli({"param-count", "--preset", "gpt"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(std::count(bad.err.begin(), bad.err.end(), '\n'), 1);
}

TEST(Cli, PretrainMissingVocabNamesFlag) {
  testing::TempDir dir("cli");
  testing::write_file(dir / "run.json", "{}");
  testing::write_file(dir / "corpus.txt", "A b.\n");
  auto r = forge_cli({"pretrain", "--config", (dir / "run.json").string(), "--corpus", (dir / "corpus.txt").string(),
                      "--out", (dir / "out").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("--vocab"), std::string::npos);
}

TEST(Cli, PipelineWritesManifests) {
  testing::TempDir dir("cli");
  auto ner = make_toy_ner(40, 1);
  testing::write_file(dir / "corpus.txt", toy_corpus_text(ner, 4));
  save_task_dataset(make_toy_ner(24, 2), dir / "train.conll");
  save_task_dataset(make_toy_ner(8, 3), dir / "test.conll");
  testing::write_file(dir / "run.json",
                      R"({"model":{"layers":1,"hidden":16,"heads":2,"intermediate":32,"max_positions":64},)"
                      R"("steps":4,"batch_size":4,"max_seq_len":48,"lr":0.001,"dup_factor":2,"record_throughput":false})");
  testing::write_file(dir / "protocol.json", R"({"batch_sizes":[8],"learning_rates":[0.001],"max_epochs":1,"seeds":[1]})");
  const auto p = [&](const std::string& name) { return (dir / name).string(); };

  auto v = forge_cli({"train-vocab", "--corpus", p("corpus.txt"), "--size", "150", "--out", p("vocab.txt")});
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "vocab.txt.manifest.json"));
  auto manifest = read_manifest(dir / "vocab.txt.manifest.json");
  EXPECT_EQ(manifest.command, "train-vocab");
  EXPECT_TRUE(verify_inputs(manifest).empty());

  auto b = forge_cli({"build-corpus", "--corpus", p("corpus.txt"), "--vocab", p("vocab.txt"), "--out", p("set.bin"),
                      "--max-seq-len", "48", "--dup-factor", "2"});
  ASSERT_EQ(b.code, 0) << b.err;

  auto pt = forge_cli({"pretrain", "--config", p("run.json"), "--corpus", p("set.bin"), "--vocab", p("vocab.txt"),
                       "--out", p("pt"), "--seed", "3"});
  ASSERT_EQ(pt.code, 0) << pt.err;
  EXPECT_EQ(read_manifest(dir / "pt" / "manifest.json").seed, 3u);

  auto ft = forge_cli({"finetune", "--task", "ner", "--train", p("train.conll"), "--test", p("test.conll"),
                       "--checkpoint", p("pt/final.ckpt"), "--vocab", p("vocab.txt"), "--protocol",
                       p("protocol.json"), "--out", p("ft")});
  ASSERT_EQ(ft.code, 0) << ft.err;
  for (const char* f : {"report.json", "metrics.csv", "predictions.conll", "model.ckpt", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "ft" / f)) << f;
  }

  auto ev = forge_cli({"evaluate", "--task", "ner", "--gold", p("test.conll"), "--pred", p("ft/predictions.conll"),
                       "--out", p("eval.json")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  auto report = nlohmann::json::parse(testing::read_file(dir / "eval.json"));
  EXPECT_TRUE(report.contains("entity_f1"));
}

}  // namespace
}  // namespace forge
