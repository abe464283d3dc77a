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

#include "forge/bench.hpp"
#include "forge/error.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

// L * (4SH^2 + 2SHI + 2S^2H) + HK, written out term by term.
std::uint64_t macs_oracle(std::uint64_t L, std::uint64_t H, std::uint64_t I, std::uint64_t S, std::uint64_t K) {
  const std::uint64_t projections = 4 * S * H * H;
  const std::uint64_t ffn = 2 * S * H * I;
  const std::uint64_t attention = 2 * S * S * H;
  return L * (projections + ffn + attention) + H * K;
}

TEST(EstimateMacs, UnitConfig) {
  ModelConfig c;
  c.layers = 1;
  c.hidden = 1;
  c.heads = 1;
  c.intermediate = 4;
  EXPECT_EQ(estimate_macs(c, 1, 0), 14u);
  EXPECT_EQ(estimate_macs(c, 1, 2), 16u);
}

TEST(EstimateMacs, PresetRatios) {
  const auto base = estimate_macs(bert_base_config(), 512);
  const auto l8 = estimate_macs(bioformer_8l_config(), 512);
  const auto l16 = estimate_macs(bioformer_16l_config(), 512);
  EXPECT_EQ(base, macs_oracle(12, 768, 3072, 512, 2));
  EXPECT_EQ(l8, macs_oracle(8, 512, 2048, 512, 2));
  EXPECT_NEAR(static_cast<double>(base) / l8, 3.2, 0.05);
  EXPECT_NEAR(static_cast<double>(base) / l16, 2.7, 0.05);
}

TEST(Bench, PhaseNames) {
  EXPECT_EQ(parse_bench_phase("inference"), BenchPhase::kInference);
  EXPECT_EQ(parse_bench_phase("train"), BenchPhase::kTrain);
  EXPECT_EQ(bench_phase_name(BenchPhase::kTrain), "train");
  EXPECT_THROW(parse_bench_phase("serve"), InvalidArgument);
}

TEST(Bench, SelfComparisonAndCsv) {
  ModelConfig c = make_config(1, 32, 2, 200, 64);
  std::vector<NamedConfig> configs{{"a", c}, {"base", c}};
  SpeedBenchOptions opt;
  opt.seq_len = 32;
  opt.repetitions = 5;
  opt.batches = {2};
  opt.base = "base";
  auto results = run_speed_bench(configs, opt);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_NEAR(results[0].speedup_vs_base, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(results[1].speedup_vs_base, 1.0);
  EXPECT_EQ(results[0].rep_seconds.size(), 5u);
  std::ostringstream csv;
  write_bench_csv(csv, results);
  EXPECT_TRUE(csv.str().starts_with(std::string(kBenchCsvHeader) + "\n"));
  opt.repetitions = 2;
  EXPECT_THROW(run_speed_bench(configs, opt), InvalidArgument);
}

TEST(Bench, TrainingPhaseRuns) {
  ModelConfig c = make_config(1, 16, 2, 100, 32);
  auto r = measure_speed({"t", c}, BenchPhase::kTrain, 16, 2, 3, 1, 0);
  EXPECT_GT(r.examples_per_sec, 0.0);
  EXPECT_EQ(r.batch, 2u);
}

TEST(Sweep, HeadRule) {
  EXPECT_EQ(sweep_heads(768), 48u);
  EXPECT_EQ(sweep_heads(64), 4u);
  EXPECT_EQ(sweep_heads(45), 3u);
  EXPECT_EQ(sweep_heads(7), 1u);
}

TEST(Sweep, IsoParameterCellsArePaired) {
  testing::TempDir dir("sweep");
  SweepOptions opt;
  opt.cells = {{2, 64}, {4, 45}};
  opt.vocab_size = 120;
  opt.toy_examples = 40;
  opt.pretrain_steps = 2;
  opt.max_seq_len = 48;
  opt.protocol.batch_sizes = {8};
  opt.protocol.learning_rates = {1e-3f};
  opt.protocol.max_epochs = 1;
  opt.protocol.seeds = {1};
  auto report = sweep_depth_width(opt, dir / "a");
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& r : report.rows) EXPECT_FALSE(r.failed) << r.error;
  const double ratio = static_cast<double>(report.rows[1].params) / static_cast<double>(report.rows[0].params);
  EXPECT_NEAR(ratio, 1.0, 0.1);
  ASSERT_EQ(report.iso_pairs.size(), 1u);
  EXPECT_EQ(report.iso_pairs[0].deep, 1u);
  std::ostringstream first, second;
  write_sweep_csv(first, report);
  write_sweep_csv(second, sweep_depth_width(opt, dir / "b"));
  EXPECT_EQ(first.str(), second.str());

  opt.cells = {{1, 32}};
  EXPECT_EQ(sweep_depth_width(opt, dir / "c").rows.size(), 1u);
}

TEST(Sweep, GridAndBudget) {
  testing::TempDir dir("sweep");
  SweepOptions opt;
  opt.depths = {1, 2};
  opt.widths = {16, 32};
  opt.budget = 40000;
  opt.toy_examples = 30;
  opt.pretrain_steps = 1;
  opt.max_seq_len = 48;
  opt.protocol.batch_sizes = {8};
  opt.protocol.learning_rates = {1e-3f};
  opt.protocol.max_epochs = 1;
  opt.protocol.seeds = {1};
  auto report = sweep_depth_width(opt, dir.path());
  for (const auto& r : report.rows) EXPECT_LE(r.params, 40000u);
  EXPECT_EQ(report.rows.size(), 4u);
  opt.budget = 30000;
  EXPECT_THROW(sweep_depth_width(opt, dir.path()), InvalidArgument);
}

}  // namespace
}  // namespace forge
