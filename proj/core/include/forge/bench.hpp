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
#include <ostream>
#include <string>
#include <vector>

#include "forge/finetune.hpp"
#include "forge/model_config.hpp"

namespace forge {

/// Per-example multiply-accumulates of the encoder plus a K-way [CLS] classifier:
/// L * (4SH^2 + 2SHI + 2S^2H) + HK. With I = 4H this is L * (12SH^2 + 2S^2H) + HK.
std::uint64_t estimate_macs(const ModelConfig& config, std::size_t seq_len, std::size_t num_labels = 2);

enum class BenchPhase { kInference, kTrain };
std::string_view bench_phase_name(BenchPhase phase);
BenchPhase parse_bench_phase(std::string_view name);

struct BenchResult {
  std::string config;
  BenchPhase phase = BenchPhase::kInference;
  std::size_t seq_len = 0;
  std::size_t batch = 0;
  double examples_per_sec = 0;
  double duration_sec = 0;          // total timed wall clock
  std::vector<double> rep_seconds;  // per timed repetition, warmup excluded
  double cv = 0;                    // stddev / mean of rep_seconds
  bool unstable = false;            // cv > 0.10
  double speedup_vs_base = 0;
  std::size_t threads = 1;
  std::string hardware;
};

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

struct SpeedBenchOptions {
  BenchPhase phase = BenchPhase::kInference;
  std::size_t seq_len = 512;
  std::size_t repetitions = 5;
  std::size_t warmup = 1;
  /// Inference batch sizes. Training uses the largest of these that runs.
  std::vector<std::size_t> batches{1, 8};
  /// Name of the reference entry for speedups.
  std::string base = "bert-base";
  std::uint64_t seed = 0;
};

/// Times one configuration with random weights and random token ids.
/// Inference runs the encoder and a 2-way [CLS] classifier without graph
/// recording; training adds the backward pass and an AdamW update.
BenchResult measure_speed(const NamedConfig& config, BenchPhase phase, std::size_t seq_len, std::size_t batch,
                          std::size_t repetitions, std::size_t warmup, std::uint64_t seed);

/// Runs every config at every batch and fills speedup_vs_base from the base
/// entry with the same phase and batch. Requires at least 3 repetitions.
std::vector<BenchResult> run_speed_bench(const std::vector<NamedConfig>& configs, const SpeedBenchOptions& options);

inline constexpr const char* kBenchCsvHeader = "config,phase,seq_len,batch,examples_per_sec,speedup_vs_base,threads";
void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results);

/// CPU model string from /proc/cpuinfo, or "unknown".
std::string hardware_note();

/// Divisor of `hidden` closest to hidden / 16 (at least 1).
std::size_t sweep_heads(std::size_t hidden);

struct SweepOptions {
  /// Explicit (L, H) cells; when empty, every depth is paired with every width.
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  TaskKind task = TaskKind::kNer;
  /// Largest allowed encoder parameter count; 0 means unbounded.
  std::uint64_t budget = 0;
  std::size_t vocab_size = 120;
  std::size_t toy_examples = 160;
  std::int64_t pretrain_steps = 40;
  std::size_t max_seq_len = 64;
  TuneProtocol protocol;
  std::uint64_t seed = 0;
};

struct SweepRow {
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t heads = 0;
  std::uint64_t params = 0;
  double dev_score = 0;
  bool failed = false;
  std::string error;
};

struct IsoPair {
  std::size_t deep = 0;  // row index of the deeper cell
  std::size_t wide = 0;
  double param_ratio = 0;  // params(deep) / params(wide)
  double score_delta = 0;  // dev(deep) - dev(wide)
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<IsoPair> iso_pairs;  // cells of different depth within 10% in parameters
};

/// Trains a vocabulary and data on a synthetic task, briefly pretrains each
/// cell and fine-tunes it under `protocol`. Cell failures are recorded.
/// Writes per-cell pretraining output under work_dir.
SweepReport sweep_depth_width(const SweepOptions& options, const std::filesystem::path& work_dir);

inline constexpr const char* kSweepCsvHeader = "layers,hidden,heads,params,dev_score,status";
void write_sweep_csv(std::ostream& out, const SweepReport& report);

}  // namespace forge
