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
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/checkpoint.hpp"
#include "forge/corpus.hpp"
#include "forge/heads.hpp"
#include "forge/optim.hpp"

namespace forge {

struct PretrainRunConfig {
  ModelConfig model;
  std::int64_t steps = 1000;
  std::size_t batch_size = 8;
  std::size_t max_seq_len = 128;
  float lr = 1e-4f;
  /// Unset selects 1% of steps (at least 1).
  std::optional<std::int64_t> warmup_steps;
  std::uint64_t seed = 0;
  /// 0 writes only the final checkpoint.
  std::int64_t checkpoint_every = 0;
  std::size_t dup_factor = 20;
  double masking_rate = 0.15;
  std::size_t max_predictions = 0;
  double short_seq_prob = 0.1;
  float weight_decay = 0.01f;
  /// When false the inst_per_sec column is written as 0 so logs are bit-identical.
  bool record_throughput = true;

  std::int64_t resolved_warmup() const;
  /// Throws InvalidArgument for steps < 1, warmup > steps, batch 0 and the like.
  void validate() const;
  PretrainSetOptions set_options() const;

  /// Full-scale recipe: 2M steps, batch 256, length 512, Bioformer8L shape.
  /// Kept for reference; not runnable at desk scale.
  static PretrainRunConfig full_scale();
};

void to_json(nlohmann::json& j, const PretrainRunConfig& c);
void from_json(const nlohmann::json& j, PretrainRunConfig& c);

/// Encoder with MLM and NSP heads sharing one parameter list.
class PretrainModel {
 public:
  PretrainModel(const ModelConfig& config, std::uint64_t seed);

  EncoderModel encoder;
  MlmHead mlm;
  NspHead nsp;

  /// encoder, then mlm, then nsp parameters.
  std::vector<Parameter> parameters() const;
};

/// Padded encoder input plus the flattened targets of a batch.
struct PretrainBatch {
  EncoderBatch input;
  std::vector<std::size_t> mlm_rows;  // b * seq_len + position
  std::vector<std::int32_t> mlm_labels;
  std::vector<std::int32_t> nsp_labels;
};

PretrainBatch prepare_pretrain_batch(std::span<const PretrainInstance* const> batch, const Vocabulary& vocab);

struct PretrainLosses {
  Variable mlm;
  Variable nsp;
  Variable mlm_logits;  // [masked, V]
  Variable nsp_logits;  // [batch, 2]
};

/// Forward pass and both losses for a prepared batch.
PretrainLosses pretrain_losses(const PretrainModel& model, const PretrainBatch& batch, bool training,
                               Rng* dropout_rng);

struct StepResult {
  float mlm_loss = 0;
  float nsp_loss = 0;
};

/// One optimizer update on mean MLM cross-entropy plus NSP cross-entropy.
/// Throws DivergenceError on a non-finite loss, InvalidArgument on an empty
/// batch or an instance longer than max_seq_len.
StepResult pretrain_step(PretrainModel& model, const PretrainBatch& batch, AdamW& optimizer, float lr,
                         std::size_t max_seq_len, Rng& dropout_rng);

struct PretrainEval {
  double mlm_loss = 0;
  double nsp_loss = 0;
  double masked_accuracy = 0;
  double nsp_accuracy = 0;
  std::size_t masked_tokens = 0;
};

/// Eval-mode losses and top-1 accuracies over `instances`.
PretrainEval evaluate_pretraining(const PretrainModel& model, std::span<const PretrainInstance> instances,
                                  const Vocabulary& vocab, std::size_t batch_size = 32);

struct PretrainRunOptions {
  /// Checkpoint to resume from (written by an earlier run of the same config).
  std::optional<std::filesystem::path> resume_from;
  /// Stop (with a checkpoint) after this many steps, as if interrupted.
  std::optional<std::int64_t> stop_after;
};

struct PretrainRunResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
  std::int64_t steps_done = 0;
  StepResult last;
};

inline constexpr const char* kMetricsHeader = "step,mlm_loss,nsp_loss,lr,inst_per_sec";

/// Trains on `instances` and writes metrics.csv, checkpoint-<step>.ckpt every
/// checkpoint_every steps and final.ckpt (or checkpoint-<k>.ckpt when stopped
/// early) into out_dir.
PretrainRunResult run_pretraining(const PretrainRunConfig& config, std::span<const PretrainInstance> instances,
                                  const Vocabulary& vocab, const std::filesystem::path& out_dir,
                                  const PretrainRunOptions& options = {});

/// Loads the corpus (raw text, or a pretraining set when `<corpus>.json`
/// exists) and the vocabulary, then runs as above.
PretrainRunResult run_pretraining(const PretrainRunConfig& config, const std::filesystem::path& corpus_path,
                                  const std::filesystem::path& vocab_path, const std::filesystem::path& out_dir,
                                  const PretrainRunOptions& options = {});

/// Loads encoder and head weights from a pretraining checkpoint.
void load_pretrained(PretrainModel& model, const Checkpoint& ckpt);

}  // namespace forge
