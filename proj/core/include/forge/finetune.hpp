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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/checkpoint.hpp"
#include "forge/heads.hpp"
#include "forge/metrics.hpp"
#include "forge/optim.hpp"
#include "forge/task_data.hpp"

namespace forge {

/// Grid of batch sizes and learning rates, epoch cap and evaluation seeds.
struct TuneProtocol {
  std::vector<std::size_t> batch_sizes{8, 16, 32};
  std::vector<float> learning_rates{1e-5f, 3e-5f, 5e-5f};
  std::size_t max_epochs = 20;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  /// Empty selects the task default (entity_f1, micro_f1, micro_f1, qa_mean).
  std::string selection_metric;
  /// Share of train held out as dev when no dev split is given.
  double holdout_fraction = 0.1;
  double warmup_fraction = 0.1;
  float weight_decay = 0.01f;
  /// 0 selects default_max_seq_len(task).
  std::size_t max_seq_len = 0;
  std::size_t doc_stride = kDefaultDocStride;

  static TuneProtocol standard();
  /// Throws InvalidArgument for an empty grid, zero epochs or repeated seeds.
  void validate() const;
};

void to_json(nlohmann::json& j, const TuneProtocol& p);
void from_json(const nlohmann::json& j, TuneProtocol& p);
/// "default" or a path to a JSON protocol file.
TuneProtocol load_protocol(std::string_view name_or_path);

enum class Split { kDev, kTest };

/// One trainable task. run_protocol drives it through the grid and seeds.
class FineTuneJob {
 public:
  virtual ~FineTuneJob() = default;
  /// Fresh model and optimizer for a run of at most max_epochs epochs.
  virtual void begin(std::uint64_t seed, std::size_t batch_size, float lr, std::size_t max_epochs) = 0;
  /// One pass over the training split; returns the mean training loss.
  /// Throws DivergenceError on a non-finite loss.
  virtual double train_epoch(std::size_t epoch) = 0;
  virtual double score(Split split) = 0;
  virtual std::vector<Tensor> snapshot() const = 0;
  virtual void restore(std::span<const Tensor> state) = 0;
};

struct EpochLog {
  std::string phase;  // "grid" or "seed"
  std::size_t batch_size = 0;
  float lr = 0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_loss = 0;
  double dev_score = 0;
};

struct CellResult {
  std::size_t batch_size = 0;
  float lr = 0;
  bool failed = false;
  std::string error;
  double dev_score = 0;
  std::size_t best_epoch = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  double dev_score = 0;
  std::size_t best_epoch = 0;
  double test_score = 0;
};

struct ProtocolReport {
  std::vector<CellResult> grid;
  std::size_t best_cell = 0;
  std::vector<SeedRun> seeds;
  double mean_test = 0;
  std::vector<std::string> warnings;
};

void to_json(nlohmann::json& j, const ProtocolReport& r);

struct DevSelection {
  double dev_score = 0;
  std::size_t best_epoch = 0;  // 1-based
  std::vector<Tensor> best_state;
};

/// Trains for max_epochs and keeps the state of the first epoch reaching the
/// best dev score. The job is left at that state.
DevSelection train_with_dev_selection(FineTuneJob& job, std::uint64_t seed, std::size_t batch_size, float lr,
                                      std::size_t max_epochs, const std::function<void(const EpochLog&)>& on_epoch = {},
                                      const std::string& phase = "seed");

/// Grid over (batch, lr) with the first seed; the best dev cell is then
/// retrained with every seed and scored on test. Diverging cells are marked
/// failed and skipped. Throws DivergenceError when every cell fails.
/// `on_seed` runs after each seed's test scoring, with the job still holding
/// that seed's selected state.
ProtocolReport run_protocol(FineTuneJob& job, const TuneProtocol& protocol,
                            const std::function<void(const EpochLog&)>& on_epoch = {},
                            const std::function<void(const SeedRun&)>& on_seed = {});

struct TaskSplits {
  TaskDataset train;
  TaskDataset dev;
  TaskDataset test;
};

/// Moves a seeded holdout of train (ceil(fraction * n), at least 1) into dev.
void synthesize_dev_split(TaskSplits& splits, double fraction, std::uint64_t seed);

/// Scores predictions against gold in the task's own metrics. NER needs
/// aligned sentences; RE, DC and QA records are matched by id. RE/DC label
/// space defaults to the labels seen in gold and predictions.
nlohmann::json evaluate_predictions(const TaskDataset& gold, const TaskDataset& predicted,
                                    std::vector<std::string> label_space = {});

/// Encoder plus the task's head, trained on preprocessed features.
class TaskJob : public FineTuneJob {
 public:
  /// `pretrained` initializes the encoder; `stage` (optional) then overrides
  /// encoder and any matching head tensors.
  TaskJob(TaskSplits splits, const Vocabulary& vocab, const ModelConfig& config, std::optional<Checkpoint> pretrained,
          std::optional<Checkpoint> stage, const TuneProtocol& protocol);
  ~TaskJob() override;

  void begin(std::uint64_t seed, std::size_t batch_size, float lr, std::size_t max_epochs) override;
  double train_epoch(std::size_t epoch) override;
  double score(Split split) override;
  std::vector<Tensor> snapshot() const override;
  void restore(std::span<const Tensor> state) override;

  TaskKind kind() const noexcept { return splits_.train.kind; }
  const std::vector<std::string>& label_space() const noexcept { return labels_; }
  const std::string& selection_metric() const noexcept { return metric_; }
  /// Named parameters of the current model (encoder, then head).
  std::vector<Parameter> parameters() const;
  /// Every metric of the task on a split.
  nlohmann::json metrics(Split split);
  /// The split with predicted tags, labels or ranked answers in place of gold.
  TaskDataset predictions(Split split);
  /// Encoder and head tensors for staging or later evaluation.
  Checkpoint to_checkpoint() const;

 private:
  struct Model;
  struct Prepared;

  const Prepared& prepared(Split split) const;
  std::vector<std::vector<float>> infer(Split split, std::vector<std::vector<float>>* second = nullptr) const;

  TaskSplits splits_;
  const Vocabulary* vocab_;
  ModelConfig config_;
  std::optional<Checkpoint> pretrained_;
  std::optional<Checkpoint> stage_;
  TuneProtocol protocol_;
  std::vector<std::string> labels_;
  std::string metric_;
  std::size_t max_seq_len_ = 0;
  std::unique_ptr<Prepared> train_, dev_, test_;
  std::unique_ptr<Model> model_;
  std::uint64_t seed_ = 0;
  std::size_t batch_size_ = 0;
  std::int64_t step_ = 0;
};

struct FineTuneResult {
  ProtocolReport report;
  nlohmann::json test_metrics;  // of the first seed's selected model
  TaskDataset test_predictions;
};

/// Runs the protocol on in-memory splits (synthesizing dev when empty) and
/// returns the report plus test metrics and predictions of the first seed,
/// whose selected model is copied into `best_model` when given.
FineTuneResult finetune_task(TaskSplits splits, const Vocabulary& vocab, const ModelConfig& config,
                             std::optional<Checkpoint> pretrained, const TuneProtocol& protocol,
                             std::optional<Checkpoint> stage = std::nullopt,
                             const std::function<void(const EpochLog&)>& on_epoch = {},
                             Checkpoint* best_model = nullptr);

}  // namespace forge
