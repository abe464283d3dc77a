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

#include "forge/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "forge/error.hpp"
#include "forge/ops.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

constexpr std::uint64_t kHoldoutTag = 0x401d;
constexpr std::uint64_t kOrderTag = 0x0bde;
constexpr std::uint64_t kDropTag = 0xd209;

const std::vector<std::string> kHeadPrefixes{"mlm.", "nsp.", "optim.", "token_classifier.", "sequence_classifier.",
                                             "qa_span."};

std::string default_metric(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNer:
      return "entity_f1";
    case TaskKind::kRe:
    case TaskKind::kDc:
      return "micro_f1";
    case TaskKind::kQa:
      return "qa_mean";
  }
  return "";
}

void check_metric(TaskKind kind, const std::string& metric) {
  static const std::vector<std::string> ner{"entity_f1"};
  static const std::vector<std::string> cls{"micro_f1", "macro_f1"};
  static const std::vector<std::string> qa{"qa_mean", "strict", "lenient", "mrr"};
  const auto& allowed = kind == TaskKind::kNer ? ner : kind == TaskKind::kQa ? qa : cls;
  if (std::find(allowed.begin(), allowed.end(), metric) == allowed.end()) {
    throw InvalidArgument("selection metric \"" + metric + "\" does not apply to " +
                          std::string(task_kind_name(kind)));
  }
}

}  // namespace

TuneProtocol TuneProtocol::standard() { return {}; }

void TuneProtocol::validate() const {
  if (batch_sizes.empty() || learning_rates.empty()) throw InvalidArgument("protocol grid is empty");
  for (auto b : batch_sizes) {
    if (b == 0) throw InvalidArgument("batch sizes must be positive");
  }
  for (auto lr : learning_rates) {
    if (!(lr > 0)) throw InvalidArgument("learning rates must be positive");
  }
  if (max_epochs == 0) throw InvalidArgument("max_epochs must be positive");
  if (seeds.empty()) throw InvalidArgument("protocol needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InvalidArgument("protocol seeds must be distinct");
  }
  if (!(holdout_fraction > 0 && holdout_fraction < 1)) throw InvalidArgument("holdout_fraction must lie in (0, 1)");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw InvalidArgument("warmup_fraction must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const TuneProtocol& p) {
  j = nlohmann::json{{"batch_sizes", p.batch_sizes},   {"learning_rates", p.learning_rates},
                     {"max_epochs", p.max_epochs},     {"seeds", p.seeds},
                     {"selection_metric", p.selection_metric}, {"holdout_fraction", p.holdout_fraction},
                     {"warmup_fraction", p.warmup_fraction},   {"weight_decay", p.weight_decay},
                     {"max_seq_len", p.max_seq_len},   {"doc_stride", p.doc_stride}};
}

void from_json(const nlohmann::json& j, TuneProtocol& p) {
  if (!j.is_object()) throw InvalidArgument("protocol must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "batch_sizes") {
      p.batch_sizes = value.get<std::vector<std::size_t>>();
    } else if (key == "learning_rates") {
      p.learning_rates = value.get<std::vector<float>>();
    } else if (key == "max_epochs") {
      p.max_epochs = value.get<std::size_t>();
    } else if (key == "seeds") {
      p.seeds = value.get<std::vector<std::uint64_t>>();
    } else if (key == "selection_metric") {
      p.selection_metric = value.get<std::string>();
    } else if (key == "holdout_fraction") {
      p.holdout_fraction = value.get<double>();
    } else if (key == "warmup_fraction") {
      p.warmup_fraction = value.get<double>();
    } else if (key == "weight_decay") {
      p.weight_decay = value.get<float>();
    } else if (key == "max_seq_len") {
      p.max_seq_len = value.get<std::size_t>();
    } else if (key == "doc_stride") {
      p.doc_stride = value.get<std::size_t>();
    } else {
      throw InvalidArgument("unknown protocol key \"" + key + "\"");
    }
  }
}

TuneProtocol load_protocol(std::string_view name_or_path) {
  if (name_or_path == "default") return TuneProtocol::standard();
  std::ifstream in{std::string(name_or_path)};
  if (!in) throw IoError("cannot open protocol file " + std::string(name_or_path));
  TuneProtocol p;
  try {
    p = nlohmann::json::parse(in).get<TuneProtocol>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed protocol " + std::string(name_or_path) + ": " + e.what());
  }
  p.validate();
  return p;
}

void to_json(nlohmann::json& j, const ProtocolReport& r) {
  auto grid = nlohmann::json::array();
  for (const auto& c : r.grid) {
    nlohmann::json cell{{"batch_size", c.batch_size}, {"lr", c.lr}, {"failed", c.failed}};
    if (c.failed) {
      cell["error"] = c.error;
    } else {
      cell["dev_score"] = c.dev_score;
      cell["best_epoch"] = c.best_epoch;
    }
    grid.push_back(cell);
  }
  auto seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    seeds.push_back(
        {{"seed", s.seed}, {"dev_score", s.dev_score}, {"best_epoch", s.best_epoch}, {"test_score", s.test_score}});
  }
  j = nlohmann::json{{"grid", grid},           {"best_cell", r.best_cell}, {"seeds", seeds},
                     {"mean_test", r.mean_test}, {"warnings", r.warnings}};
}

DevSelection train_with_dev_selection(FineTuneJob& job, std::uint64_t seed, std::size_t batch_size, float lr,
                                      std::size_t max_epochs, const std::function<void(const EpochLog&)>& on_epoch,
                                      const std::string& phase) {
  job.begin(seed, batch_size, lr, max_epochs);
  DevSelection sel;
  bool have = false;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const double loss = job.train_epoch(epoch);
    const double dev = job.score(Split::kDev);
    if (on_epoch) on_epoch({phase, batch_size, lr, seed, epoch, loss, dev});
    if (!have || dev > sel.dev_score) {
      sel.dev_score = dev;
      sel.best_epoch = epoch;
      sel.best_state = job.snapshot();
      have = true;
    }
  }
  job.restore(sel.best_state);
  return sel;
}

ProtocolReport run_protocol(FineTuneJob& job, const TuneProtocol& protocol,
                            const std::function<void(const EpochLog&)>& on_epoch,
                            const std::function<void(const SeedRun&)>& on_seed) {
  protocol.validate();
  ProtocolReport report;
  std::optional<std::size_t> best;
  for (auto b : protocol.batch_sizes) {
    for (auto lr : protocol.learning_rates) {
      CellResult cell;
      cell.batch_size = b;
      cell.lr = lr;
      try {
        auto sel = train_with_dev_selection(job, protocol.seeds.front(), b, lr, protocol.max_epochs, on_epoch, "grid");
        cell.dev_score = sel.dev_score;
        cell.best_epoch = sel.best_epoch;
      } catch (const DivergenceError& e) {
        cell.failed = true;
        cell.error = e.what();
        report.warnings.push_back("cell batch=" + std::to_string(b) + " lr=" + std::to_string(lr) +
                                  " diverged and was excluded: " + e.what());
      }
      report.grid.push_back(cell);
      if (!cell.failed && (!best || cell.dev_score > report.grid[*best].dev_score)) best = report.grid.size() - 1;
    }
  }
  if (!best) throw DivergenceError("every protocol cell diverged");
  report.best_cell = *best;
  const auto& chosen = report.grid[*best];

  double sum = 0;
  for (auto seed : protocol.seeds) {
    SeedRun run;
    run.seed = seed;
    try {
      auto sel = train_with_dev_selection(job, seed, chosen.batch_size, chosen.lr, protocol.max_epochs, on_epoch);
      run.dev_score = sel.dev_score;
      run.best_epoch = sel.best_epoch;
      run.test_score = job.score(Split::kTest);
    } catch (const DivergenceError& e) {
      report.warnings.push_back("seed " + std::to_string(seed) + " diverged and was excluded: " + e.what());
      continue;
    }
    report.seeds.push_back(run);
    sum += run.test_score;
    if (on_seed) on_seed(run);
  }
  if (report.seeds.empty()) throw DivergenceError("every seed run diverged");
  report.mean_test = sum / static_cast<double>(report.seeds.size());
  return report;
}

void synthesize_dev_split(TaskSplits& splits, double fraction, std::uint64_t seed) {
  const std::size_t n = splits.train.size();
  if (n < 2) throw InvalidArgument("train split too small to hold out a dev set");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kHoldoutTag));
  rng.shuffle(std::span<std::size_t>(idx));
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> dev(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(dev.begin(), dev.end());
  std::sort(train.begin(), train.end());
  splits.dev = splits.train.subset(dev);
  auto rest = splits.train.subset(train);
  splits.train = std::move(rest);
}

nlohmann::json evaluate_predictions(const TaskDataset& gold, const TaskDataset& predicted,
                                    std::vector<std::string> label_space) {
  if (gold.kind != predicted.kind) throw InvalidArgument("gold and predictions are different tasks");
  switch (gold.kind) {
    case TaskKind::kNer: {
      if (gold.ner.size() != predicted.ner.size()) {
        throw InvalidArgument("gold has " + std::to_string(gold.ner.size()) + " sentences, predictions " +
                              std::to_string(predicted.ner.size()));
      }
      std::vector<std::vector<std::string>> g, p;
      for (std::size_t s = 0; s < gold.ner.size(); ++s) {
        if (gold.ner[s].words != predicted.ner[s].words) {
          throw InvalidArgument("sentence " + std::to_string(s) + " differs between gold and predictions");
        }
        g.push_back(gold.ner[s].tags);
        p.push_back(predicted.ner[s].tags);
      }
      const auto prf = entity_f1(g, p);
      return {{"precision", prf.precision}, {"recall", prf.recall}, {"entity_f1", prf.f1}};
    }
    case TaskKind::kRe:
    case TaskKind::kDc: {
      std::map<std::string, const TextExample*> by_id;
      for (const auto& e : predicted.text) by_id[e.id] = &e;
      std::vector<std::vector<std::string>> g, p;
      std::set<std::string> seen;
      for (const auto& e : gold.text) {
        auto it = by_id.find(e.id);
        if (it == by_id.end()) throw InvalidArgument("no prediction for example " + e.id);
        g.push_back(e.labels);
        p.push_back(it->second->labels);
        seen.insert(e.labels.begin(), e.labels.end());
        seen.insert(it->second->labels.begin(), it->second->labels.end());
      }
      if (label_space.empty()) label_space.assign(seen.begin(), seen.end());
      if (label_space.empty()) throw InvalidArgument("no labels to score");
      const bool multi = gold.kind == TaskKind::kDc;
      return {{"micro_f1", micro_macro_f1(g, p, label_space, F1Mode::kMicro, multi)},
              {"macro_f1", micro_macro_f1(g, p, label_space, F1Mode::kMacro, multi)}};
    }
    case TaskKind::kQa: {
      std::map<std::string, const QaExample*> by_id;
      for (const auto& e : predicted.qa) by_id[e.id] = &e;
      std::vector<std::vector<std::string>> g, p;
      for (const auto& e : gold.qa) {
        auto it = by_id.find(e.id);
        if (it == by_id.end()) throw InvalidArgument("no prediction for question " + e.id);
        g.emplace_back();
        for (const auto& a : e.answers) g.back().push_back(a.text);
        p.emplace_back();
        for (const auto& a : it->second->answers) p.back().push_back(a.text);
      }
      const auto s = bioasq_factoid(g, p);
      return {{"strict", s.strict_accuracy}, {"lenient", s.lenient_accuracy}, {"mrr", s.mrr}, {"qa_mean", s.mean()}};
    }
  }
  return {};
}

struct TaskJob::Prepared {
  const TaskDataset* data = nullptr;
  std::vector<NerFeature> ner;
  std::vector<ClassificationFeature> cls;
  QaFeatures qa;

  std::size_t size() const {
    switch (data->kind) {
      case TaskKind::kNer:
        return ner.size();
      case TaskKind::kRe:
      case TaskKind::kDc:
        return cls.size();
      case TaskKind::kQa:
        return qa.features.size();
    }
    return 0;
  }
};

struct TaskJob::Model {
  std::unique_ptr<EncoderModel> encoder;
  std::unique_ptr<TokenClassifierHead> token_head;
  std::unique_ptr<SequenceClassifierHead> seq_head;
  std::unique_ptr<QaSpanHead> qa_head;
  std::unique_ptr<AdamW> optimizer;
  std::unique_ptr<LinearWarmupDecay> schedule;

  const Module& head() const {
    if (token_head) return *token_head;
    if (seq_head) return *seq_head;
    return *qa_head;
  }
};

TaskJob::TaskJob(TaskSplits splits, const Vocabulary& vocab, const ModelConfig& config,
                 std::optional<Checkpoint> pretrained, std::optional<Checkpoint> stage, const TuneProtocol& protocol)
    : splits_(std::move(splits)),
      vocab_(&vocab),
      config_(config),
      pretrained_(std::move(pretrained)),
      stage_(std::move(stage)),
      protocol_(protocol) {
  protocol_.validate();
  const TaskKind k = splits_.train.kind;
  if (splits_.dev.kind != k || splits_.test.kind != k) throw InvalidArgument("splits hold different task kinds");
  if (splits_.train.empty()) throw InvalidArgument("train split is empty");
  if (splits_.dev.empty()) throw InvalidArgument("dev split is empty");
  if (splits_.test.empty()) throw InvalidArgument("test split is empty");
  if (config_.vocab_size != vocab.size()) {
    throw ConfigMismatchError("model vocabulary size " + std::to_string(config_.vocab_size) +
                              " differs from the vocabulary's " + std::to_string(vocab.size()));
  }
  if (pretrained_) require_config(config_, pretrained_->config);
  if (stage_) require_config(config_, stage_->config);
  metric_ = protocol_.selection_metric.empty() ? default_metric(k) : protocol_.selection_metric;
  check_metric(k, metric_);
  max_seq_len_ = protocol_.max_seq_len ? protocol_.max_seq_len : default_max_seq_len(k);
  max_seq_len_ = std::min(max_seq_len_, config_.max_positions);

  if (k == TaskKind::kRe) {
    splits_.train = preprocess_re(splits_.train);
    splits_.dev = preprocess_re(splits_.dev);
    splits_.test = preprocess_re(splits_.test);
  }
  labels_ = splits_.train.label_space();
  if (k != TaskKind::kQa) {
    std::set<std::string> all(labels_.begin(), labels_.end());
    for (const auto* ds : {&splits_.dev, &splits_.test}) {
      for (const auto& l : ds->label_space()) {
        if (!all.count(l)) throw InvalidArgument("label \"" + l + "\" appears outside the training split");
      }
    }
  }

  auto prepare = [&](const TaskDataset& ds) {
    auto p = std::make_unique<Prepared>();
    p->data = &ds;
    switch (k) {
      case TaskKind::kNer:
        p->ner = preprocess_ner(ds, vocab, labels_, max_seq_len_, &splits_.train.warnings);
        break;
      case TaskKind::kRe:
      case TaskKind::kDc:
        p->cls = preprocess_classification(ds, vocab, labels_, max_seq_len_);
        break;
      case TaskKind::kQa:
        p->qa = preprocess_qa(ds, vocab, max_seq_len_, protocol_.doc_stride);
        break;
    }
    return p;
  };
  train_ = prepare(splits_.train);
  dev_ = prepare(splits_.dev);
  test_ = prepare(splits_.test);
  if (train_->size() == 0) throw InvalidArgument("no training features after preprocessing");
}

TaskJob::~TaskJob() = default;

const TaskJob::Prepared& TaskJob::prepared(Split split) const { return split == Split::kDev ? *dev_ : *test_; }

std::vector<Parameter> TaskJob::parameters() const {
  if (!model_) throw InvalidArgument("job has no model; call begin() first");
  std::vector<Parameter> out(model_->encoder->parameters().begin(), model_->encoder->parameters().end());
  const auto head = model_->head().parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

void TaskJob::begin(std::uint64_t seed, std::size_t batch_size, float lr, std::size_t max_epochs) {
  if (batch_size == 0 || max_epochs == 0) throw InvalidArgument("batch size and epochs must be positive");
  seed_ = seed;
  batch_size_ = batch_size;
  step_ = 0;
  model_ = std::make_unique<Model>();
  model_->encoder = std::make_unique<EncoderModel>(config_, derive_seed(seed, 0));
  const std::uint64_t head_seed = derive_seed(seed, 1);
  switch (kind()) {
    case TaskKind::kNer:
      model_->token_head = std::make_unique<TokenClassifierHead>(config_, labels_.size(), head_seed);
      break;
    case TaskKind::kRe:
    case TaskKind::kDc:
      model_->seq_head = std::make_unique<SequenceClassifierHead>(config_, labels_.size(), head_seed);
      break;
    case TaskKind::kQa:
      model_->qa_head = std::make_unique<QaSpanHead>(config_, head_seed);
      break;
  }
  for (const auto* ckpt : {pretrained_ ? &*pretrained_ : nullptr, stage_ ? &*stage_ : nullptr}) {
    if (!ckpt) continue;
    restore_parameters(*ckpt, model_->encoder->parameters(), kHeadPrefixes);
    for (auto& p : const_cast<Module&>(model_->head()).parameters()) {
      if (const Tensor* t = ckpt->find(p.name)) {
        if (t->shape() != p.var.shape()) {
          throw ConfigMismatchError("checkpoint head tensor " + p.name + " has shape " + shape_str(t->shape()));
        }
        p.var.mutable_value() = *t;
      }
    }
  }
  const std::size_t n = train_->size();
  const auto total = static_cast<std::int64_t>(max_epochs * ((n + batch_size - 1) / batch_size));
  const auto warmup = static_cast<std::int64_t>(protocol_.warmup_fraction * static_cast<double>(total));
  model_->optimizer = std::make_unique<AdamW>(AdamWConfig{lr, 0.9f, 0.999f, 1e-6f, protocol_.weight_decay});
  model_->schedule = std::make_unique<LinearWarmupDecay>(lr, warmup, total);
}

namespace {

EncoderBatch pack_ids(std::span<const std::vector<std::int32_t>> ids, std::span<const std::vector<std::int32_t>> segs,
                      std::int32_t pad) {
  if (segs.empty()) {
    std::vector<std::vector<std::int32_t>> zeros;
    for (const auto& v : ids) zeros.emplace_back(v.size(), 0);
    return EncoderBatch::pack(ids, zeros, pad);
  }
  return EncoderBatch::pack(ids, segs, pad);
}

}  // namespace

double TaskJob::train_epoch(std::size_t epoch) {
  if (!model_) throw InvalidArgument("train_epoch before begin()");
  const Prepared& tr = *train_;
  const std::size_t n = tr.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(derive_seed(seed_, kOrderTag, epoch));
  shuffle.shuffle(std::span<std::size_t>(order));
  auto params = parameters();
  double loss_sum = 0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch_size_) {
    const std::size_t end = std::min(n, start + batch_size_);
    const std::size_t B = end - start;
    std::vector<std::vector<std::int32_t>> ids, segs;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t f = order[i];
      switch (kind()) {
        case TaskKind::kNer:
          ids.push_back(tr.ner[f].input_ids);
          break;
        case TaskKind::kRe:
        case TaskKind::kDc:
          ids.push_back(tr.cls[f].input_ids);
          break;
        case TaskKind::kQa:
          ids.push_back(tr.qa.features[f].input_ids);
          segs.push_back(tr.qa.features[f].segment_ids);
          break;
      }
    }
    const EncoderBatch batch = pack_ids(ids, segs, vocab_->pad_id());
    const std::size_t S = batch.seq_len;
    Rng dropout(derive_seed(seed_, kDropTag, static_cast<std::uint64_t>(step_)));
    for (auto& p : params) p.var.zero_grad();
    auto enc = model_->encoder->forward(batch, true, &dropout);
    Variable loss;
    switch (kind()) {
      case TaskKind::kNer: {
        std::vector<std::int32_t> targets(B * S, ops::kIgnoreIndex);
        for (std::size_t b = 0; b < B; ++b) {
          const auto& lab = tr.ner[order[start + b]].labels;
          std::copy(lab.begin(), lab.end(), targets.begin() + static_cast<std::ptrdiff_t>(b * S));
        }
        loss = ops::cross_entropy(model_->token_head->logits(enc.sequence, true, &dropout), targets);
        break;
      }
      case TaskKind::kRe: {
        std::vector<std::int32_t> targets;
        for (std::size_t b = 0; b < B; ++b) targets.push_back(tr.cls[order[start + b]].labels.front());
        loss = ops::cross_entropy(model_->seq_head->logits(enc.cls, true, &dropout), targets);
        break;
      }
      case TaskKind::kDc: {
        Tensor targets({B, labels_.size()});
        for (std::size_t b = 0; b < B; ++b) {
          for (auto l : tr.cls[order[start + b]].labels) targets.at(b, static_cast<std::size_t>(l)) = 1.0f;
        }
        loss = ops::binary_cross_entropy_with_logits(model_->seq_head->logits(enc.cls, true, &dropout), targets);
        break;
      }
      case TaskKind::kQa: {
        std::vector<std::int32_t> starts, ends;
        for (std::size_t b = 0; b < B; ++b) {
          const auto& f = tr.qa.features[order[start + b]];
          starts.push_back(f.start_position);
          ends.push_back(f.end_position);
        }
        auto logits = model_->qa_head->logits(enc.sequence, B, S);
        loss = ops::scale(ops::add(ops::cross_entropy(logits.start, starts), ops::cross_entropy(logits.end, ends)), 0.5f);
        break;
      }
    }
    const float value = loss.value().item();
    if (!std::isfinite(value)) {
      throw DivergenceError("non-finite fine-tuning loss at epoch " + std::to_string(epoch));
    }
    loss.backward();
    model_->optimizer->step(params, model_->schedule->at(step_));
    ++step_;
    loss_sum += value;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

std::vector<std::vector<float>> TaskJob::infer(Split split, std::vector<std::vector<float>>* second) const {
  if (!model_) throw InvalidArgument("inference before begin()");
  NoGradGuard no_grad;
  const Prepared& pr = prepared(split);
  const std::size_t n = pr.size();
  std::vector<std::vector<float>> out(n);
  if (second) second->assign(n, {});
  constexpr std::size_t kEvalBatch = 32;
  for (std::size_t start = 0; start < n; start += kEvalBatch) {
    const std::size_t end = std::min(n, start + kEvalBatch);
    std::vector<std::vector<std::int32_t>> ids, segs;
    for (std::size_t f = start; f < end; ++f) {
      switch (kind()) {
        case TaskKind::kNer:
          ids.push_back(pr.ner[f].input_ids);
          break;
        case TaskKind::kRe:
        case TaskKind::kDc:
          ids.push_back(pr.cls[f].input_ids);
          break;
        case TaskKind::kQa:
          ids.push_back(pr.qa.features[f].input_ids);
          segs.push_back(pr.qa.features[f].segment_ids);
          break;
      }
    }
    const EncoderBatch batch = pack_ids(ids, segs, vocab_->pad_id());
    const std::size_t S = batch.seq_len;
    auto enc = model_->encoder->forward(batch, false);
    switch (kind()) {
      case TaskKind::kNer: {
        const auto logits = model_->token_head->logits(enc.sequence, false, nullptr).value();
        const std::size_t K = logits.cols();
        for (std::size_t b = 0; b < ids.size(); ++b) {
          const float* row = logits.ptr() + b * S * K;
          out[start + b].assign(row, row + ids[b].size() * K);
        }
        break;
      }
      case TaskKind::kRe:
      case TaskKind::kDc: {
        const auto logits = model_->seq_head->logits(enc.cls, false, nullptr).value();
        const std::size_t K = logits.cols();
        for (std::size_t b = 0; b < ids.size(); ++b) out[start + b].assign(logits.ptr() + b * K, logits.ptr() + (b + 1) * K);
        break;
      }
      case TaskKind::kQa: {
        const auto logits = model_->qa_head->logits(enc.sequence, ids.size(), S);
        const auto& sl = logits.start.value();
        const auto& el = logits.end.value();
        for (std::size_t b = 0; b < ids.size(); ++b) {
          out[start + b].assign(sl.ptr() + b * S, sl.ptr() + b * S + ids[b].size());
          (*second)[start + b].assign(el.ptr() + b * S, el.ptr() + b * S + ids[b].size());
        }
        break;
      }
    }
  }
  return out;
}

TaskDataset TaskJob::predictions(Split split) {
  const Prepared& pr = prepared(split);
  TaskDataset out = *pr.data;
  out.warnings.clear();
  switch (kind()) {
    case TaskKind::kNer: {
      const auto logits = infer(split);
      auto tags = decode_ner(*pr.data, pr.ner, logits, labels_);
      for (std::size_t s = 0; s < out.ner.size(); ++s) out.ner[s].tags = std::move(tags[s]);
      break;
    }
    case TaskKind::kRe:
    case TaskKind::kDc: {
      const auto logits = infer(split);
      for (auto& ex : out.text) ex.labels.clear();
      for (std::size_t f = 0; f < pr.cls.size(); ++f) {
        auto& labels = out.text[pr.cls[f].example].labels;
        const auto& row = logits[f];
        if (kind() == TaskKind::kRe) {
          labels.push_back(labels_[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())]);
        } else {
          for (std::size_t k = 0; k < row.size(); ++k) {
            if (row[k] > 0) labels.push_back(labels_[k]);
          }
        }
      }
      break;
    }
    case TaskKind::kQa: {
      std::vector<std::vector<float>> ends;
      const auto starts = infer(split, &ends);
      const auto ranked = decode_qa(*pr.data, pr.qa.features, starts, ends, 5);
      for (std::size_t e = 0; e < out.qa.size(); ++e) {
        out.qa[e].answers.clear();
        for (const auto& a : ranked[e]) {
          const auto pos = out.qa[e].context.find(a);
          const std::size_t cp = pos == std::string::npos ? 0 : text::decode_utf8(out.qa[e].context.substr(0, pos)).size();
          out.qa[e].answers.push_back({a, cp});
        }
      }
      break;
    }
  }
  return out;
}

nlohmann::json TaskJob::metrics(Split split) {
  return evaluate_predictions(*prepared(split).data, predictions(split), labels_);
}

double TaskJob::score(Split split) { return metrics(split).at(metric_).get<double>(); }

std::vector<Tensor> TaskJob::snapshot() const {
  std::vector<Tensor> out;
  for (const auto& p : parameters()) out.push_back(p.var.value());
  return out;
}

void TaskJob::restore(std::span<const Tensor> state) {
  auto params = parameters();
  if (state.size() != params.size()) throw InvalidArgument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state[i].shape() != params[i].var.shape()) throw ShapeError("restore: shape mismatch for " + params[i].name);
    params[i].var.mutable_value() = state[i];
  }
}

Checkpoint TaskJob::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = config_;
  ckpt.add_parameters(parameters());
  ckpt.metadata = {{"kind", "finetune"}, {"task", std::string(task_kind_name(kind()))}, {"labels", labels_}};
  return ckpt;
}

FineTuneResult finetune_task(TaskSplits splits, const Vocabulary& vocab, const ModelConfig& config,
                             std::optional<Checkpoint> pretrained, const TuneProtocol& protocol,
                             std::optional<Checkpoint> stage, const std::function<void(const EpochLog&)>& on_epoch,
                             Checkpoint* best_model) {
  protocol.validate();
  std::vector<std::string> notes;
  if (splits.dev.empty()) {
    splits.dev.kind = splits.train.kind;
    synthesize_dev_split(splits, protocol.holdout_fraction, protocol.seeds.front());
    notes.push_back("no dev split given; held out " + std::to_string(splits.dev.size()) + " training examples");
  }
  TaskJob job(std::move(splits), vocab, config, std::move(pretrained), std::move(stage), protocol);
  FineTuneResult result;
  bool first = true;
  result.report = run_protocol(job, protocol, on_epoch, [&](const SeedRun&) {
    if (!first) return;
    first = false;
    result.test_metrics = job.metrics(Split::kTest);
    result.test_predictions = job.predictions(Split::kTest);
    if (best_model) *best_model = job.to_checkpoint();
  });
  result.report.warnings.insert(result.report.warnings.begin(), notes.begin(), notes.end());
  return result;
}

}  // namespace forge
