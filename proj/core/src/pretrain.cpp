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

#include "forge/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include "forge/error.hpp"
#include "forge/ops.hpp"

namespace forge {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kShuffleTag = 0x5e0f;
constexpr std::uint64_t kDropoutTag = 0xd80f;

std::string format_row(std::int64_t step, const StepResult& r, float lr, double ips) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(step), r.mlm_loss, r.nsp_loss,
                lr, ips);
  return buf;
}

// Keeps the header and rows with step <= last_step.
void truncate_metrics(const std::filesystem::path& path, std::int64_t last_step) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics log " + path.string() + " for resume");
  std::string line, kept;
  std::int64_t rows = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      if (line != kMetricsHeader) throw FormatError("unexpected metrics header in " + path.string());
      kept += line + "\n";
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= last_step) {
      kept += line + "\n";
      ++rows;
    }
  }
  if (rows != last_step) {
    throw FormatError("metrics log " + path.string() + " has " + std::to_string(rows) + " rows up to step " +
                      std::to_string(last_step));
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept;
}

}  // namespace

std::int64_t PretrainRunConfig::resolved_warmup() const {
  if (warmup_steps) return *warmup_steps;
  return std::max<std::int64_t>(1, steps / 100);
}

void PretrainRunConfig::validate() const {
  model.validate();
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
  if (warmup_steps && (*warmup_steps < 0 || *warmup_steps > steps)) {
    throw InvalidArgument("warmup_steps must lie in [0, steps]");
  }
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (max_seq_len < 5) throw InvalidArgument("max_seq_len must be at least 5");
  if (max_seq_len > model.max_positions) {
    throw InvalidArgument("max_seq_len " + std::to_string(max_seq_len) + " exceeds max positions " +
                          std::to_string(model.max_positions));
  }
  if (!(lr > 0)) throw InvalidArgument("lr must be positive");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be non-negative");
  if (dup_factor == 0) throw InvalidArgument("dup_factor must be positive");
  if (!(masking_rate > 0 && masking_rate < 1)) throw InvalidArgument("masking_rate must lie in (0, 1)");
}

PretrainSetOptions PretrainRunConfig::set_options() const {
  PretrainSetOptions o;
  o.max_seq_len = max_seq_len;
  o.dup_factor = dup_factor;
  o.masking_rate = masking_rate;
  o.max_predictions = max_predictions;
  o.short_seq_prob = short_seq_prob;
  o.seed = seed;
  return o;
}

PretrainRunConfig PretrainRunConfig::full_scale() {
  PretrainRunConfig c;
  c.model = bioformer_8l_config();
  c.steps = 2'000'000;
  c.batch_size = 256;
  c.max_seq_len = 512;
  return c;
}

void to_json(nlohmann::json& j, const PretrainRunConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"steps", c.steps},
                     {"batch_size", c.batch_size},
                     {"max_seq_len", c.max_seq_len},
                     {"lr", c.lr},
                     {"warmup_steps", c.resolved_warmup()},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"dup_factor", c.dup_factor},
                     {"masking_rate", c.masking_rate},
                     {"max_predictions", c.max_predictions},
                     {"short_seq_prob", c.short_seq_prob},
                     {"weight_decay", c.weight_decay},
                     {"record_throughput", c.record_throughput}};
}

void from_json(const nlohmann::json& j, PretrainRunConfig& c) {
  if (!j.is_object()) throw InvalidArgument("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      if (value.is_string()) {
        auto preset = preset_config(value.get<std::string>());
        if (!preset) throw InvalidArgument("unknown model preset " + value.get<std::string>());
        c.model = *preset;
      } else {
        c.model = value.get<ModelConfig>();
      }
    } else if (key == "steps") {
      c.steps = value.get<std::int64_t>();
    } else if (key == "batch_size") {
      c.batch_size = value.get<std::size_t>();
    } else if (key == "max_seq_len") {
      c.max_seq_len = value.get<std::size_t>();
    } else if (key == "lr") {
      c.lr = value.get<float>();
    } else if (key == "warmup_steps") {
      if (value.is_null()) {
        c.warmup_steps.reset();
      } else {
        c.warmup_steps = value.get<std::int64_t>();
      }
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = value.get<std::int64_t>();
    } else if (key == "dup_factor") {
      c.dup_factor = value.get<std::size_t>();
    } else if (key == "masking_rate") {
      c.masking_rate = value.get<double>();
    } else if (key == "max_predictions") {
      c.max_predictions = value.get<std::size_t>();
    } else if (key == "short_seq_prob") {
      c.short_seq_prob = value.get<double>();
    } else if (key == "weight_decay") {
      c.weight_decay = value.get<float>();
    } else if (key == "record_throughput") {
      c.record_throughput = value.get<bool>();
    } else {
      throw InvalidArgument("unknown run config key \"" + key + "\"");
    }
  }
}

PretrainModel::PretrainModel(const ModelConfig& config, std::uint64_t seed)
    : encoder(config, derive_seed(seed, 0)), mlm(encoder, derive_seed(seed, 1)), nsp(config, derive_seed(seed, 2)) {}

std::vector<Parameter> PretrainModel::parameters() const {
  std::vector<Parameter> out;
  for (const auto* m : {static_cast<const Module*>(&encoder), static_cast<const Module*>(&mlm),
                        static_cast<const Module*>(&nsp)}) {
    out.insert(out.end(), m->parameters().begin(), m->parameters().end());
  }
  return out;
}

PretrainBatch prepare_pretrain_batch(std::span<const PretrainInstance* const> batch, const Vocabulary& vocab) {
  if (batch.empty()) throw InvalidArgument("empty pretraining batch");
  std::vector<std::vector<std::int32_t>> ids, segs;
  ids.reserve(batch.size());
  segs.reserve(batch.size());
  for (const auto* inst : batch) {
    ids.push_back(inst->input_ids);
    segs.push_back(inst->segment_ids);
  }
  PretrainBatch out;
  out.input = EncoderBatch::pack(ids, segs, vocab.pad_id());
  const std::size_t S = out.input.seq_len;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& inst = *batch[b];
    if (inst.masked_positions.size() != inst.mlm_labels.size()) {
      throw InvalidArgument("instance has mismatched masked positions and labels");
    }
    for (std::size_t k = 0; k < inst.masked_positions.size(); ++k) {
      out.mlm_rows.push_back(b * S + static_cast<std::size_t>(inst.masked_positions[k]));
      out.mlm_labels.push_back(inst.mlm_labels[k]);
    }
    out.nsp_labels.push_back(static_cast<std::int32_t>(inst.nsp_label));
  }
  return out;
}

PretrainLosses pretrain_losses(const PretrainModel& model, const PretrainBatch& batch, bool training,
                               Rng* dropout_rng) {
  auto enc = model.encoder.forward(batch.input, training, dropout_rng);
  PretrainLosses out;
  if (batch.mlm_rows.empty()) {
    out.mlm = Variable(Tensor::scalar(0.0f));
  } else {
    out.mlm_logits = model.mlm.logits(ops::gather_rows(enc.sequence, batch.mlm_rows));
    out.mlm = ops::cross_entropy(out.mlm_logits, batch.mlm_labels);
  }
  out.nsp_logits = model.nsp.logits(enc.cls);
  out.nsp = ops::cross_entropy(out.nsp_logits, batch.nsp_labels);
  return out;
}

StepResult pretrain_step(PretrainModel& model, const PretrainBatch& batch, AdamW& optimizer, float lr,
                         std::size_t max_seq_len, Rng& dropout_rng) {
  if (batch.input.batch == 0) throw InvalidArgument("empty pretraining batch");
  if (batch.input.seq_len > max_seq_len) {
    throw InvalidArgument("instance length " + std::to_string(batch.input.seq_len) + " exceeds max_seq_len " +
                          std::to_string(max_seq_len));
  }
  auto params = model.parameters();
  for (auto& p : params) p.var.zero_grad();
  auto losses = pretrain_losses(model, batch, true, &dropout_rng);
  StepResult r{losses.mlm.value().item(), losses.nsp.value().item()};
  if (!std::isfinite(r.mlm_loss) || !std::isfinite(r.nsp_loss)) {
    throw DivergenceError("non-finite pretraining loss (mlm " + std::to_string(r.mlm_loss) + ", nsp " +
                          std::to_string(r.nsp_loss) + ")");
  }
  ops::add(losses.mlm, losses.nsp).backward();
  optimizer.step(params, lr);
  return r;
}

PretrainEval evaluate_pretraining(const PretrainModel& model, std::span<const PretrainInstance> instances,
                                  const Vocabulary& vocab, std::size_t batch_size) {
  if (instances.empty()) throw InvalidArgument("no instances to evaluate");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  NoGradGuard no_grad;
  PretrainEval ev;
  double mlm_sum = 0, nsp_sum = 0;
  std::size_t mlm_correct = 0, nsp_correct = 0;
  for (std::size_t start = 0; start < instances.size(); start += batch_size) {
    const std::size_t end = std::min(instances.size(), start + batch_size);
    std::vector<const PretrainInstance*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&instances[i]);
    auto batch = prepare_pretrain_batch(ptrs, vocab);
    auto losses = pretrain_losses(model, batch, false, nullptr);
    if (!batch.mlm_rows.empty()) {
      mlm_sum += static_cast<double>(losses.mlm.value().item()) * static_cast<double>(batch.mlm_rows.size());
      const auto& logits = losses.mlm_logits.value();
      for (std::size_t r = 0; r < batch.mlm_rows.size(); ++r) {
        const float* row = logits.ptr() + r * logits.cols();
        auto best = std::max_element(row, row + logits.cols()) - row;
        if (best == batch.mlm_labels[r]) ++mlm_correct;
      }
      ev.masked_tokens += batch.mlm_rows.size();
    }
    nsp_sum += static_cast<double>(losses.nsp.value().item()) * static_cast<double>(ptrs.size());
    const auto& nl = losses.nsp_logits.value();
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      const std::int32_t pred = nl.at(b, 1) > nl.at(b, 0) ? 1 : 0;
      if (pred == batch.nsp_labels[b]) ++nsp_correct;
    }
  }
  if (ev.masked_tokens) {
    ev.mlm_loss = mlm_sum / static_cast<double>(ev.masked_tokens);
    ev.masked_accuracy = static_cast<double>(mlm_correct) / static_cast<double>(ev.masked_tokens);
  }
  ev.nsp_loss = nsp_sum / static_cast<double>(instances.size());
  ev.nsp_accuracy = static_cast<double>(nsp_correct) / static_cast<double>(instances.size());
  return ev;
}

namespace {

Checkpoint make_run_checkpoint(const PretrainModel& model, const AdamW& optimizer, const PretrainRunConfig& config,
                               std::int64_t step) {
  Checkpoint ckpt;
  ckpt.config = model.encoder.config();
  auto params = model.parameters();
  ckpt.add_parameters(params);
  const auto& st = optimizer.state();
  for (std::size_t i = 0; i < st.first_moment.size(); ++i) {
    ckpt.add("optim.m." + params[i].name, st.first_moment[i]);
    ckpt.add("optim.v." + params[i].name, st.second_moment[i]);
  }
  ckpt.metadata = {{"kind", "pretrain"}, {"step", step}, {"optimizer_step", st.step}, {"run_config", config}};
  return ckpt;
}

// Instance order: a fresh seeded permutation per pass over the data, so the
// batch for any step is a pure function of (seed, step).
class BatchSchedule {
 public:
  BatchSchedule(std::span<const PretrainInstance> instances, std::size_t batch, std::uint64_t seed)
      : instances_(instances), batch_(batch), seed_(seed) {}

  std::vector<const PretrainInstance*> at(std::int64_t step) {
    std::vector<const PretrainInstance*> out;
    const std::size_t n = instances_.size();
    for (std::size_t i = 0; i < batch_; ++i) {
      const std::size_t g = static_cast<std::size_t>(step) * batch_ + i;
      const std::size_t epoch = g / n;
      if (epoch != epoch_ || perm_.empty()) {
        perm_.resize(n);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        Rng rng(derive_seed(seed_, kShuffleTag, epoch));
        rng.shuffle(std::span<std::size_t>(perm_));
        epoch_ = epoch;
      }
      out.push_back(&instances_[perm_[g % n]]);
    }
    return out;
  }

 private:
  std::span<const PretrainInstance> instances_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

}  // namespace

void load_pretrained(PretrainModel& model, const Checkpoint& ckpt) {
  require_config(model.encoder.config(), ckpt.config);
  auto params = model.parameters();
  const std::vector<std::string> ignored{"optim."};
  restore_parameters(ckpt, params, ignored);
}

PretrainRunResult run_pretraining(const PretrainRunConfig& config_in, std::span<const PretrainInstance> instances,
                                  const Vocabulary& vocab, const std::filesystem::path& out_dir,
                                  const PretrainRunOptions& options) {
  PretrainRunConfig config = config_in;
  config.model.vocab_size = vocab.size();
  config.validate();
  if (instances.empty()) throw InvalidArgument("no pretraining instances");
  for (const auto& inst : instances) {
    if (inst.input_ids.size() > config.max_seq_len) {
      throw InvalidArgument("pretraining instance of length " + std::to_string(inst.input_ids.size()) +
                            " exceeds max_seq_len " + std::to_string(config.max_seq_len));
    }
  }
  std::filesystem::create_directories(out_dir);

  PretrainModel model(config.model, derive_seed(config.seed, kInitTag));
  AdamW optimizer({config.lr, 0.9f, 0.999f, 1e-6f, config.weight_decay});
  PretrainRunResult result;
  result.metrics_log = out_dir / "metrics.csv";

  std::int64_t start = 0;
  if (options.resume_from) {
    const auto ckpt = load_checkpoint(*options.resume_from);
    if (ckpt.metadata.value("kind", "") != "pretrain") throw FormatError("resume checkpoint is not a pretraining run");
    if (ckpt.metadata.at("run_config") != nlohmann::json(config)) {
      throw InvalidArgument("resume checkpoint was written with a different run config");
    }
    load_pretrained(model, ckpt);
    auto params = model.parameters();
    auto& st = optimizer.state();
    st.step = ckpt.metadata.at("optimizer_step").get<std::int64_t>();
    if (st.step > 0) {
      for (const auto& p : params) {
        const Tensor* m = ckpt.find("optim.m." + p.name);
        const Tensor* v = ckpt.find("optim.v." + p.name);
        if (!m || !v) throw MissingTensorError("resume checkpoint lacks optimizer moments for " + p.name);
        st.first_moment.push_back(*m);
        st.second_moment.push_back(*v);
      }
    }
    start = ckpt.metadata.at("step").get<std::int64_t>();
    truncate_metrics(result.metrics_log, start);
  } else {
    std::ofstream out(result.metrics_log, std::ios::trunc);
    if (!out) throw IoError("cannot write " + result.metrics_log.string());
    out << kMetricsHeader << "\n";
  }

  std::ofstream log(result.metrics_log, std::ios::app);
  if (!log) throw IoError("cannot append to " + result.metrics_log.string());

  const LinearWarmupDecay schedule(config.lr, config.resolved_warmup(), config.steps);
  const std::int64_t end = std::min(config.steps, options.stop_after.value_or(config.steps));
  BatchSchedule order(instances, config.batch_size, config.seed);
  auto prepare = [&](std::int64_t step) { return prepare_pretrain_batch(order.at(step), vocab); };

  std::future<PretrainBatch> next;
  if (start < end) next = std::async(std::launch::async, prepare, start);
  std::int64_t last_saved = -1;
  for (std::int64_t s = start; s < end; ++s) {
    PretrainBatch batch = next.get();
    if (s + 1 < end) next = std::async(std::launch::async, prepare, s + 1);
    Rng dropout(derive_seed(config.seed, kDropoutTag, static_cast<std::uint64_t>(s)));
    const float lr = schedule.at(s);
    const auto t0 = std::chrono::steady_clock::now();
    result.last = pretrain_step(model, batch, optimizer, lr, config.max_seq_len, dropout);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double ips = config.record_throughput && secs > 0 ? static_cast<double>(batch.input.batch) / secs : 0.0;
    log << format_row(s + 1, result.last, lr, ips) << "\n";
    log.flush();
    if (config.checkpoint_every > 0 && (s + 1) % config.checkpoint_every == 0) {
      save_checkpoint(make_run_checkpoint(model, optimizer, config, s + 1),
                      out_dir / ("checkpoint-" + std::to_string(s + 1) + ".ckpt"));
      last_saved = s + 1;
    }
  }
  result.steps_done = end;
  if (end == config.steps) {
    result.final_checkpoint = out_dir / "final.ckpt";
    save_checkpoint(make_run_checkpoint(model, optimizer, config, end), result.final_checkpoint);
  } else {
    result.final_checkpoint = out_dir / ("checkpoint-" + std::to_string(end) + ".ckpt");
    if (last_saved != end) save_checkpoint(make_run_checkpoint(model, optimizer, config, end), result.final_checkpoint);
  }
  return result;
}

PretrainRunResult run_pretraining(const PretrainRunConfig& config, const std::filesystem::path& corpus_path,
                                  const std::filesystem::path& vocab_path, const std::filesystem::path& out_dir,
                                  const PretrainRunOptions& options) {
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  auto sidecar = corpus_path;
  sidecar += ".json";
  std::vector<PretrainInstance> instances;
  if (std::filesystem::exists(sidecar)) {
    instances = read_pretraining_set(corpus_path);
  } else {
    const auto docs = read_corpus(corpus_path);
    instances = generate_pretraining_set(docs, vocab, config.set_options());
  }
  return run_pretraining(config, instances, vocab, out_dir, options);
}

}  // namespace forge
