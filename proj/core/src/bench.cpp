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

#include "forge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <new>

#include "forge/error.hpp"
#include "forge/ops.hpp"
#include "forge/parallel.hpp"
#include "forge/pretrain.hpp"

namespace forge {

std::uint64_t estimate_macs(const ModelConfig& config, std::size_t seq_len, std::size_t num_labels) {
  const std::uint64_t L = config.layers, S = seq_len, H = config.hidden, I = config.intermediate;
  return L * (4 * S * H * H + 2 * S * H * I + 2 * S * S * H) + H * num_labels;
}

std::string_view bench_phase_name(BenchPhase phase) { return phase == BenchPhase::kTrain ? "train" : "inference"; }

BenchPhase parse_bench_phase(std::string_view name) {
  if (name == "inference") return BenchPhase::kInference;
  if (name == "train") return BenchPhase::kTrain;
  throw InvalidArgument("unknown phase \"" + std::string(name) + "\" (expected inference or train)");
}

std::string hardware_note() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("model name")) {
      auto pos = line.find(':');
      if (pos != std::string::npos) {
        auto v = line.substr(pos + 1);
        v.erase(0, v.find_first_not_of(' '));
        return v;
      }
    }
  }
  return "unknown";
}

namespace {

// One model, input and optimizer ready to time a single step.
class SpeedProbe {
 public:
  SpeedProbe(const NamedConfig& named, BenchPhase phase, std::size_t seq_len, std::size_t batch, std::uint64_t seed)
      : config_(named.config),
        phase_(phase),
        encoder_(config_, derive_seed(seed, 0)),
        head_(config_, 2, derive_seed(seed, 1)),
        optimizer_(AdamWConfig{1e-5f}),
        dropout_(derive_seed(seed, 3)) {
    if (seq_len == 0 || seq_len > config_.max_positions) {
      throw InvalidArgument("seq_len " + std::to_string(seq_len) + " is outside [1, " +
                            std::to_string(config_.max_positions) + "] for " + named.name);
    }
    if (batch == 0) throw InvalidArgument("batch and repetitions must be positive");
    Rng rng(derive_seed(seed, 2));
    input_.batch = batch;
    input_.seq_len = seq_len;
    for (std::size_t i = 0; i < batch * seq_len; ++i) {
      input_.input_ids.push_back(
          static_cast<std::int32_t>(rng.range(5, static_cast<std::int64_t>(config_.vocab_size) - 1)));
    }
    input_.segment_ids.assign(batch * seq_len, 0);
    input_.attention_mask.assign(batch * seq_len, 1);
    labels_.resize(batch);
    for (auto& l : labels_) l = static_cast<std::int32_t>(rng.below(2));
    params_.assign(encoder_.parameters().begin(), encoder_.parameters().end());
    params_.insert(params_.end(), head_.parameters().begin(), head_.parameters().end());
  }

  void once() {
    if (phase_ == BenchPhase::kInference) {
      NoGradGuard no_grad;
      auto out = encoder_.forward(input_, false);
      auto logits = head_.logits(out.cls, false, nullptr);
      (void)logits;
    } else {
      for (auto& p : params_) p.var.zero_grad();
      auto out = encoder_.forward(input_, true, &dropout_);
      auto loss = ops::cross_entropy(head_.logits(out.cls, true, &dropout_), labels_);
      loss.backward();
      optimizer_.step(params_, 1e-5f);
    }
  }

  double timed() {
    const auto t0 = std::chrono::steady_clock::now();
    once();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  ModelConfig config_;
  BenchPhase phase_;
  EncoderModel encoder_;
  SequenceClassifierHead head_;
  AdamW optimizer_;
  Rng dropout_;
  EncoderBatch input_;
  std::vector<std::int32_t> labels_;
  std::vector<Parameter> params_;
};

BenchResult summarize(const std::string& name, BenchPhase phase, std::size_t seq_len, std::size_t batch,
                      std::vector<double> rep_seconds) {
  BenchResult r;
  r.config = name;
  r.phase = phase;
  r.seq_len = seq_len;
  r.batch = batch;
  r.threads = num_threads();
  r.hardware = hardware_note();
  r.rep_seconds = std::move(rep_seconds);
  std::vector<double> sorted = r.rep_seconds;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double mean = 0;
  for (double t : sorted) mean += t;
  r.duration_sec = mean;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double t : sorted) var += (t - mean) * (t - mean);
  r.cv = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) / mean : 0.0;
  r.unstable = r.cv > 0.10;
  r.examples_per_sec = static_cast<double>(batch) / median;
  return r;
}

}  // namespace

BenchResult measure_speed(const NamedConfig& named, BenchPhase phase, std::size_t seq_len, std::size_t batch,
                          std::size_t repetitions, std::size_t warmup, std::uint64_t seed) {
  if (repetitions == 0) throw InvalidArgument("batch and repetitions must be positive");
  SpeedProbe probe(named, phase, seq_len, batch, seed);
  for (std::size_t i = 0; i < warmup; ++i) probe.once();
  std::vector<double> reps;
  for (std::size_t i = 0; i < repetitions; ++i) reps.push_back(probe.timed());
  return summarize(named.name, phase, seq_len, batch, std::move(reps));
}

std::vector<BenchResult> run_speed_bench(const std::vector<NamedConfig>& configs, const SpeedBenchOptions& options) {
  if (configs.empty()) throw InvalidArgument("no configurations to benchmark");
  if (options.repetitions < 3) throw InvalidArgument("at least 3 timed repetitions are required");
  if (options.batches.empty()) throw InvalidArgument("no batch sizes given");
  std::vector<BenchResult> results;
  if (options.phase == BenchPhase::kInference) {
    // Repetitions alternate across configs so slow drift in machine load hits every config alike.
    std::vector<std::vector<BenchResult>> by_config(configs.size());
    for (auto b : options.batches) {
      std::vector<std::unique_ptr<SpeedProbe>> probes;
      for (const auto& c : configs) {
        probes.push_back(std::make_unique<SpeedProbe>(c, options.phase, options.seq_len, b, options.seed));
      }
      for (auto& p : probes) {
        for (std::size_t i = 0; i < options.warmup; ++i) p->once();
      }
      std::vector<std::vector<double>> reps(configs.size());
      for (std::size_t i = 0; i < options.repetitions; ++i) {
        for (std::size_t k = 0; k < probes.size(); ++k) reps[k].push_back(probes[k]->timed());
      }
      for (std::size_t k = 0; k < configs.size(); ++k) {
        by_config[k].push_back(summarize(configs[k].name, options.phase, options.seq_len, b, std::move(reps[k])));
      }
    }
    for (auto& rows : by_config) results.insert(results.end(), rows.begin(), rows.end());
  } else {
    for (const auto& c : configs) {
      std::vector<std::size_t> candidates = options.batches;
      std::sort(candidates.rbegin(), candidates.rend());
      bool done = false;
      for (auto b : candidates) {
        try {
          results.push_back(measure_speed(c, options.phase, options.seq_len, b, options.repetitions, options.warmup,
                                          options.seed));
          done = true;
          break;
        } catch (const std::bad_alloc&) {
        }
      }
      if (!done) throw Error("no training batch size fits in memory for " + c.name);
    }
  }
  for (auto& r : results) {
    for (const auto& base : results) {
      if (base.config == options.base && base.phase == r.phase && base.batch == r.batch) {
        r.speedup_vs_base = r.examples_per_sec / base.examples_per_sec;
      }
    }
  }
  return results;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << kBenchCsvHeader << "\n";
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%.6g,%.4f,%zu", r.config.c_str(),
                  std::string(bench_phase_name(r.phase)).c_str(), r.seq_len, r.batch, r.examples_per_sec,
                  r.speedup_vs_base, r.threads);
    out << buf << "\n";
  }
}

std::size_t sweep_heads(std::size_t hidden) {
  if (hidden == 0) throw InvalidArgument("hidden must be positive");
  const double target = static_cast<double>(hidden) / 16.0;
  std::size_t best = 1;
  for (std::size_t d = 1; d <= hidden; ++d) {
    if (hidden % d == 0 && std::abs(static_cast<double>(d) - target) < std::abs(static_cast<double>(best) - target)) {
      best = d;
    }
  }
  return best;
}

SweepReport sweep_depth_width(const SweepOptions& options, const std::filesystem::path& work_dir) {
  if (options.task != TaskKind::kNer && options.task != TaskKind::kQa) {
    throw InvalidArgument("the sweep runs on a toy NER or QA task");
  }
  std::vector<std::pair<std::size_t, std::size_t>> cells = options.cells;
  if (cells.empty()) {
    for (auto L : options.depths) {
      for (auto H : options.widths) cells.emplace_back(L, H);
    }
  }
  if (cells.empty()) throw InvalidArgument("sweep has no cells");

  // Shared synthetic data and vocabulary.
  TaskDataset all = options.task == TaskKind::kNer ? make_toy_ner(options.toy_examples, derive_seed(options.seed, 1))
                                                   : make_toy_qa(options.toy_examples, derive_seed(options.seed, 1));
  const std::string corpus_text = toy_corpus_text(all, 4);
  std::vector<std::string> lines;
  for (const auto& doc : parse_corpus(corpus_text)) lines.insert(lines.end(), doc.sentences.begin(), doc.sentences.end());
  const Vocabulary vocab = train_vocabulary(lines, options.vocab_size, kDefaultMinFrequency).vocab;

  const std::size_t n = all.size();
  std::vector<std::size_t> train_idx, dev_idx, test_idx;
  for (std::size_t i = 0; i < n; ++i) (i % 5 == 3 ? dev_idx : i % 5 == 4 ? test_idx : train_idx).push_back(i);
  TaskSplits splits{all.subset(train_idx), all.subset(dev_idx), all.subset(test_idx)};

  PretrainRunConfig run;
  run.steps = options.pretrain_steps;
  run.batch_size = 8;
  run.max_seq_len = options.max_seq_len;
  run.lr = 1e-3f;
  run.seed = options.seed;
  run.dup_factor = 2;
  run.record_throughput = false;
  const auto instances = generate_pretraining_set(parse_corpus(corpus_text), vocab, run.set_options());

  SweepReport report;
  for (const auto& [L, H] : cells) {
    SweepRow row;
    row.layers = L;
    row.hidden = H;
    row.heads = sweep_heads(H);
    ModelConfig cfg = make_config(L, H, row.heads, vocab.size(), std::max<std::size_t>(128, options.max_seq_len));
    cfg.intermediate = 4 * H;
    row.params = param_count(cfg, false);
    if (options.budget && row.params > options.budget) {
      throw InvalidArgument("cell L=" + std::to_string(L) + " H=" + std::to_string(H) + " has " +
                            std::to_string(row.params) + " parameters, above the budget " +
                            std::to_string(options.budget));
    }
    report.rows.push_back(row);
  }
  for (auto& row : report.rows) {
    try {
      ModelConfig cfg = make_config(row.layers, row.hidden, row.heads, vocab.size(),
                                    std::max<std::size_t>(128, options.max_seq_len));
      run.model = cfg;
      const auto dir = work_dir / ("cell-L" + std::to_string(row.layers) + "-H" + std::to_string(row.hidden));
      const auto pre = run_pretraining(run, instances, vocab, dir);
      TuneProtocol protocol = options.protocol;
      if (protocol.max_seq_len == 0) protocol.max_seq_len = options.max_seq_len;
      if (options.task == TaskKind::kQa) protocol.doc_stride = std::min(protocol.doc_stride, protocol.max_seq_len / 4);
      TaskJob job(splits, vocab, cfg, load_checkpoint(pre.final_checkpoint), std::nullopt, protocol);
      const auto rep = run_protocol(job, protocol);
      row.dev_score = rep.grid[rep.best_cell].dev_score;
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
  }
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    for (std::size_t j = 0; j < report.rows.size(); ++j) {
      const auto& a = report.rows[i];
      const auto& b = report.rows[j];
      if (a.layers <= b.layers) continue;
      const double ratio = static_cast<double>(a.params) / static_cast<double>(b.params);
      if (std::abs(ratio - 1.0) <= 0.10) report.iso_pairs.push_back({i, j, ratio, a.dev_score - b.dev_score});
    }
  }
  return report;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << kSweepCsvHeader << "\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%llu,%.4f,%s", r.layers, r.hidden, r.heads,
                  static_cast<unsigned long long>(r.params), r.dev_score, r.failed ? "failed" : "ok");
    out << buf << "\n";
  }
}

}  // namespace forge
