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

#include "cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "forge/bench.hpp"
#include "forge/corpus.hpp"
#include "forge/error.hpp"
#include "forge/finetune.hpp"
#include "forge/manifest.hpp"
#include "forge/parallel.hpp"
#include "forge/pretrain.hpp"

namespace forge::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kFooter = R"(File formats:
  JSON   run configs (pretrain --config), protocols, model configs, reports, manifests, SQuAD-style QA data
  CSV    pretrain metrics.csv (step,mlm_loss,nsp_loss,lr,inst_per_sec), finetune metrics.csv,
         bench output (config,phase,seq_len,batch,examples_per_sec,speedup_vs_base,threads), sweep.csv
  Text datasets: NER as token<TAB>tag lines, RE/DC as id<TAB>text<TAB>labels[<TAB>begin:end:TYPE;...]
Environment:
  FORGE_THREADS pins the worker thread count (default 1).)";

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path sibling_manifest(const fs::path& out) {
  auto p = out;
  p += ".manifest.json";
  return p;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + " is not valid JSON: " + e.what());
  }
}

ModelConfig resolve_model(const std::string& name) {
  if (auto preset = preset_config(name)) return *preset;
  if (!fs::exists(name)) throw InvalidArgument("\"" + name + "\" is neither a preset nor a model config file");
  auto c = read_json(name).get<ModelConfig>();
  c.validate();
  return c;
}

std::string millions(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0fM", static_cast<double>(n) / 1e6);
  return buf;
}

std::vector<std::string> corpus_sentences(const fs::path& path) {
  std::vector<std::string> lines;
  for (const auto& doc : read_corpus(path)) lines.insert(lines.end(), doc.sentences.begin(), doc.sentences.end());
  return lines;
}

std::string prediction_file_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNer:
      return "predictions.conll";
    case TaskKind::kRe:
    case TaskKind::kDc:
      return "predictions.tsv";
    case TaskKind::kQa:
      return "predictions.json";
  }
  return "predictions.txt";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"forge: compact BERT-style encoder toolkit", "forge"};
  app.footer(kFooter);
  app.require_subcommand(0, 1);
  app.set_version_flag("--version", std::string(version()));

  // train-vocab
  auto* tv = app.add_subcommand("train-vocab", "Train a cased WordPiece vocabulary");
  std::string tv_corpus, tv_out;
  std::size_t tv_size = 32768, tv_min_freq = kDefaultMinFrequency;
  std::uint64_t tv_seed = 0;
  tv->add_option("--corpus", tv_corpus, "Corpus text (blank-line separated documents)")->required()->check(CLI::ExistingFile);
  tv->add_option("--size", tv_size, "Target vocabulary size")->capture_default_str();
  tv->add_option("--min-frequency", tv_min_freq, "Minimum pair count for a merge")->capture_default_str();
  tv->add_option("--seed", tv_seed, "Recorded seed (training is deterministic)")->capture_default_str();
  tv->add_option("--out", tv_out, "Output vocabulary file, one token per line")->required();

  // build-corpus
  auto* bc = app.add_subcommand("build-corpus", "Pack NSP pairs and apply whole-word masking");
  std::string bc_corpus, bc_vocab, bc_out;
  PretrainSetOptions bc_opt;
  bc->add_option("--corpus", bc_corpus, "Corpus text")->required()->check(CLI::ExistingFile);
  bc->add_option("--vocab", bc_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  bc->add_option("--out", bc_out, "Output pretraining set (sidecar written to <out>.json)")->required();
  bc->add_option("--max-seq-len", bc_opt.max_seq_len)->capture_default_str();
  bc->add_option("--dup-factor", bc_opt.dup_factor)->capture_default_str();
  bc->add_option("--masking-rate", bc_opt.masking_rate)->capture_default_str();
  bc->add_option("--max-predictions", bc_opt.max_predictions, "0 = round(rate * max_seq_len)")->capture_default_str();
  bc->add_option("--short-seq-prob", bc_opt.short_seq_prob)->capture_default_str();
  bc->add_option("--seed", bc_opt.seed)->capture_default_str();

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "MLM + NSP pretraining");
  std::string pt_config, pt_corpus, pt_vocab, pt_out, pt_resume;
  std::optional<std::uint64_t> pt_seed;
  std::optional<std::int64_t> pt_stop;
  pt->add_option("--config", pt_config, "Run config JSON")->required()->check(CLI::ExistingFile);
  pt->add_option("--corpus", pt_corpus, "Corpus text or a build-corpus pretraining set")->required()->check(CLI::ExistingFile);
  pt->add_option("--vocab", pt_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  pt->add_option("--out", pt_out, "Output directory")->required();
  pt->add_option("--seed", pt_seed, "Overrides the config seed");
  pt->add_option("--resume", pt_resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  pt->add_option("--stop-after", pt_stop, "Stop after this many steps with a checkpoint");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Grid search, dev selection and seed averaging on one task");
  std::string ft_task, ft_train, ft_dev, ft_test, ft_ckpt, ft_stage, ft_vocab, ft_protocol = "default", ft_out, ft_model;
  std::optional<std::uint64_t> ft_seed;
  std::optional<std::size_t> ft_max_len;
  ft->add_option("--task", ft_task, "ner, re, dc or qa")->required();
  ft->add_option("--train", ft_train)->required()->check(CLI::ExistingFile);
  ft->add_option("--dev", ft_dev, "Omit to hold out part of train")->check(CLI::ExistingFile);
  ft->add_option("--test", ft_test)->required()->check(CLI::ExistingFile);
  ft->add_option("--checkpoint", ft_ckpt, "Pretrained checkpoint")->check(CLI::ExistingFile);
  ft->add_option("--model", ft_model, "Preset or model config JSON when no checkpoint is given");
  ft->add_option("--stage-checkpoint", ft_stage, "Fine-tuned checkpoint used as initialization")->check(CLI::ExistingFile);
  ft->add_option("--vocab", ft_vocab)->required()->check(CLI::ExistingFile);
  ft->add_option("--protocol", ft_protocol, "\"default\" or a protocol JSON file")->capture_default_str();
  ft->add_option("--max-seq-len", ft_max_len);
  ft->add_option("--seed", ft_seed, "Protocol seeds become seed, seed+1, ...");
  ft->add_option("--out", ft_out, "Output directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a prediction file against gold");
  std::string ev_task, ev_gold, ev_pred, ev_out;
  ev->add_option("--task", ev_task, "ner, re, dc or qa")->required();
  ev->add_option("--gold", ev_gold)->required()->check(CLI::ExistingFile);
  ev->add_option("--pred", ev_pred)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "JSON report path (stdout otherwise)");

  // bench
  auto* be = app.add_subcommand("bench", "Throughput of presets relative to the Base shape");
  std::string be_phase = "inference", be_out, be_base = "bert-base";
  std::vector<std::string> be_configs{"bioformer-8L", "bioformer-16L", "bert-base"};
  SpeedBenchOptions be_opt;
  be->add_option("--phase", be_phase, "inference or train")->capture_default_str();
  be->add_option("--seq-len", be_opt.seq_len)->capture_default_str();
  be->add_option("--reps", be_opt.repetitions, "Timed repetitions (>= 3)")->capture_default_str();
  be->add_option("--warmup", be_opt.warmup)->capture_default_str();
  be->add_option("--batch", be_opt.batches, "Batch sizes")->delimiter(',')->capture_default_str();
  be->add_option("--configs", be_configs, "Presets or model config files")->delimiter(',')->capture_default_str();
  be->add_option("--base", be_base, "Reference config for speedups")->capture_default_str();
  be->add_option("--seed", be_opt.seed)->capture_default_str();
  be->add_option("--out", be_out, "CSV path (stdout otherwise)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Depth-vs-width sweep on a toy task");
  SweepOptions sw_opt;
  std::string sw_task = "ner", sw_out, sw_protocol;
  std::vector<std::string> sw_cells;
  sw->add_option("--depths", sw_opt.depths)->delimiter(',');
  sw->add_option("--widths", sw_opt.widths)->delimiter(',');
  sw->add_option("--cells", sw_cells, "Explicit LxH cells, e.g. 2x64,4x45")->delimiter(',');
  sw->add_option("--task", sw_task, "ner or qa")->capture_default_str();
  sw->add_option("--budget", sw_opt.budget, "Maximum parameters per cell (0 = none)")->capture_default_str();
  sw->add_option("--pretrain-steps", sw_opt.pretrain_steps)->capture_default_str();
  sw->add_option("--examples", sw_opt.toy_examples, "Synthetic examples")->capture_default_str();
  sw->add_option("--protocol", sw_protocol, "Protocol JSON (default: one cell, 3 epochs, 1 seed)");
  sw->add_option("--seed", sw_opt.seed)->capture_default_str();
  sw->add_option("--out", sw_out, "Output directory")->required();

  // param-count
  auto* pc = app.add_subcommand("param-count", "Exact encoder parameter count");
  std::string pc_preset, pc_config, pc_manifest;
  bool pc_heads = false;
  auto* pc_preset_opt = pc->add_option("--preset", pc_preset, "bioformer-8L, bioformer-16L or bert-base");
  auto* pc_config_opt = pc->add_option("--config", pc_config, "Model config JSON")->check(CLI::ExistingFile);
  pc_preset_opt->excludes(pc_config_opt);
  pc->add_flag("--with-heads", pc_heads, "Include MLM and NSP heads");
  pc->add_option("--manifest", pc_manifest, "Write a run manifest here");

  if (args.empty()) {
    err << app.help();
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "forge: error: " << first_line(e.what()) << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return 2;
  }

  RunManifest manifest;
  manifest.start();
  try {
    if (*tv) {
      manifest.command = "train-vocab";
      manifest.seed = tv_seed;
      manifest.add_input(tv_corpus);
      manifest.config = {{"size", tv_size}, {"min_frequency", tv_min_freq}};
      const auto result = train_vocabulary(corpus_sentences(tv_corpus), tv_size, tv_min_freq);
      result.vocab.save(tv_out);
      out << "vocabulary: " << result.vocab.size() << " tokens, " << result.alphabet_size << " alphabet units, "
          << result.merges << " merges\n";
      if (!result.reached_target) {
        err << "forge: warning: corpus supports only " << result.vocab.size() << " of " << tv_size << " tokens\n";
      }
      manifest.outputs = {tv_out};
      manifest.finish();
      write_manifest(manifest, sibling_manifest(tv_out));
    } else if (*bc) {
      manifest.command = "build-corpus";
      manifest.seed = bc_opt.seed;
      manifest.add_input(bc_corpus);
      manifest.add_input(bc_vocab);
      manifest.config = {{"max_seq_len", bc_opt.max_seq_len},
                         {"dup_factor", bc_opt.dup_factor},
                         {"masking_rate", bc_opt.masking_rate},
                         {"max_predictions", bc_opt.resolved_max_predictions()},
                         {"short_seq_prob", bc_opt.short_seq_prob}};
      const auto vocab = Vocabulary::load(bc_vocab);
      const auto instances = generate_pretraining_set(read_corpus(bc_corpus), vocab, bc_opt);
      write_pretraining_set(bc_out, instances, bc_opt, vocab);
      out << "instances: " << instances.size() << "\n";
      manifest.outputs = {bc_out, bc_out + ".json"};
      manifest.finish();
      write_manifest(manifest, sibling_manifest(bc_out));
    } else if (*pt) {
      manifest.command = "pretrain";
      auto config = read_json(pt_config).get<PretrainRunConfig>();
      if (pt_seed) config.seed = *pt_seed;
      const auto vocab = Vocabulary::load(pt_vocab);
      config.model.vocab_size = vocab.size();
      config.validate();
      manifest.seed = config.seed;
      manifest.config = config;
      manifest.add_input(pt_config);
      manifest.add_input(pt_corpus);
      manifest.add_input(pt_vocab);
      PretrainRunOptions opts;
      if (!pt_resume.empty()) {
        opts.resume_from = pt_resume;
        manifest.add_input(pt_resume);
        manifest.config["resume"] = pt_resume;
      }
      opts.stop_after = pt_stop;
      if (pt_stop) manifest.config["stop_after"] = *pt_stop;
      const auto result = run_pretraining(config, pt_corpus, pt_vocab, pt_out, opts);
      out << "steps: " << result.steps_done << "  mlm_loss: " << result.last.mlm_loss
          << "  nsp_loss: " << result.last.nsp_loss << "\ncheckpoint: " << result.final_checkpoint.string() << "\n";
      manifest.outputs = {result.metrics_log.string(), result.final_checkpoint.string()};
      manifest.finish();
      write_manifest(manifest, fs::path(pt_out) / "manifest.json");
    } else if (*ft) {
      manifest.command = "finetune";
      const TaskKind kind = parse_task_kind(ft_task);
      const auto vocab = Vocabulary::load(ft_vocab);
      TuneProtocol protocol = load_protocol(ft_protocol);
      if (ft_seed) {
        for (std::size_t i = 0; i < protocol.seeds.size(); ++i) protocol.seeds[i] = *ft_seed + i;
      }
      if (ft_max_len) protocol.max_seq_len = *ft_max_len;
      protocol.validate();
      std::optional<Checkpoint> pretrained, stage;
      ModelConfig config;
      if (!ft_ckpt.empty()) {
        pretrained = load_checkpoint(ft_ckpt);
        config = pretrained->config;
        manifest.add_input(ft_ckpt);
      } else if (!ft_model.empty()) {
        config = resolve_model(ft_model);
        config.vocab_size = vocab.size();
      } else {
        throw InvalidArgument("finetune needs --checkpoint or --model");
      }
      if (!ft_stage.empty()) {
        stage = load_checkpoint(ft_stage);
        manifest.add_input(ft_stage);
      }
      TaskSplits splits;
      splits.train = load_task_dataset(ft_train, kind);
      splits.test = load_task_dataset(ft_test, kind);
      splits.dev.kind = kind;
      manifest.add_input(ft_train);
      manifest.add_input(ft_test);
      if (!ft_dev.empty()) {
        splits.dev = load_task_dataset(ft_dev, kind);
        manifest.add_input(ft_dev);
      }
      manifest.add_input(ft_vocab);
      if (ft_protocol != "default") manifest.add_input(ft_protocol);
      manifest.seed = protocol.seeds.front();
      manifest.config = {{"task", ft_task}, {"protocol", protocol}, {"model", config}};

      fs::create_directories(ft_out);
      const fs::path dir(ft_out);
      std::ofstream log(dir / "metrics.csv", std::ios::trunc);
      log << "phase,batch_size,lr,seed,epoch,train_loss,dev_score\n";
      auto on_epoch = [&](const EpochLog& e) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.9g,%llu,%zu,%.9g,%.9g", e.phase.c_str(), e.batch_size, e.lr,
                      static_cast<unsigned long long>(e.seed), e.epoch, e.train_loss, e.dev_score);
        log << buf << "\n";
        log.flush();
      };
      Checkpoint best;
      auto result = finetune_task(std::move(splits), vocab, config, std::move(pretrained), protocol, std::move(stage),
                                  on_epoch, &best);
      nlohmann::json report = {{"task", ft_task}, {"protocol", protocol}, {"result", result.report},
                               {"test_metrics_first_seed", result.test_metrics}};
      std::ofstream(dir / "report.json") << report.dump(2) << "\n";
      save_task_dataset(result.test_predictions, dir / prediction_file_name(kind));
      save_checkpoint(best, dir / "model.ckpt");
      for (const auto& w : result.report.warnings) err << "forge: warning: " << w << "\n";
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f", result.report.mean_test);
      out << "mean test score over " << result.report.seeds.size() << " seeds: " << buf << "\n";
      manifest.outputs = {(dir / "metrics.csv").string(), (dir / "report.json").string(),
                          (dir / prediction_file_name(kind)).string(), (dir / "model.ckpt").string()};
      manifest.finish();
      write_manifest(manifest, dir / "manifest.json");
    } else if (*ev) {
      manifest.command = "evaluate";
      const TaskKind kind = parse_task_kind(ev_task);
      const auto report = evaluate_predictions(load_task_dataset(ev_gold, kind), load_task_dataset(ev_pred, kind));
      manifest.config = {{"task", ev_task}};
      if (ev_out.empty()) {
        out << report.dump(2) << "\n";
      } else {
        std::ofstream(ev_out) << report.dump(2) << "\n";
        manifest.add_input(ev_gold);
        manifest.add_input(ev_pred);
        manifest.outputs = {ev_out};
        manifest.finish();
        write_manifest(manifest, sibling_manifest(ev_out));
      }
    } else if (*be) {
      manifest.command = "bench";
      be_opt.phase = parse_bench_phase(be_phase);
      be_opt.base = be_base;
      std::vector<NamedConfig> configs;
      for (const auto& c : be_configs) configs.push_back({c, resolve_model(c)});
      const auto results = run_speed_bench(configs, be_opt);
      std::ostringstream csv;
      write_bench_csv(csv, results);
      const NamedConfig* base = nullptr;
      for (const auto& c : configs) {
        if (c.name == be_base) base = &c;
      }
      for (const auto& r : results) {
        if (r.unstable) err << "forge: warning: " << r.config << " batch " << r.batch << " timing unstable (cv " << r.cv << ")\n";
      }
      manifest.seed = be_opt.seed;
      manifest.config = {{"phase", be_phase},     {"seq_len", be_opt.seq_len}, {"reps", be_opt.repetitions},
                         {"warmup", be_opt.warmup}, {"batches", be_opt.batches}, {"configs", be_configs},
                         {"base", be_base},       {"threads", num_threads()}};
      if (be_out.empty()) {
        out << csv.str();
      } else {
        std::ofstream(be_out) << csv.str();
        for (const auto& r : results) {
          char buf[200];
          const double est = base ? static_cast<double>(estimate_macs(base->config, r.seq_len)) /
                                        static_cast<double>(estimate_macs(resolve_model(r.config), r.seq_len))
                                  : 0.0;
          std::snprintf(buf, sizeof(buf), "%s %s batch %zu: %.2f examples/s, speedup %.2f (MAC estimate %.2f)",
                        r.config.c_str(), be_phase.c_str(), r.batch, r.examples_per_sec, r.speedup_vs_base, est);
          out << buf << "\n";
        }
        manifest.outputs = {be_out};
        manifest.finish();
        write_manifest(manifest, sibling_manifest(be_out));
      }
    } else if (*sw) {
      manifest.command = "sweep";
      sw_opt.task = parse_task_kind(sw_task);
      for (const auto& cell : sw_cells) {
        const auto x = cell.find('x');
        if (x == std::string::npos) throw InvalidArgument("cell \"" + cell + "\" is not LxH");
        sw_opt.cells.emplace_back(std::stoul(cell.substr(0, x)), std::stoul(cell.substr(x + 1)));
      }
      if (sw_protocol.empty()) {
        sw_opt.protocol.batch_sizes = {8};
        sw_opt.protocol.learning_rates = {1e-3f};
        sw_opt.protocol.max_epochs = 3;
        sw_opt.protocol.seeds = {sw_opt.seed};
      } else {
        sw_opt.protocol = load_protocol(sw_protocol);
        manifest.add_input(sw_protocol);
      }
      manifest.seed = sw_opt.seed;
      manifest.config = {{"task", sw_task},         {"cells", sw_opt.cells},
                         {"depths", sw_opt.depths}, {"widths", sw_opt.widths},
                         {"budget", sw_opt.budget}, {"pretrain_steps", sw_opt.pretrain_steps},
                         {"examples", sw_opt.toy_examples}, {"protocol", sw_opt.protocol}};
      const fs::path dir(sw_out);
      fs::create_directories(dir);
      const auto report = sweep_depth_width(sw_opt, dir);
      std::ostringstream csv;
      write_sweep_csv(csv, report);
      std::ofstream(dir / "sweep.csv") << csv.str();
      auto pairs = nlohmann::json::array();
      for (const auto& p : report.iso_pairs) {
        pairs.push_back({{"deep", {report.rows[p.deep].layers, report.rows[p.deep].hidden}},
                         {"wide", {report.rows[p.wide].layers, report.rows[p.wide].hidden}},
                         {"param_ratio", p.param_ratio},
                         {"score_delta", p.score_delta}});
      }
      std::ofstream(dir / "iso_pairs.json") << pairs.dump(2) << "\n";
      out << csv.str();
      manifest.outputs = {(dir / "sweep.csv").string(), (dir / "iso_pairs.json").string()};
      manifest.finish();
      write_manifest(manifest, dir / "manifest.json");
    } else if (*pc) {
      manifest.command = "param-count";
      if (pc_preset.empty() && pc_config.empty()) throw InvalidArgument("param-count needs --preset or --config");
      const std::string name = pc_preset.empty() ? pc_config : pc_preset;
      const ModelConfig config = resolve_model(name);
      const auto count = param_count(config, pc_heads);
      out << name << ": " << count << " parameters";
      const auto nominal = pc_preset.empty() ? std::nullopt : preset_nominal_params(pc_preset);
      if (nominal && !pc_heads) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " (≈%s, %+.2f%%)", millions(*nominal).c_str(),
                      100.0 * (static_cast<double>(count) - static_cast<double>(*nominal)) / static_cast<double>(*nominal));
        out << buf;
      } else {
        out << " (≈" << millions(count) << ")";
      }
      out << "\n";
      if (!pc_manifest.empty()) {
        manifest.config = {{"model", config}, {"with_heads", pc_heads}};
        if (!pc_config.empty()) manifest.add_input(pc_config);
        manifest.finish();
        write_manifest(manifest, pc_manifest);
      }
    }
  } catch (const std::exception& e) {
    err << "forge: error: " << first_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace forge::cli
