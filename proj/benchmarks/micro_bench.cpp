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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "forge/autograd.hpp"
#include "forge/corpus.hpp"
#include "forge/encoder.hpp"
#include "forge/ops.hpp"
#include "forge/rng.hpp"
#include "forge/wordpiece.hpp"

namespace {

using namespace forge;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
  return t;
}

std::vector<std::string> sentences(std::size_t n) {
  static const char* kWords[] = {"EGFR", "mutations", "in", "non-small", "cell", "lung", "cancer", "respond",
                                 "to",   "gefitinib", "and", "erlotinib", "while", "KRAS", "variants", "resist"};
  Rng rng(3);
  std::vector<std::string> out;
  for (std::size_t s = 0; s < n; ++s) {
    std::string line;
    for (int w = 0; w < 14; ++w) line += std::string(w ? " " : "") + kWords[rng.below(std::size(kWords))];
    out.push_back(line + ".");
  }
  return out;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  NoGradGuard guard;
  Variable a(random_tensor({n, n}, 1)), b(random_tensor({n, n}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b).value().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(128)->Arg(512);

void BM_EncoderForward(benchmark::State& state) {
  const auto seq = static_cast<std::size_t>(state.range(0));
  ModelConfig c = make_config(4, 256, 4, 8000, 512);
  EncoderModel model(c, 1);
  Rng rng(2);
  std::vector<std::int32_t> ids(seq);
  for (auto& id : ids) id = static_cast<std::int32_t>(5 + rng.below(c.vocab_size - 5));
  const std::vector<std::vector<std::int32_t>> rows{ids}, segments{std::vector<std::int32_t>(seq, 0)};
  const auto batch = EncoderBatch::pack(rows, segments, 0);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch, false).cls.value().data());
}
BENCHMARK(BM_EncoderForward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Tokenize(benchmark::State& state) {
  const auto corpus = sentences(200);
  const auto vocab = train_vocabulary(corpus, 300).vocab;
  std::size_t bytes = 0;
  for (const auto& s : corpus) bytes += s.size();
  for (auto _ : state) {
    for (const auto& s : corpus) benchmark::DoNotOptimize(tokenize(s, vocab).size());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_Tokenize);

void BM_TrainVocabulary(benchmark::State& state) {
  const auto corpus = sentences(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train_vocabulary(corpus, 400).vocab.size());
}
BENCHMARK(BM_TrainVocabulary)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_WholeWordMasking(benchmark::State& state) {
  std::vector<Document> docs(8);
  const auto corpus = sentences(64);
  for (std::size_t i = 0; i < corpus.size(); ++i) docs[i % docs.size()].sentences.push_back(corpus[i]);
  const auto vocab = train_vocabulary(corpus, 300).vocab;
  const auto pairs = build_nsp_pairs(docs, vocab, {128, 1, 0.1});
  std::vector<UnmaskedInstance> framed;
  for (const auto& p : pairs) framed.push_back(frame_pair(p, vocab));
  std::uint32_t dup = 0;
  for (auto _ : state) {
    for (const auto& f : framed) benchmark::DoNotOptimize(apply_whole_word_masking(f, vocab, {0.15, 20, 7}, dup));
    ++dup;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * framed.size()));
}
BENCHMARK(BM_WholeWordMasking);

}  // namespace

BENCHMARK_MAIN();
