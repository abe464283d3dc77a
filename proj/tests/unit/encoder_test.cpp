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

#include "forge/error.hpp"
#include "forge/grad_check.hpp"
#include "forge/heads.hpp"
#include "forge/ops.hpp"
#include "forge/pretrain.hpp"
#include "forge/rng.hpp"

namespace forge {
namespace {

ModelConfig tiny(std::size_t layers = 1, std::size_t hidden = 8, std::size_t heads = 2) {
  ModelConfig c = make_config(layers, hidden, heads, 23, 16);
  c.dropout = 0.0f;
  return c;
}

std::uint64_t numel_sum(std::span<const Parameter> params) {
  std::uint64_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

EncoderBatch sample_batch() {
  std::vector<std::vector<std::int32_t>> ids{{2, 7, 9, 11, 3}, {2, 5, 3}};
  std::vector<std::vector<std::int32_t>> segs{{0, 0, 0, 1, 1}, {0, 0, 0}};
  return EncoderBatch::pack(ids, segs, 0);
}

TEST(ParamCount, PresetsNearPublishedBudgets) {
  EXPECT_EQ(param_count(bioformer_8l_config(), false), 42'260'480u);
  EXPECT_EQ(param_count(bioformer_16l_config(), false), 41'369'088u);
  EXPECT_EQ(param_count(bert_base_config(), false), 107'719'680u);
  EXPECT_NEAR(param_count(bioformer_8l_config(), false) / 43e6, 1.0, 0.03);
  EXPECT_NEAR(param_count(bioformer_16l_config(), false) / 42e6, 1.0, 0.03);
  EXPECT_NEAR(param_count(bert_base_config(), false) / 110e6, 1.0, 0.03);
}

TEST(ParamCount, DegenerateConfigIsEmbeddingsAndNorm) {
  ModelConfig c;
  c.layers = 0;
  c.hidden = 1;
  c.heads = 1;
  c.intermediate = 4;
  c.vocab_size = 1;
  c.max_positions = 5;
  c.type_vocab_size = 2;
  EXPECT_EQ(param_count(c, false), (1u + 5u + 2u) * 1u + 2u);
}

TEST(ParamCount, MatchesInstantiatedModules) {
  for (auto c : {tiny(), tiny(3, 12, 3), make_config(2, 16, 4, 50, 32)}) {
    PretrainModel m(c, 1);
    EXPECT_EQ(numel_sum(m.encoder.parameters()), param_count(c, false));
    EXPECT_EQ(numel_sum(m.parameters()), param_count(c, true));
  }
}

TEST(ModelConfig, RejectsIndivisibleHeads) {
  EXPECT_THROW(make_config(2, 10, 3, 100, 16), InvalidArgument);
  EXPECT_EQ(preset_config("bioformer-16L")->heads, 6u);
  EXPECT_FALSE(preset_config("bert-large").has_value());
}

TEST(Encoder, ClsOnlyInputShape) {
  EncoderModel m(tiny(), 3);
  std::vector<std::int32_t> ids{2}, segs{0};
  auto out = m.forward(EncoderBatch::single(ids, segs), false);
  EXPECT_EQ(out.sequence.shape(), (Shape{1, 8}));
  EXPECT_EQ(out.cls.shape(), (Shape{1, 8}));
}

TEST(Encoder, DeterministicForward) {
  EncoderModel a(tiny(2, 8, 2), 4), b(tiny(2, 8, 2), 4);
  auto batch = sample_batch();
  EXPECT_TRUE(bitwise_equal(a.forward(batch, false).sequence.value(), a.forward(batch, false).sequence.value()));
  EXPECT_TRUE(bitwise_equal(a.forward(batch, false).sequence.value(), b.forward(batch, false).sequence.value()));
}

TEST(Encoder, PaddingDoesNotChangeRealPositions) {
  EncoderModel m(tiny(2, 8, 2), 5);
  std::vector<std::int32_t> ids{2, 7, 9, 3}, segs{0, 0, 0, 0};
  auto ref = m.forward(EncoderBatch::single(ids, segs), false).sequence.value();
  for (std::size_t pad : {1, 4, 9}) {
    auto padded_ids = ids;
    auto padded_segs = segs;
    padded_ids.resize(ids.size() + pad, 0);
    padded_segs.resize(ids.size() + pad, 0);
    EncoderBatch batch = EncoderBatch::single(padded_ids, padded_segs);
    for (std::size_t i = ids.size(); i < padded_ids.size(); ++i) batch.attention_mask[i] = 0;
    auto out = m.forward(batch, false).sequence.value();
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-5) << pad;
  }
}

TEST(Encoder, ValidatesInputs) {
  EncoderModel m(tiny(), 1);
  std::vector<std::int32_t> too_long(17, 5), segs17(17, 0);
  EXPECT_THROW(m.forward(EncoderBatch::single(too_long, segs17), false), InvalidArgument);
  std::vector<std::int32_t> bad_id{2, 23}, segs2{0, 0}, bad_seg{0, 2};
  EXPECT_THROW(m.forward(EncoderBatch::single(bad_id, segs2), false), InvalidArgument);
  std::vector<std::int32_t> ok{2, 5};
  EXPECT_THROW(m.forward(EncoderBatch::single(ok, bad_seg), false), InvalidArgument);
  ModelConfig c = tiny();
  c.dropout = 0.1f;
  EncoderModel d(c, 1);
  EXPECT_THROW(d.forward(EncoderBatch::single(ok, segs2), true, nullptr), InvalidArgument);
}

TEST(Encoder, DropoutOnlyWhenTraining) {
  ModelConfig c = tiny();
  c.dropout = 0.3f;
  EncoderModel m(c, 1);
  auto batch = sample_batch();
  Rng r1(1), r2(2);
  auto eval = m.forward(batch, false).sequence.value();
  auto t1 = m.forward(batch, true, &r1).sequence.value();
  auto t2 = m.forward(batch, true, &r2).sequence.value();
  EXPECT_FALSE(bitwise_equal(t1, t2));
  EXPECT_FALSE(bitwise_equal(eval, t1));
}

TEST(Encoder, GradCheckWithEveryHead) {
  const auto c = tiny(1, 8, 2);
  PretrainModel m(c, 7);
  TokenClassifierHead tok(c, 3, 8);
  SequenceClassifierHead seq(c, 4, 9);
  QaSpanHead qa(c, 10);
  auto batch = sample_batch();
  const std::vector<std::size_t> masked{1, 3, 6};
  const std::vector<std::int32_t> mlm_targets{4, 17, 9};
  const std::vector<std::int32_t> nsp_targets{0, 1};
  const std::vector<std::int32_t> tok_targets{ops::kIgnoreIndex, 0, 2, 1, ops::kIgnoreIndex,
                                              ops::kIgnoreIndex, 1, ops::kIgnoreIndex, ops::kIgnoreIndex,
                                              ops::kIgnoreIndex};
  const std::vector<std::int32_t> seq_targets{3, 1};
  const std::vector<std::int32_t> starts{2, 1}, ends{3, 1};
  auto loss = [&] {
    auto out = m.encoder.forward(batch, false);
    auto l = ops::cross_entropy(m.mlm.logits(ops::gather_rows(out.sequence, masked)), mlm_targets);
    l = ops::add(l, ops::cross_entropy(m.nsp.logits(out.cls), nsp_targets));
    l = ops::add(l, ops::cross_entropy(tok.logits(out.sequence, false, nullptr), tok_targets));
    l = ops::add(l, ops::cross_entropy(seq.logits(out.cls, false, nullptr), seq_targets));
    auto span = qa.logits(out.sequence, batch.batch, batch.seq_len);
    l = ops::add(l, ops::cross_entropy(span.start, starts));
    return ops::add(l, ops::cross_entropy(span.end, ends));
  };
  std::vector<Parameter> all = m.parameters();
  for (const Module* h : std::initializer_list<const Module*>{&tok, &seq, &qa}) {
    all.insert(all.end(), h->parameters().begin(), h->parameters().end());
  }
  // Initial weights give gradients near f32 noise; check at a random point instead.
  Rng rng(5);
  for (auto& p : all) {
    Tensor& v = p.var.mutable_value();
    const float centre = p.name.ends_with("gamma") ? 1.0f : 0.0f;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = centre + 0.5f * static_cast<float>(rng.normal());
  }
  // Softmax over keys and over span positions ignores a constant shift, so
  // these two gradients vanish identically.
  std::vector<Parameter> params;
  for (const auto& p : all) {
    if (p.name.ends_with("key.bias") || p.name == "qa_span.bias") continue;
    params.push_back(p);
  }
  GradCheckOptions opt;
  opt.stencil = 32;
  auto report = grad_check(loss, params, opt);
  for (const auto& e : report.entries) EXPECT_TRUE(e.passed) << e.name << " rel " << e.relative_error;
  EXPECT_LE(report.max_relative_error, 1e-3);
  for (auto& p : all) p.var.zero_grad();
  loss().backward();
  for (const auto& p : all) {
    if (!p.name.ends_with("key.bias") && p.name != "qa_span.bias") continue;
    const Tensor g = p.var.grad();
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 0.0f, 1e-5f) << p.name;
  }
}

TEST(Heads, MlmOutputIsTiedToEmbeddings) {
  PretrainModel m(tiny(), 2);
  bool found_output_weight = false;
  for (const auto& p : m.mlm.parameters()) found_output_weight |= p.var.value().size() == 23 * 8;
  EXPECT_FALSE(found_output_weight);
  Variable h(Tensor({2, 8}, 0.1f));
  EXPECT_EQ(m.mlm.logits(h).shape(), (Shape{2, 23}));
}

TEST(Heads, UntrainedNspIsNearChance) {
  PretrainModel m(tiny(), 2);
  auto out = m.encoder.forward(sample_batch(), false);
  std::vector<std::int32_t> labels{0, 1};
  EXPECT_NEAR(ops::cross_entropy(m.nsp.logits(out.cls), labels).value().item(), std::log(2.0), 0.1);
}

TEST(Module, SnapshotRestore) {
  EncoderModel m(tiny(), 1);
  auto snap = m.snapshot();
  for (auto& p : m.parameters()) p.var.mutable_value().fill(0.5f);
  m.restore(snap);
  auto again = m.snapshot();
  for (std::size_t i = 0; i < snap.size(); ++i) EXPECT_TRUE(bitwise_equal(snap[i], again[i]));
}

}  // namespace
}  // namespace forge
