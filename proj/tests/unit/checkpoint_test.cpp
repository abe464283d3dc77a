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

#include <fstream>

#include "forge/checkpoint.hpp"
#include "forge/pretrain.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

ModelConfig tiny() { return make_config(1, 8, 2, 30, 16); }

Checkpoint model_checkpoint(const PretrainModel& m) {
  Checkpoint c;
  c.config = m.encoder.config();
  c.metadata["note"] = "unit";
  c.add_parameters(m.parameters());
  return c;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  testing::TempDir dir("ckpt");
  PretrainModel m(tiny(), 3);
  auto ckpt = model_checkpoint(m);
  save_checkpoint(ckpt, dir / "m.ckpt");
  auto loaded = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(loaded.config, ckpt.config);
  EXPECT_EQ(loaded.metadata, ckpt.metadata);
  ASSERT_EQ(loaded.tensors.size(), ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    EXPECT_EQ(loaded.tensors[i].name, ckpt.tensors[i].name);
    EXPECT_TRUE(bitwise_equal(loaded.tensors[i].value, ckpt.tensors[i].value));
  }
  save_checkpoint(loaded, dir / "again.ckpt");
  EXPECT_EQ(testing::read_file(dir / "m.ckpt"), testing::read_file(dir / "again.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
}

TEST(Checkpoint, RestoreIntoFreshModel) {
  testing::TempDir dir("ckpt");
  PretrainModel a(tiny(), 3), b(tiny(), 99);
  save_checkpoint(model_checkpoint(a), dir / "a.ckpt");
  load_pretrained(b, load_checkpoint(dir / "a.ckpt"));
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(bitwise_equal(pa[i].var.value(), pb[i].var.value()));
}

TEST(Checkpoint, TruncationDetected) {
  testing::TempDir dir("ckpt");
  PretrainModel m(tiny(), 3);
  save_checkpoint(model_checkpoint(m), dir / "m.ckpt");
  auto bytes = testing::read_file(dir / "m.ckpt");
  testing::write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CheckpointTruncatedError);
  testing::write_file(dir / "tiny.ckpt", bytes.substr(0, 10));
  EXPECT_THROW(load_checkpoint(dir / "tiny.ckpt"), FormatError);
  testing::write_file(dir / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), FormatError);
}

TEST(Checkpoint, VersionAndMagicChecked) {
  testing::TempDir dir("ckpt");
  PretrainModel m(tiny(), 3);
  save_checkpoint(model_checkpoint(m), dir / "m.ckpt");
  auto bytes = testing::read_file(dir / "m.ckpt");
  auto bumped = bytes;
  bumped[8] = 2;
  testing::write_file(dir / "v2.ckpt", bumped);
  EXPECT_THROW(load_checkpoint(dir / "v2.ckpt"), CheckpointVersionError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  testing::write_file(dir / "magic.ckpt", bad_magic);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), FormatError);
}

TEST(Checkpoint, ConfigMismatchBetweenPresets) {
  testing::TempDir dir("ckpt");
  Checkpoint c;
  c.config = bioformer_8l_config();
  c.add("embeddings.norm.gamma", Tensor({512}, 1.0f));
  save_checkpoint(c, dir / "8l.ckpt");
  auto loaded = load_checkpoint(dir / "8l.ckpt");
  EXPECT_THROW(require_config(bioformer_16l_config(), loaded.config), ConfigMismatchError);
  EXPECT_NO_THROW(require_config(bioformer_8l_config(), loaded.config));
}

TEST(Checkpoint, UnknownAndMissingTensors) {
  PretrainModel m(tiny(), 3);
  auto ckpt = model_checkpoint(m);
  auto params = m.parameters();
  auto extra = ckpt;
  extra.add("mystery.weight", Tensor({2}, 0.0f));
  EXPECT_THROW(restore_parameters(extra, params), UnknownTensorError);
  std::vector<std::string> ignore{"mystery."};
  EXPECT_NO_THROW(restore_parameters(extra, params, ignore));
  auto missing = ckpt;
  missing.tensors.pop_back();
  EXPECT_THROW(restore_parameters(missing, params), MissingTensorError);
  auto reshaped = ckpt;
  reshaped.tensors[0].value = Tensor({1}, 0.0f);
  EXPECT_THROW(restore_parameters(reshaped, params), FormatError);
}

}  // namespace
}  // namespace forge
