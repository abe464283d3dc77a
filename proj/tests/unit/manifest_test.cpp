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

#include "forge/hash.hpp"
#include "forge/manifest.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

TEST(Hash, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, RoundTripAndVerify) {
  testing::TempDir dir("manifest");
  testing::write_file(dir / "input.txt", "hello");
  RunManifest m;
  m.command = "train-vocab";
  m.config = {{"size", 10}};
  m.seed = 7;
  m.start();
  m.add_input(dir / "input.txt");
  m.outputs = {(dir / "vocab.txt").string()};
  m.finish();
  EXPECT_EQ(m.tool_version, std::string(version()));
  write_manifest(m, dir / "manifest.json");
  auto back = read_manifest(dir / "manifest.json");
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.input_hashes, m.input_hashes);
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(back.started_at.size(), 20u);
  EXPECT_TRUE(verify_inputs(back).empty());
  testing::write_file(dir / "input.txt", "changed");
  EXPECT_EQ(verify_inputs(back).size(), 1u);
}

}  // namespace
}  // namespace forge
