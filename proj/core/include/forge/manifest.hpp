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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace forge {

/// Library version string.
std::string_view version();

/// Record of one command invocation: what ran, on which inputs, with which seed.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_hashes;  // path -> SHA-256 hex
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_at;  // UTC, ISO 8601
  std::string finished_at;

  /// Hashes `path` and records it under its string form.
  void add_input(const std::filesystem::path& path);
  void start();
  void finish();
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Paths whose current SHA-256 differs from the record (or that are missing).
std::vector<std::string> verify_inputs(const RunManifest& manifest);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace forge
