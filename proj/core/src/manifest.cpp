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

#include "forge/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

std::string_view version() { return FORGE_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) { input_hashes[path.string()] = sha256_file(path); }

void RunManifest::start() {
  tool_version = std::string(version());
  started_at = utc_timestamp();
}

void RunManifest::finish() { finished_at = utc_timestamp(); }

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"command", m.command},           {"config", m.config},   {"input_hashes", m.input_hashes},
                     {"outputs", m.outputs},           {"seed", m.seed},       {"tool_version", m.tool_version},
                     {"started_at", m.started_at},     {"finished_at", m.finished_at}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.seed = j.at("seed").get<std::uint64_t>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << nlohmann::json(manifest).dump(2) << "\n";
  if (!out) throw IoError("write failed for manifest " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(in).get<RunManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> verify_inputs(const RunManifest& manifest) {
  std::vector<std::string> bad;
  for (const auto& [path, hash] : manifest.input_hashes) {
    if (!std::filesystem::exists(path) || sha256_file(path) != hash) bad.push_back(path);
  }
  return bad;
}

}  // namespace forge
