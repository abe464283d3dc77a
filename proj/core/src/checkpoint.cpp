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

#include "forge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace forge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'R', 'G', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos, const std::string& what) {
  if (in.size() - pos < sizeof(T)) throw CheckpointTruncatedError("checkpoint truncated in " + what);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void Checkpoint::add(std::string name, Tensor value) {
  if (find(name)) throw InvalidArgument("duplicate checkpoint tensor " + name);
  tensors.push_back({std::move(name), std::move(value)});
}

void Checkpoint::add_parameters(std::span<const Parameter> params) {
  for (const auto& p : params) add(p.name, p.var.value());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = ckpt.config;
  header["metadata"] = ckpt.metadata;
  auto dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    dir.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}});
    offset += t.value.size() * sizeof(float);
  }
  header["tensors"] = dir;
  header["payload_bytes"] = offset;
  const std::string header_text = header.dump();

  std::string blob(kMagic, sizeof(kMagic));
  put<std::uint32_t>(blob, kCheckpointVersion);
  put<std::uint64_t>(blob, header_text.size());
  blob += header_text;
  blob.reserve(blob.size() + offset);
  for (const auto& t : ckpt.tensors) {
    blob.append(reinterpret_cast<const char*>(t.value.ptr()), t.value.size() * sizeof(float));
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string() + " (disk full?)");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < sizeof(kMagic)) throw CheckpointTruncatedError("checkpoint truncated in magic bytes");
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError(path.string() + " is not a checkpoint");
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(blob, pos, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(blob, pos, "header length");
  if (blob.size() - pos < header_len) throw CheckpointTruncatedError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    ckpt.config = header.at("config").get<ModelConfig>();
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
    const auto payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    if (blob.size() - pos < payload_bytes) throw CheckpointTruncatedError("checkpoint truncated in tensor payload");
    if (blob.size() - pos > payload_bytes) throw FormatError("checkpoint has trailing bytes");
    for (const auto& entry : header.at("tensors")) {
      auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t bytes = shape_numel(shape) * sizeof(float);
      if (offset > payload_bytes || payload_bytes - offset < bytes) {
        throw FormatError("tensor " + entry.at("name").get<std::string>() + " lies outside the payload");
      }
      Tensor t(std::move(shape));
      std::memcpy(t.ptr(), blob.data() + pos + offset, bytes);
      ckpt.add(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, std::span<Parameter> params,
                        std::span<const std::string> ignored_prefixes) {
  std::unordered_map<std::string_view, Parameter*> by_name;
  for (auto& p : params) by_name.emplace(p.name, &p);
  std::size_t matched = 0;
  for (const auto& t : ckpt.tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) {
      bool ignored = false;
      for (const auto& prefix : ignored_prefixes) ignored = ignored || t.name.starts_with(prefix);
      if (!ignored) throw UnknownTensorError("checkpoint tensor " + t.name + " matches no parameter");
      continue;
    }
    if (it->second->var.shape() != t.value.shape()) {
      throw ConfigMismatchError("tensor " + t.name + " has shape " + shape_str(t.value.shape()) + ", model expects " +
                                shape_str(it->second->var.shape()));
    }
    it->second->var.mutable_value() = t.value;
    ++matched;
  }
  if (matched != params.size()) {
    for (const auto& p : params) {
      if (!ckpt.find(p.name)) throw MissingTensorError("checkpoint lacks tensor " + p.name);
    }
  }
}

void require_config(const ModelConfig& expected, const ModelConfig& found) {
  auto check = [](const char* field, auto a, auto b) {
    if (a != b) {
      throw ConfigMismatchError(std::string("config mismatch in ") + field + ": model " + std::to_string(a) +
                                ", checkpoint " + std::to_string(b));
    }
  };
  check("layers", expected.layers, found.layers);
  check("hidden", expected.hidden, found.hidden);
  check("heads", expected.heads, found.heads);
  check("intermediate", expected.intermediate, found.intermediate);
  check("vocab_size", expected.vocab_size, found.vocab_size);
  check("max_positions", expected.max_positions, found.max_positions);
  check("type_vocab_size", expected.type_vocab_size, found.type_vocab_size);
  check("layer_norm_eps", expected.layer_norm_eps, found.layer_norm_eps);
  check("dropout", expected.dropout, found.dropout);
}

}  // namespace forge
