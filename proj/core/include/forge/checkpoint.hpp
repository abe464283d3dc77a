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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/autograd.hpp"
#include "forge/error.hpp"
#include "forge/model_config.hpp"

namespace forge {

struct CheckpointVersionError : FormatError {
  using FormatError::FormatError;
};
struct CheckpointTruncatedError : FormatError {
  using FormatError::FormatError;
};
struct UnknownTensorError : FormatError {
  using FormatError::FormatError;
};
struct MissingTensorError : FormatError {
  using FormatError::FormatError;
};
struct ConfigMismatchError : FormatError {
  using FormatError::FormatError;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Named tensors, the model config and free-form metadata.
struct Checkpoint {
  ModelConfig config;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor* find(std::string_view name) const;
  void add(std::string name, Tensor value);
  /// Appends copies of every parameter value, in order.
  void add_parameters(std::span<const Parameter> params);
};

/// Writes "FRGCKPT\0", u32 version, u64 header length, the JSON header and the
/// little-endian f32 payload. The file is replaced atomically.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into `params` by name. Every parameter must be present.
/// Checkpoint tensors whose names start with one of `ignored_prefixes` are
/// skipped; any other unmatched name raises UnknownTensorError.
void restore_parameters(const Checkpoint& ckpt, std::span<Parameter> params,
                        std::span<const std::string> ignored_prefixes = {});

/// Throws ConfigMismatchError naming the first differing field.
void require_config(const ModelConfig& expected, const ModelConfig& found);

}  // namespace forge
