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
#include <span>
#include <vector>

#include "forge/autograd.hpp"

namespace forge {

struct AdamWConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-6f;
  float weight_decay = 0.01f;
};

/// Per-parameter moments and the shared step counter.
struct OptimizerState {
  AdamWConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One decoupled-weight-decay Adam update with bias correction, in place.
/// grads[i] pairs with params[i]; `lr` overrides config.lr for scheduled runs.
/// Throws DivergenceError when a gradient contains NaN or Inf.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                std::span<const bool> decay, OptimizerState& state, float lr);

/// Convenience wrapper over Parameters that reads their accumulated gradients.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) { state_.config = config; }

  void step(std::span<Parameter> params, float lr);
  void step(std::span<Parameter> params) { step(params, state_.config.lr); }

  OptimizerState& state() noexcept { return state_; }
  const OptimizerState& state() const noexcept { return state_; }

 private:
  OptimizerState state_;
};

/// Linear warmup to the peak rate, then linear decay towards zero.
class LinearWarmupDecay {
 public:
  LinearWarmupDecay(float peak_lr, std::int64_t warmup_steps, std::int64_t total_steps);

  /// Learning rate applied by the update with 0-based index `step`.
  float at(std::int64_t step) const;

 private:
  float peak_;
  std::int64_t warmup_;
  std::int64_t total_;
};

}  // namespace forge
