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

#include "forge/optim.hpp"

#include <cmath>
#include <memory>

#include "forge/error.hpp"

namespace forge {

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                std::span<const bool> decay, OptimizerState& state, float lr) {
  if (params.size() != grads.size() || params.size() != decay.size()) {
    throw InvalidArgument("adamw_step: params, grads and decay flags differ in length");
  }
  if (!(lr > 0.0f)) throw InvalidArgument("adamw_step: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw ShapeError("adamw_step: parameter " + shape_str(params[i]->shape()) + " vs gradient " +
                       shape_str(grads[i]->shape()));
    }
    if (!grads[i]->all_finite()) throw DivergenceError("adamw_step: non-finite gradient for parameter " + std::to_string(i));
  }
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw InvalidArgument("adamw_step: optimizer state tracks a different parameter set");
  }

  const AdamWConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta1), t));
  const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != p.shape()) throw ShapeError("adamw_step: moment shape does not match parameter");
    const float wd = decay[i] ? c.weight_decay : 0.0f;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0f - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0f - c.beta2) * g[j] * g[j];
      const float m_hat = m[j] / bc1;
      const float v_hat = v[j] / bc2;
      p[j] -= lr * (m_hat / (std::sqrt(v_hat) + c.eps) + wd * p[j]);
    }
  }
}

void AdamW::step(std::span<Parameter> params, float lr) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  std::unique_ptr<bool[]> decay(new bool[params.size()]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    values.push_back(&p.var.mutable_value());
    grads.push_back(&p.var.grad());
    decay[i] = p.weight_decay;
  }
  adamw_step(values, grads, std::span<const bool>(decay.get(), params.size()), state_, lr);
}

LinearWarmupDecay::LinearWarmupDecay(float peak_lr, std::int64_t warmup_steps, std::int64_t total_steps)
    : peak_(peak_lr), warmup_(warmup_steps), total_(total_steps) {
  if (total_steps < 1) throw InvalidArgument("schedule needs at least one step");
  if (warmup_steps < 0 || warmup_steps > total_steps) {
    throw InvalidArgument("warmup steps must lie in [0, total steps]");
  }
}

float LinearWarmupDecay::at(std::int64_t step) const {
  if (step < warmup_) {
    return peak_ * static_cast<float>(step + 1) / static_cast<float>(warmup_);
  }
  const std::int64_t remaining = total_ - step;
  if (remaining <= 0) return 0.0f;
  return peak_ * static_cast<float>(remaining) / static_cast<float>(total_ - warmup_);
}

}  // namespace forge
