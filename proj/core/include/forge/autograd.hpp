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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "forge/tensor.hpp"

namespace forge {

/// Node in a dynamically recorded computation graph. A Variable is a shared
/// handle: copies refer to the same value and gradient.
class Variable {
 public:
  using BackwardFn = std::function<void(const Tensor& grad_output)>;

  Variable() = default;
  explicit Variable(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and finite-difference probes. Never mutate a
  /// value that is still referenced by a live graph you intend to backprop.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  /// Accumulated gradient; zeros of the value's shape if none accumulated.
  const Tensor& grad() const;
  void zero_grad();
  /// Adds g into this node's gradient buffer.
  void accumulate_grad(const Tensor& g) const;

  /// Reverse-mode sweep from this scalar (seed 1) or with an explicit seed.
  void backward();
  void backward(const Tensor& seed);

  /// Builds an op output. The backward closure is kept only when grad mode is
  /// enabled and at least one input requires a gradient.
  static Variable from_op(Tensor value, std::vector<Variable> inputs, BackwardFn backward);

  bool same_node(const Variable& other) const noexcept { return node_ == other.node_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Variable> inputs;
    BackwardFn backward;
  };
  std::shared_ptr<Node> node_;
};

/// Whether ops record backward closures on this thread.
bool grad_enabled();

/// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// A trainable tensor with a stable registry name.
struct Parameter {
  std::string name;
  Variable var;
  bool weight_decay = true;
};

}  // namespace forge
