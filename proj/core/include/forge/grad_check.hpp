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
#include <string>
#include <vector>

#include "forge/autograd.hpp"

namespace forge {

struct GradCheckOptions {
  /// Central-difference step.
  double epsilon = 1e-3;
  /// Maximum accepted relative error per parameter.
  double tolerance = 1e-3;
  /// Symmetric points +-k*epsilon for k = 1..stencil. 1 is the plain central
  /// difference; wider stencils take the slope of a least-squares cubic
  /// through the points, which averages down f32 rounding noise.
  std::size_t stencil = 1;
};

struct GradCheckEntry {
  std::string name;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the tensor.
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;

  bool passed() const;
  /// Names of the parameters that exceeded the tolerance.
  std::vector<std::string> failures() const;
};

/// Compares backprop gradients of the scalar `loss_fn()` against central
/// differences for every element of every parameter. The loss must be a
/// deterministic function of the parameter values.
GradCheckReport grad_check(const std::function<Variable()>& loss_fn, std::vector<Parameter> params,
                           const GradCheckOptions& options = {});

}  // namespace forge
