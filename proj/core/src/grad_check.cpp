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

#include "forge/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "forge/error.hpp"

namespace forge {
namespace {

// Slope at 0 of the least-squares fit through (x, y). Two points give the
// central difference; more points fit a cubic so the O(x^2) truncation term
// cancels while rounding noise averages down.
double fitted_slope(const std::vector<std::pair<double, double>>& points, double scale) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index degree = n <= 2 ? 1 : (n < 12 ? 3 : 5);
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = points[static_cast<std::size_t>(r)].first / scale;
    double pw = 1.0;
    for (Eigen::Index c = 0; c <= degree; ++c, pw *= u) a(r, c) = pw;
    y(r) = points[static_cast<std::size_t>(r)].second;
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
  return coef(1) / scale;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.passed) names.push_back(e.name);
  }
  return names;
}

GradCheckReport grad_check(const std::function<Variable()>& loss_fn, std::vector<Parameter> params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  if (params.empty()) return report;
  if (options.stencil == 0) throw InvalidArgument("grad_check: stencil must be at least 1");

  for (auto& p : params) p.var.zero_grad();
  {
    Variable loss = loss_fn();
    if (loss.value().size() != 1) throw ShapeError("grad_check: loss must be a scalar");
    loss.backward();
  }

  auto eval = [&] {
    NoGradGuard guard;
    return static_cast<double>(loss_fn().value().item());
  };

  for (auto& p : params) {
    const Tensor analytic = p.var.grad();
    Tensor& value = p.var.mutable_value();
    double diff_sq = 0.0;
    double analytic_sq = 0.0;
    double numeric_sq = 0.0;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float original = value[i];
      // Least-squares slope over the representable points actually visited,
      // so rounding of x +- k*eps cancels.
      std::vector<std::pair<double, double>> points;
      for (std::size_t k = 1; k <= options.stencil; ++k) {
        for (const double sign : {1.0, -1.0}) {
          value[i] = static_cast<float>(original + sign * options.epsilon * static_cast<double>(k));
          const double x = static_cast<double>(value[i]) - static_cast<double>(original);
          points.emplace_back(x, eval());
        }
      }
      value[i] = original;
      const double numeric = fitted_slope(points, options.epsilon);
      const double a = analytic[i];
      diff_sq += (a - numeric) * (a - numeric);
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(a - numeric));
    }
    GradCheckEntry entry;
    entry.name = p.name;
    const double denom = std::max(std::sqrt(analytic_sq), std::sqrt(numeric_sq));
    entry.relative_error = denom > 0.0 ? std::sqrt(diff_sq) / denom : 0.0;
    entry.max_abs_error = max_abs;
    entry.passed = entry.relative_error <= options.tolerance;
    report.max_relative_error = std::max(report.max_relative_error, entry.relative_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace forge
