// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mal/param_store.hpp"

namespace mal {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares the reverse-mode gradient of a scalar function of `params` with
/// central differences (f(θ+h) − f(θ−h)) / 2h, element by element. The
/// relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
inline GradCheckReport grad_check(const std::function<Tensor<double>(ParamStore<double>&)>& f,
                                  ParamStore<double>& params, double h) {
  params.zero_grad();
  f(params).backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& e : params.entries()) {
    if (e.tensor.has_grad()) {
      analytic.emplace_back(e.tensor.grad().begin(), e.tensor.grad().end());
    } else {
      analytic.emplace_back(e.tensor.size(), 0.0);
    }
  }
  params.zero_grad();

  GradCheckReport report;
  NoGradGuard no_grad;
  auto& entries = params.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto values = entries[p].tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f(params).item();
      values[i] = saved - h;
      const double down = f(params).item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NonFiniteError("grad_check: non-finite objective at " + entries[p].name);
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = entries[p].name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace mal
