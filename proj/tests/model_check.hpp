// Copyright 2026 The lapforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAPFORGE_TESTS_MODEL_CHECK_HPP_
#define LAPFORGE_TESTS_MODEL_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lapforge/bigraph.hpp"
#include "lapforge/glan_model.hpp"
#include "lapforge/losses.hpp"
#include "lapforge/solvers.hpp"
#include "test_util.hpp"

namespace lapforge::testing {

struct GradientCheck {
  // Literal metric: |analytic - central| / (|analytic| + 1e-8) at step h.
  double worst = 0.0;
  std::string worst_name;
  std::size_t literal_failures = 0;
  // Coordinates that also fail the kink- and rounding-aware recheck.
  std::size_t unresolved = 0;
  std::string unresolved_name;
  std::size_t checked = 0;
};

inline double model_loss(const GlanModel& model, const CostMatrix& cost,
                         const std::vector<double>& truth, const LossConfig& cfg) {
  ad::Tape tape(false);
  const ForwardPass pass = model.forward(tape, cost);
  return combined_loss(pass.labels, truth, pass.scores, cfg).total.value()[0];
}

// Moves every bias off zero so that ReLU inputs built from zero-initialized
// node states do not sit exactly on the kink.
inline void randomize_biases(GlanModel& model, ad::Rng& rng, double scale = 0.5) {
  for (auto& [name, tensor] : model.parameters().named_tensors()) {
    if (name.size() < 5 || name.compare(name.size() - 5, 5, ".bias") != 0) continue;
    for (std::size_t i = 0; i < tensor->numel(); ++i) (*tensor)[i] = rng.uniform(-scale, scale);
  }
}

inline double literal_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
}

inline GradientCheck check_model_gradients(GlanModel& model, const CostMatrix& cost,
                                           const LossConfig& cfg, double h = 1e-6) {
  const Permutation opt = hungarian_permutation(cost);
  const std::vector<double> truth =
      ground_truth_labels(build_graph(cost, model.config().t), opt).labels;
  model.parameters().zero_grad();
  {
    ad::Tape tape;
    const ForwardPass pass = model.forward(tape, cost);
    tape.backward(combined_loss(pass.labels, truth, pass.scores, cfg).total);
  }
  const double base = model_loss(model, cost, truth, cfg);
  // Central differences cannot resolve below a few ulps of the loss.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base));
  GradientCheck out;
  for (auto& [name, tensor] : model.parameters().named_tensors()) {
    const std::vector<double> analytic = tensor->grad();
    for (std::size_t i = 0; i < tensor->numel(); ++i) {
      const double x = (*tensor)[i];
      auto at = [&](double v) {
        (*tensor)[i] = v;
        const double l = model_loss(model, cost, truth, cfg);
        (*tensor)[i] = x;
        return l;
      };
      const double a = analytic[i];
      const double up = at(x + h);
      const double down = at(x - h);
      const double err = literal_error(a, (up - down) / (2.0 * h));
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.worst_name = name + "[" + std::to_string(i) + "]";
      }
      if (err < 1e-4) continue;
      ++out.literal_failures;
      auto close = [&](double numeric, double step) {
        return std::abs(a - numeric) <= std::max(1e-4 * std::abs(a), floor / step);
      };
      bool ok = close((up - down) / (2.0 * h), h);
      // A kink inside [x - h, x + h]: the analytic value must match a one-sided
      // slope, or the central difference at a smaller step.
      ok = ok || close((up - base) / h, h) || close((base - down) / h, h);
      for (double small = h / 10.0; !ok && small >= h / 100.0; small /= 10.0) {
        const double u = at(x + small), d = at(x - small);
        ok = close((u - d) / (2.0 * small), small) || close((u - base) / small, small) ||
             close((base - d) / small, small);
      }
      if (!ok && out.unresolved++ == 0) out.unresolved_name = name + "[" + std::to_string(i) + "]";
    }
  }
  return out;
}

}  // namespace lapforge::testing

#endif  // LAPFORGE_TESTS_MODEL_CHECK_HPP_
