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

#ifndef LAPFORGE_LOSSES_HPP_
#define LAPFORGE_LOSSES_HPP_

#include <span>

#include "lapforge/autodiff.hpp"
#include "lapforge/lap_core.hpp"

namespace lapforge {

struct LossConfig {
  // Weight of the positive (assigned) class in the cross entropy.
  double w = 0.9;
  // Weight of the constraint terms; the trainer ramps it per epoch.
  double alpha = 0.0;
  // Lower clamp for log arguments.
  double epsilon_log = 1e-12;
  // Ablation switches for the row/column-sum and row/column-norm terms.
  bool use_sum_constraint = true;
  bool use_norm_constraint = true;

  void validate() const;
};

// -sum_i [w g_i log y_i + (1 - w)(1 - g_i) log(1 - y_i)] over all edges.
// y is an (E x 1) column of predicted labels.
ad::Var balanced_bce(ad::Var y, std::span<const double> y_ref, const LossConfig& cfg);

// ||1 - row sums||_2 + ||1 - column sums||_2 of the dense score matrix.
ad::Var constraint_l1(ad::Var scores);
// ||1 - row 2-norms||_2 + ||1 - column 2-norms||_2.
ad::Var constraint_l2(ad::Var scores);

struct LossTerms {
  ad::Var total;
  ad::Var bce;
  ad::Var sum_constraint;   // L1
  ad::Var norm_constraint;  // L2
};

// bce + alpha * (L1 + L2), with ablated terms dropped from the sum.
LossTerms combined_loss(ad::Var y, std::span<const double> y_ref, ad::Var scores,
                        const LossConfig& cfg);

// Plain-value conveniences.
double balanced_bce(std::span<const double> y, std::span<const double> y_ref,
                    const LossConfig& cfg);
double constraint_l1(const ScoreMatrix& scores);
double constraint_l2(const ScoreMatrix& scores);

}  // namespace lapforge

#endif  // LAPFORGE_LOSSES_HPP_
