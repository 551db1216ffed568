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

#include "lapforge/losses.hpp"

#include <vector>

#include "lapforge/error.hpp"

namespace lapforge {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void LossConfig::validate() const {
  if (!(w > 0.0 && w < 1.0)) throw UsageError("positive-class weight w must lie in (0, 1)");
  if (!(alpha >= 0.0)) throw UsageError("alpha must be >= 0");
  if (!(epsilon_log > 0.0)) throw UsageError("epsilon_log must be > 0");
}

Var balanced_bce(Var y, std::span<const double> y_ref, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t rows = y.value().rows();
  const std::size_t cols = y.value().cols();
  if (rows * cols != y_ref.size()) {
    throw UsageError("balanced_bce: " + std::to_string(rows * cols) + " predictions vs " +
                     std::to_string(y_ref.size()) + " labels");
  }
  Tape& tape = *y.tape;
  const std::size_t m = y_ref.size();
  std::vector<double> pos(m), neg(m);
  for (std::size_t i = 0; i < m; ++i) {
    pos[i] = -cfg.w * y_ref[i];
    neg[i] = -(1.0 - cfg.w) * (1.0 - y_ref[i]);
  }
  const Var log_y = ad::log(ad::clamp_min(y, cfg.epsilon_log));
  const Var log_not_y = ad::log(ad::clamp_min(ad::add_scalar(ad::scale(y, -1.0), 1.0),
                                              cfg.epsilon_log));
  const Var pos_w = tape.constant(Tensor({rows, cols}, std::move(pos)));
  const Var neg_w = tape.constant(Tensor({rows, cols}, std::move(neg)));
  return ad::add(ad::sum(ad::mul(pos_w, log_y)), ad::sum(ad::mul(neg_w, log_not_y)));
}

namespace {

Var one_minus(Var v) { return ad::add_scalar(ad::scale(v, -1.0), 1.0); }

void require_square(Var scores, const char* what) {
  if (scores.rows() != scores.cols()) {
    throw UsageError(std::string(what) + ": score matrix must be square");
  }
}

}  // namespace

Var constraint_l1(Var scores) {
  require_square(scores, "constraint_l1");
  return ad::add(ad::l2_norm(one_minus(ad::row_sum(scores))),
                 ad::l2_norm(one_minus(ad::col_sum(scores))));
}

Var constraint_l2(Var scores) {
  require_square(scores, "constraint_l2");
  return ad::add(ad::l2_norm(one_minus(ad::row_l2_norm(scores))),
                 ad::l2_norm(one_minus(ad::col_l2_norm(scores))));
}

LossTerms combined_loss(Var y, std::span<const double> y_ref, Var scores,
                        const LossConfig& cfg) {
  LossTerms terms;
  terms.bce = balanced_bce(y, y_ref, cfg);
  terms.sum_constraint = constraint_l1(scores);
  terms.norm_constraint = constraint_l2(scores);
  Var total = terms.bce;
  if (cfg.use_sum_constraint) {
    total = ad::add(total, ad::scale(terms.sum_constraint, cfg.alpha));
  }
  if (cfg.use_norm_constraint) {
    total = ad::add(total, ad::scale(terms.norm_constraint, cfg.alpha));
  }
  terms.total = total;
  return terms;
}

double balanced_bce(std::span<const double> y, std::span<const double> y_ref,
                    const LossConfig& cfg) {
  Tape tape;
  const Var v = tape.constant(Tensor({y.size(), 1}, std::vector<double>(y.begin(), y.end())));
  return balanced_bce(v, y_ref, cfg).value()[0];
}

double constraint_l1(const ScoreMatrix& scores) {
  Tape tape;
  const auto vals = scores.values();
  const Var v = tape.constant(
      Tensor({scores.size(), scores.size()}, std::vector<double>(vals.begin(), vals.end())));
  return constraint_l1(v).value()[0];
}

double constraint_l2(const ScoreMatrix& scores) {
  Tape tape;
  const auto vals = scores.values();
  const Var v = tape.constant(
      Tensor({scores.size(), scores.size()}, std::vector<double>(vals.begin(), vals.end())));
  return constraint_l2(v).value()[0];
}

}  // namespace lapforge
