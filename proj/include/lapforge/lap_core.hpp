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

#ifndef LAPFORGE_LAP_CORE_HPP_
#define LAPFORGE_LAP_CORE_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace lapforge {

// Job index assigned to each agent: perm[agent] = job.
using Permutation = std::vector<int>;

// Dense n x n table of doubles in row-major order. Shared storage for the
// three strongly typed matrices below.
class SquareMatrix {
 public:
  SquareMatrix() = default;

  std::size_t size() const { return n_; }
  double operator()(std::size_t row, std::size_t col) const {
    return values_[row * n_ + col];
  }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * n_, n_);
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 protected:
  SquareMatrix(std::size_t n, std::vector<double> values);

  std::size_t n_ = 0;
  std::vector<double> values_;
};

// The problem instance: C(i, j) is the cost of giving job j to agent i.
// Every entry is finite and n >= 1.
class CostMatrix : public SquareMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t n, std::vector<double> values);
};

// A candidate solution. Holds arbitrary reals so that infeasible matrices can
// be represented and rejected by validate_permutation().
class AssignmentMatrix : public SquareMatrix {
 public:
  AssignmentMatrix() = default;
  AssignmentMatrix(std::size_t n, std::vector<double> values);

  static AssignmentMatrix from_permutation(const Permutation& perm);
  static AssignmentMatrix identity(std::size_t n);

  // Throws UsageError unless the matrix is a valid permutation matrix.
  Permutation to_permutation() const;
};

// Soft scores in [0, 1], e.g. decoded edge labels or a Sinkhorn plan.
class ScoreMatrix : public SquareMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t n, std::vector<double> values);
};

// True iff every entry is exactly 0 or 1 and every row and column holds
// exactly one 1.
bool validate_permutation(const AssignmentMatrix& x);

// Sum of C(i, j) * X(i, j).
double total_cost(const CostMatrix& cost, const AssignmentMatrix& x);
double total_cost(const CostMatrix& cost, const Permutation& perm);

// tr(Y^T Ygt) / tr(Ygt^T Ygt): fraction of agents whose job agrees with the
// reference solution. Both inputs must be permutation matrices.
double precision(const AssignmentMatrix& y, const AssignmentMatrix& y_ref);
double precision(const Permutation& y, const Permutation& y_ref);

// Repeatedly selects the largest remaining score and removes its row and
// column. Ties go to the smaller row index, then the smaller column index.
AssignmentMatrix greedy_discretize(const ScoreMatrix& scores);
Permutation greedy_permutation(const ScoreMatrix& scores);

}  // namespace lapforge

#endif  // LAPFORGE_LAP_CORE_HPP_
