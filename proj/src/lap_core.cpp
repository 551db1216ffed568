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

#include "lapforge/lap_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lapforge/error.hpp"

namespace lapforge {

namespace {

bool is_permutation(const Permutation& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (int j : perm) {
    if (j < 0 || static_cast<std::size_t>(j) >= perm.size() || seen[j]) return false;
    seen[j] = 1;
  }
  return true;
}

}  // namespace

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n_ * n_) {
    throw UsageError("square matrix of size " + std::to_string(n_) +
                     " needs " + std::to_string(n_ * n_) + " values, got " +
                     std::to_string(values_.size()));
  }
}

CostMatrix::CostMatrix(std::size_t n, std::vector<double> values)
    : SquareMatrix(n, std::move(values)) {
  if (n_ == 0) throw UsageError("cost matrix must have size >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericError("cost matrix has non-finite entry");
  }
}

AssignmentMatrix::AssignmentMatrix(std::size_t n, std::vector<double> values)
    : SquareMatrix(n, std::move(values)) {}

AssignmentMatrix AssignmentMatrix::from_permutation(const Permutation& perm) {
  const std::size_t n = perm.size();
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] < 0 || static_cast<std::size_t>(perm[i]) >= n) {
      throw UsageError("permutation entry out of range");
    }
    v[i * n + static_cast<std::size_t>(perm[i])] = 1.0;
  }
  AssignmentMatrix x(n, std::move(v));
  if (!validate_permutation(x)) throw UsageError("not a permutation");
  return x;
}

AssignmentMatrix AssignmentMatrix::identity(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  return from_permutation(p);
}

Permutation AssignmentMatrix::to_permutation() const {
  if (!validate_permutation(*this)) {
    throw UsageError("assignment matrix violates permutation constraints");
  }
  Permutation p(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if ((*this)(i, j) == 1.0) p[i] = static_cast<int>(j);
    }
  }
  return p;
}

ScoreMatrix::ScoreMatrix(std::size_t n, std::vector<double> values)
    : SquareMatrix(n, std::move(values)) {
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw UsageError("score matrix entries must lie in [0, 1]");
    }
  }
}

bool validate_permutation(const AssignmentMatrix& x) {
  const std::size_t n = x.size();
  std::vector<int> col_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int row_count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = x(i, j);
      if (v == 1.0) {
        ++row_count;
        ++col_count[j];
      } else if (v != 0.0) {
        return false;
      }
    }
    if (row_count != 1) return false;
  }
  return std::all_of(col_count.begin(), col_count.end(),
                     [](int c) { return c == 1; });
}

double total_cost(const CostMatrix& cost, const AssignmentMatrix& x) {
  if (cost.size() != x.size()) throw UsageError("total_cost: size mismatch");
  return total_cost(cost, x.to_permutation());
}

double total_cost(const CostMatrix& cost, const Permutation& perm) {
  if (cost.size() != perm.size()) throw UsageError("total_cost: size mismatch");
  if (!is_permutation(perm)) throw UsageError("total_cost: not a permutation");
  double sum = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    sum += cost(i, static_cast<std::size_t>(perm[i]));
  }
  return sum;
}

double precision(const AssignmentMatrix& y, const AssignmentMatrix& y_ref) {
  if (y.size() != y_ref.size()) throw UsageError("precision: size mismatch");
  return precision(y.to_permutation(), y_ref.to_permutation());
}

double precision(const Permutation& y, const Permutation& y_ref) {
  if (y.size() != y_ref.size() || y.empty()) {
    throw UsageError("precision: size mismatch");
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < y.size(); ++i) agree += (y[i] == y_ref[i]);
  return static_cast<double>(agree) / static_cast<double>(y_ref.size());
}

Permutation greedy_permutation(const ScoreMatrix& scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n * n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto values = scores.values();
  // Descending score; flat index order is row-major, which realizes the
  // row-then-column tie-break.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });
  Permutation perm(n, -1);
  std::vector<char> col_taken(n, 0);
  std::size_t placed = 0;
  for (std::size_t flat : order) {
    const std::size_t r = flat / n;
    const std::size_t c = flat % n;
    if (perm[r] >= 0 || col_taken[c]) continue;
    perm[r] = static_cast<int>(c);
    col_taken[c] = 1;
    if (++placed == n) break;
  }
  return perm;
}

AssignmentMatrix greedy_discretize(const ScoreMatrix& scores) {
  return AssignmentMatrix::from_permutation(greedy_permutation(scores));
}

}  // namespace lapforge
