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

#include "lapforge/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lapforge/error.hpp"

namespace lapforge {

namespace {

// Reduced costs within this distance of the running minimum are treated as
// equal, so the lower column index wins.
constexpr double kSlackEpsilon = 1e-12;

}  // namespace

Permutation hungarian_permutation(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based agents and jobs; job 0 is the virtual root of each search tree.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> job_owner(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t agent = 1; agent <= n; ++agent) {
    job_owner[0] = agent;
    std::size_t j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = job_owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_slack[j] - kSlackEpsilon) {
          min_slack[j] = reduced;
          way[j] = j0;
        }
        if (min_slack[j] < delta - kSlackEpsilon) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[job_owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (job_owner[j0] != 0);
    // Flip the alternating path back to the root.
    do {
      const std::size_t j1 = way[j0];
      job_owner[j0] = job_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Permutation perm(n);
  for (std::size_t j = 1; j <= n; ++j) {
    perm[job_owner[j] - 1] = static_cast<int>(j - 1);
  }
  return perm;
}

AssignmentMatrix hungarian(const CostMatrix& cost) {
  return AssignmentMatrix::from_permutation(hungarian_permutation(cost));
}

Permutation brute_force_permutation(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  if (n > kBruteForceMaxSize) {
    throw UsageError("brute_force: n = " + std::to_string(n) +
                     " exceeds the exhaustive-search limit of " +
                     std::to_string(kBruteForceMaxSize));
  }
  Permutation perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Permutation best = perm;
  double best_cost = total_cost(cost, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = total_cost(cost, perm);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  }
  return best;
}

AssignmentMatrix brute_force(const CostMatrix& cost) {
  return AssignmentMatrix::from_permutation(brute_force_permutation(cost));
}

void SinkhornConfig::validate() const {
  if (!(temperature > 0.0)) throw UsageError("sinkhorn temperature must be > 0");
  if (max_iterations < 1) throw UsageError("sinkhorn max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw UsageError("sinkhorn tolerance must be > 0");
}

std::string to_string(SinkhornKernel kernel) {
  return kernel == SinkhornKernel::kLinear ? "linear" : "exponential";
}

SinkhornKernel parse_sinkhorn_kernel(const std::string& name) {
  if (name == "linear") return SinkhornKernel::kLinear;
  if (name == "exponential" || name == "exp") return SinkhornKernel::kExponential;
  throw UsageError("unknown sinkhorn kernel '" + name + "'");
}

SinkhornResult sinkhorn_detailed(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  const std::size_t n = cost.size();
  const auto c = cost.values();
  std::vector<double> k(n * n);

  if (cfg.kernel == SinkhornKernel::kLinear) {
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < n * n; ++i) {
      k[i] = range > 0.0 ? 1.0 - (c[i] - *lo) / range : 1.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = cost.row(i);
      const double row_min = *std::min_element(row.begin(), row.end());
      for (std::size_t j = 0; j < n; ++j) {
        k[i * n + j] = std::exp(-(row[j] - row_min) / cfg.temperature);
      }
    }
  }

  std::vector<double> col_sum(n);
  auto normalize_rows = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[i * n + j];
      if (!(s > 0.0)) throw NumericError("sinkhorn: degenerate instance (all-zero row)");
      for (std::size_t j = 0; j < n; ++j) k[i * n + j] /= s;
    }
  };
  auto normalize_cols = [&] {
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) col_sum[j] += k[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!(col_sum[j] > 0.0)) {
        throw NumericError("sinkhorn: degenerate instance (all-zero column)");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) k[i * n + j] /= col_sum[j];
    }
  };
  auto max_deviation = [&] {
    double dev = 0.0;
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += k[i * n + j];
        col_sum[j] += k[i * n + j];
      }
      dev = std::max(dev, std::abs(s - 1.0));
    }
    for (double s : col_sum) dev = std::max(dev, std::abs(s - 1.0));
    return dev;
  };

  SinkhornResult result;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    normalize_rows();
    normalize_cols();
    result.iterations = it;
    if (max_deviation() <= cfg.tolerance) {
      result.converged = true;
      break;
    }
  }
  for (double& x : k) x = std::clamp(x, 0.0, 1.0);
  result.plan = ScoreMatrix(n, std::move(k));
  return result;
}

ScoreMatrix sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg) {
  return sinkhorn_detailed(cost, cfg).plan;
}

}  // namespace lapforge
