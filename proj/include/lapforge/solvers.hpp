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

#ifndef LAPFORGE_SOLVERS_HPP_
#define LAPFORGE_SOLVERS_HPP_

#include <cstddef>
#include <string>

#include "lapforge/lap_core.hpp"

namespace lapforge {

// Exact minimum-cost assignment by shortest augmenting paths over dual
// potentials, O(n^3).
Permutation hungarian_permutation(const CostMatrix& cost);
AssignmentMatrix hungarian(const CostMatrix& cost);

// Largest n accepted by brute_force().
inline constexpr std::size_t kBruteForceMaxSize = 9;

// Enumerates all n! permutations in lexicographic order and returns the first
// minimizer. Throws UsageError for n > kBruteForceMaxSize.
Permutation brute_force_permutation(const CostMatrix& cost);
AssignmentMatrix brute_force(const CostMatrix& cost);

// How the cost matrix is turned into a positive similarity kernel before the
// alternating normalization.
enum class SinkhornKernel {
  // K = 1 - (C - min C) / (max C - min C); all ones when C is constant.
  kLinear,
  // K = exp(-(C_ij - min_k C_ik) / temperature).
  kExponential,
};

struct SinkhornConfig {
  SinkhornKernel kernel = SinkhornKernel::kLinear;
  double temperature = 0.1;
  int max_iterations = 100;
  // Maximum |row sum - 1| or |column sum - 1| accepted as converged.
  double tolerance = 1e-6;

  void validate() const;
};

std::string to_string(SinkhornKernel kernel);
SinkhornKernel parse_sinkhorn_kernel(const std::string& name);

struct SinkhornResult {
  ScoreMatrix plan;
  int iterations = 0;
  bool converged = false;
};

// Alternating row/column normalization of the kernel. Throws NumericError
// when a row or column of the kernel is entirely zero.
SinkhornResult sinkhorn_detailed(const CostMatrix& cost,
                                 const SinkhornConfig& cfg = {});
ScoreMatrix sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg = {});

}  // namespace lapforge

#endif  // LAPFORGE_SOLVERS_HPP_
