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

#include "lapforge/bigraph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lapforge/error.hpp"

namespace lapforge {

BipartiteGraph::BipartiteGraph(const CostMatrix& cost, std::size_t t)
    : n_(cost.size()) {
  if (t < 1) throw UsageError("prune width t must be >= 1");
  t_effective_ = std::min(t, n_);
  edges_.reserve(n_ * t_effective_);

  std::vector<int> jobs(n_);
  for (std::size_t a = 0; a < n_; ++a) {
    const auto row = cost.row(a);
    std::iota(jobs.begin(), jobs.end(), 0);
    auto by_cost = [&](int x, int y) {
      if (row[x] != row[y]) return row[x] < row[y];
      return x < y;
    };
    std::partial_sort(jobs.begin(), jobs.begin() + static_cast<long>(t_effective_),
                      jobs.end(), by_cost);
    for (std::size_t k = 0; k < t_effective_; ++k) {
      edges_.push_back({static_cast<int>(a), jobs[k], row[jobs[k]]});
    }
  }

  lookup_.assign(n_ * n_, -1);
  std::vector<int> degree(2 * n_, 0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    lookup_[static_cast<std::size_t>(edge.agent) * n_ + static_cast<std::size_t>(edge.job)] =
        static_cast<int>(e);
    ++degree[static_cast<std::size_t>(agent_node(edge.agent))];
    ++degree[static_cast<std::size_t>(job_node(edge.job))];
  }
  adj_offsets_.assign(2 * n_ + 1, 0);
  std::partial_sum(degree.begin(), degree.end(), adj_offsets_.begin() + 1);
  adj_edges_.resize(static_cast<std::size_t>(adj_offsets_.back()));
  std::vector<int> fill(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    adj_edges_[static_cast<std::size_t>(fill[static_cast<std::size_t>(agent_node(edge.agent))]++)] =
        static_cast<int>(e);
    adj_edges_[static_cast<std::size_t>(fill[static_cast<std::size_t>(job_node(edge.job))]++)] =
        static_cast<int>(e);
  }
}

std::span<const int> BipartiteGraph::incident_edges(std::size_t node) const {
  if (node >= node_count()) throw UsageError("node index out of range");
  const auto begin = static_cast<std::size_t>(adj_offsets_[node]);
  const auto end = static_cast<std::size_t>(adj_offsets_[node + 1]);
  return std::span<const int>(adj_edges_).subspan(begin, end - begin);
}

std::optional<std::size_t> BipartiteGraph::edge_index(int agent, int job) const {
  if (agent < 0 || job < 0 || static_cast<std::size_t>(agent) >= n_ ||
      static_cast<std::size_t>(job) >= n_) {
    throw UsageError("edge_index: indices out of range");
  }
  const int e = lookup_[static_cast<std::size_t>(agent) * n_ + static_cast<std::size_t>(job)];
  if (e < 0) return std::nullopt;
  return static_cast<std::size_t>(e);
}

BipartiteGraph build_graph(const CostMatrix& cost, std::size_t t) {
  return BipartiteGraph(cost, t);
}

ScoreMatrix labels_to_score_matrix(const BipartiteGraph& g, std::span<const double> y) {
  if (y.size() != g.edge_count()) {
    throw UsageError("labels_to_score_matrix: expected " +
                     std::to_string(g.edge_count()) + " labels, got " +
                     std::to_string(y.size()));
  }
  const std::size_t n = g.n();
  std::vector<double> values(n * n, 0.0);
  for (std::size_t e = 0; e < y.size(); ++e) {
    const Edge& edge = g.edges()[e];
    values[static_cast<std::size_t>(edge.agent) * n + static_cast<std::size_t>(edge.job)] = y[e];
  }
  return ScoreMatrix(n, std::move(values));
}

GroundTruthLabels ground_truth_labels(const BipartiteGraph& g,
                                      const AssignmentMatrix& optimal) {
  if (optimal.size() != g.n()) throw UsageError("ground_truth_labels: size mismatch");
  return ground_truth_labels(g, optimal.to_permutation());
}

GroundTruthLabels ground_truth_labels(const BipartiteGraph& g,
                                      const Permutation& optimal) {
  if (optimal.size() != g.n()) throw UsageError("ground_truth_labels: size mismatch");
  GroundTruthLabels out;
  out.labels.assign(g.edge_count(), 0.0);
  std::size_t covered = 0;
  for (std::size_t a = 0; a < optimal.size(); ++a) {
    if (auto e = g.edge_index(static_cast<int>(a), optimal[a])) {
      out.labels[*e] = 1.0;
      ++covered;
    }
  }
  out.coverage = static_cast<double>(covered) / static_cast<double>(g.n());
  return out;
}

}  // namespace lapforge
