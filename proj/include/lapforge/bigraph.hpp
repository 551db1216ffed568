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

#ifndef LAPFORGE_BIGRAPH_HPP_
#define LAPFORGE_BIGRAPH_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lapforge/lap_core.hpp"

namespace lapforge {

struct Edge {
  int agent = 0;
  int job = 0;
  double cost = 0.0;
};

// Bipartite agent/job graph keeping, for every agent, the t lowest-cost jobs.
//
// Nodes are numbered agents first (0..n-1) then jobs (n..2n-1). Edges are
// stored agent-major, ascending cost within an agent, smaller job index first
// on equal cost; the position of an edge in that order is its index.
class BipartiteGraph {
 public:
  BipartiteGraph(const CostMatrix& cost, std::size_t t);

  std::size_t n() const { return n_; }
  std::size_t t_effective() const { return t_effective_; }
  std::size_t node_count() const { return 2 * n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  int agent_node(int agent) const { return agent; }
  int job_node(int job) const { return static_cast<int>(n_) + job; }

  // Incident edge indices of a node (agent or job numbering above).
  std::span<const int> incident_edges(std::size_t node) const;

  // Index of edge (agent, job) if it survived pruning. Throws UsageError for
  // out-of-range indices.
  std::optional<std::size_t> edge_index(int agent, int job) const;

 private:
  std::size_t n_;
  std::size_t t_effective_;
  std::vector<Edge> edges_;
  // CSR adjacency over the 2n nodes.
  std::vector<int> adj_offsets_;
  std::vector<int> adj_edges_;
  // Dense n*n lookup, -1 where pruned.
  std::vector<int> lookup_;
};

BipartiteGraph build_graph(const CostMatrix& cost, std::size_t t);

// One value in [0, 1] per retained edge, in edge order.
using EdgeLabelVector = std::vector<double>;

// Y[j, k] = y[edge_index(j, k)] where the edge exists, 0 elsewhere.
ScoreMatrix labels_to_score_matrix(const BipartiteGraph& g, std::span<const double> y);

struct GroundTruthLabels {
  EdgeLabelVector labels;
  // Fraction of the n optimal pairs that survived pruning.
  double coverage = 0.0;
};

GroundTruthLabels ground_truth_labels(const BipartiteGraph& g,
                                      const AssignmentMatrix& optimal);
GroundTruthLabels ground_truth_labels(const BipartiteGraph& g,
                                      const Permutation& optimal);

}  // namespace lapforge

#endif  // LAPFORGE_BIGRAPH_HPP_
