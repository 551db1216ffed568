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

#ifndef LAPFORGE_GLAN_MODEL_HPP_
#define LAPFORGE_GLAN_MODEL_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lapforge/autodiff.hpp"
#include "lapforge/bigraph.hpp"
#include "lapforge/lap_core.hpp"

namespace lapforge {

struct ModelConfig {
  std::size_t latent_dim = 16;
  std::size_t conv_iterations = 5;
  std::size_t t = 8;
  std::size_t hidden_width = 32;
  // Replace channel attention vectors with ones.
  bool ablate_channel_attention = false;
  // Replace neighbor aggregation weights with ones.
  bool ablate_aggregation_weights = false;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// The eight perceptrons of the network. Convolution weights are shared by all
// iterations.
struct ModelParameters {
  ad::Perceptron encoder;  // 1 -> h -> d
  ad::Perceptron rho_e;    // 3d -> h -> d, edge update
  ad::Perceptron rho1_v;   // 2d -> h -> d, neighbor message
  ad::Perceptron rho2_v;   // 2d -> h -> d, node update
  ad::Perceptron kappa_v;  // 3d -> h -> d, sigmoid output
  ad::Perceptron kappa_e;  // 3d -> h -> d, sigmoid output
  ad::Perceptron tau;      // 2d -> d -> 1, sigmoid output
  ad::Perceptron decoder;  // d -> h -> 1, sigmoid output

  static ModelParameters initialize(const ModelConfig& cfg, unsigned long long seed);

  // Stable names such as "rho_e.1.bias", in a fixed order.
  std::vector<std::pair<std::string, ad::Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const ad::Tensor*>> named_tensors() const;
  std::size_t parameter_count() const;
  void zero_grad();
};

// Index arrays derived from a BipartiteGraph once per forward pass.
struct GraphTopology {
  explicit GraphTopology(const BipartiteGraph& g);

  std::size_t node_count;
  std::size_t edge_count;
  std::vector<int> edge_agent_node;
  std::vector<int> edge_job_node;
  // One incidence per (node, incident edge): both endpoints of every edge.
  std::vector<int> incidence_node;
  std::vector<int> incidence_neighbor;
  std::vector<int> incidence_edge;
  // 1 / degree per node, 0 for isolated job nodes.
  std::vector<double> inverse_degree;
  // Row-major position of each edge in the n x n score matrix.
  std::vector<int> score_position;
};

struct LatentGraphState {
  ad::Var nodes;  // 2n x d
  ad::Var edges;  // E x d
};

struct AttentionContext {
  ad::Var node_attention;  // 1 x d
  ad::Var edge_attention;  // 1 x d
};

struct ForwardPass {
  BipartiteGraph graph;
  ad::Var costs;   // E x 1 encoder input
  ad::Var labels;  // E x 1
  ad::Var scores;  // n x n
  EdgeLabelVector label_values() const;
  ScoreMatrix score_matrix() const;
};

struct Prediction {
  EdgeLabelVector labels;
  ScoreMatrix scores;
};

class GlanModel {
 public:
  GlanModel(ModelConfig cfg, ModelParameters params);
  static GlanModel initialize(const ModelConfig& cfg, unsigned long long seed);

  const ModelConfig& config() const { return cfg_; }
  ModelParameters& parameters() { return params_; }
  const ModelParameters& parameters() const { return params_; }

  // Edge attributes from raw costs; node attributes start at zero.
  LatentGraphState encode(ad::Var costs, const GraphTopology& topo) const;
  // Sigmoid-gated max/min/mean pooling over all nodes and all edges.
  AttentionContext channel_attention(const LatentGraphState& state) const;
  // e_ij <- rho_e([v_i * c_v, v_j * c_v, e_ij * c_e]); agent endpoint first.
  ad::Var edge_conv(const GraphTopology& topo, const LatentGraphState& state,
                    const AttentionContext& ctx) const;
  // v_i <- rho2_v([mean_j rho1_v([e_ij * c_e, w_ij (v_j * c_v)]), v_i]) with
  // w_ij = tau([v_i, v_j]). All nodes read the pre-update state.
  ad::Var node_conv(const GraphTopology& topo, const LatentGraphState& state,
                    const AttentionContext& ctx) const;
  // Per-edge label in (0, 1).
  ad::Var decode(const LatentGraphState& state) const;

  // Full pipeline on `tape`. With differentiable_costs the encoder input is a
  // tape variable so gradients with respect to the costs can be read back.
  ForwardPass forward(ad::Tape& tape, const CostMatrix& cost,
                      bool differentiable_costs = false) const;

  // Inference without recording backward rules.
  Prediction predict(const CostMatrix& cost) const;

 private:
  ModelConfig cfg_;
  ModelParameters params_;
};

}  // namespace lapforge

#endif  // LAPFORGE_GLAN_MODEL_HPP_
