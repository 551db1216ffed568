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

#include "lapforge/glan_model.hpp"

#include "lapforge/error.hpp"

namespace lapforge {

using ad::Activation;
using ad::Perceptron;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (latent_dim == 0) throw UsageError("latent_dim must be positive");
  if (conv_iterations == 0) throw UsageError("conv_iterations must be positive");
  if (t == 0) throw UsageError("t must be positive");
  if (hidden_width == 0) throw UsageError("hidden_width must be positive");
}

ModelParameters ModelParameters::initialize(const ModelConfig& cfg, unsigned long long seed) {
  cfg.validate();
  const std::size_t d = cfg.latent_dim, h = cfg.hidden_width;
  ad::Rng rng(seed);
  ModelParameters p;
  p.encoder = Perceptron({1, h, d}, Activation::kRelu, Activation::kIdentity, rng);
  p.rho_e = Perceptron({3 * d, h, d}, Activation::kRelu, Activation::kIdentity, rng);
  p.rho1_v = Perceptron({2 * d, h, d}, Activation::kRelu, Activation::kIdentity, rng);
  p.rho2_v = Perceptron({2 * d, h, d}, Activation::kRelu, Activation::kIdentity, rng);
  p.kappa_v = Perceptron({3 * d, h, d}, Activation::kRelu, Activation::kSigmoid, rng);
  p.kappa_e = Perceptron({3 * d, h, d}, Activation::kRelu, Activation::kSigmoid, rng);
  p.tau = Perceptron({2 * d, d, 1}, Activation::kRelu, Activation::kSigmoid, rng);
  p.decoder = Perceptron({d, h, 1}, Activation::kRelu, Activation::kSigmoid, rng);
  return p;
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  auto add = [&](const char* name, auto& perceptron) {
    auto& layers = perceptron.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = std::string(name) + "." + std::to_string(l);
      out.emplace_back(prefix + ".weight", &layers[l].weight);
      out.emplace_back(prefix + ".bias", &layers[l].bias);
    }
  };
  add("encoder", p.encoder);
  add("rho_e", p.rho_e);
  add("rho1_v", p.rho1_v);
  add("rho2_v", p.rho2_v);
  add("kappa_v", p.kappa_v);
  add("kappa_e", p.kappa_e);
  add("tau", p.tau);
  add("decoder", p.decoder);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParameters::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParameters::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->numel();
  return n;
}

void ModelParameters::zero_grad() {
  for (auto& [name, t] : named_tensors()) t->zero_grad();
}

GraphTopology::GraphTopology(const BipartiteGraph& g)
    : node_count(g.node_count()), edge_count(g.edge_count()) {
  const std::size_t n = g.n();
  edge_agent_node.reserve(edge_count);
  edge_job_node.reserve(edge_count);
  score_position.reserve(edge_count);
  for (const Edge& e : g.edges()) {
    edge_agent_node.push_back(g.agent_node(e.agent));
    edge_job_node.push_back(g.job_node(e.job));
    score_position.push_back(e.agent * static_cast<int>(n) + e.job);
  }
  incidence_node.reserve(2 * edge_count);
  incidence_neighbor.reserve(2 * edge_count);
  incidence_edge.reserve(2 * edge_count);
  inverse_degree.assign(node_count, 0.0);
  for (std::size_t v = 0; v < node_count; ++v) {
    const auto incident = g.incident_edges(v);
    for (int e : incident) {
      const auto ue = static_cast<std::size_t>(e);
      const int other = edge_agent_node[ue] == static_cast<int>(v) ? edge_job_node[ue]
                                                                    : edge_agent_node[ue];
      incidence_node.push_back(static_cast<int>(v));
      incidence_neighbor.push_back(other);
      incidence_edge.push_back(e);
    }
    // Jobs outside every agent's top-t have no neighbors; their aggregate is 0.
    if (!incident.empty()) inverse_degree[v] = 1.0 / static_cast<double>(incident.size());
  }
}

EdgeLabelVector ForwardPass::label_values() const {
  const auto d = labels.value().data();
  return EdgeLabelVector(d.begin(), d.end());
}

ScoreMatrix ForwardPass::score_matrix() const {
  const auto d = scores.value().data();
  return ScoreMatrix(graph.n(), std::vector<double>(d.begin(), d.end()));
}

GlanModel::GlanModel(ModelConfig cfg, ModelParameters params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const std::size_t d = cfg_.latent_dim;
  auto expect = [](const Perceptron& p, std::size_t in, std::size_t out, const char* name) {
    if (p.layers().empty() || p.input_dim() != in || p.output_dim() != out) {
      throw DataError(std::string("parameter block ") + name + " has the wrong shape");
    }
  };
  expect(params_.encoder, 1, d, "encoder");
  expect(params_.rho_e, 3 * d, d, "rho_e");
  expect(params_.rho1_v, 2 * d, d, "rho1_v");
  expect(params_.rho2_v, 2 * d, d, "rho2_v");
  expect(params_.kappa_v, 3 * d, d, "kappa_v");
  expect(params_.kappa_e, 3 * d, d, "kappa_e");
  expect(params_.tau, 2 * d, 1, "tau");
  expect(params_.decoder, d, 1, "decoder");
}

GlanModel GlanModel::initialize(const ModelConfig& cfg, unsigned long long seed) {
  return GlanModel(cfg, ModelParameters::initialize(cfg, seed));
}

LatentGraphState GlanModel::encode(Var costs, const GraphTopology& topo) const {
  Tape& tape = *costs.tape;
  LatentGraphState state;
  state.edges = params_.encoder.forward(costs);
  state.nodes = tape.constant(Tensor::zeros(topo.node_count, cfg_.latent_dim));
  return state;
}

AttentionContext GlanModel::channel_attention(const LatentGraphState& state) const {
  Tape& tape = *state.nodes.tape;
  AttentionContext ctx;
  if (cfg_.ablate_channel_attention) {
    ctx.node_attention = tape.constant(Tensor::matrix(
        1, cfg_.latent_dim, std::vector<double>(cfg_.latent_dim, 1.0)));
    ctx.edge_attention = ctx.node_attention;
    return ctx;
  }
  auto pooled = [](Var x) {
    return ad::concat_cols({ad::max_rows(x), ad::min_rows(x), ad::mean_rows(x)});
  };
  ctx.node_attention = params_.kappa_v.forward(pooled(state.nodes));
  ctx.edge_attention = params_.kappa_e.forward(pooled(state.edges));
  return ctx;
}

Var GlanModel::edge_conv(const GraphTopology& topo, const LatentGraphState& state,
                         const AttentionContext& ctx) const {
  const Var nodes = ad::mul_row_vector(state.nodes, ctx.node_attention);
  const Var edges = ad::mul_row_vector(state.edges, ctx.edge_attention);
  const Var stacked = ad::concat_cols({ad::gather_rows(nodes, topo.edge_agent_node),
                                       ad::gather_rows(nodes, topo.edge_job_node), edges});
  return params_.rho_e.forward(stacked);
}

Var GlanModel::node_conv(const GraphTopology& topo, const LatentGraphState& state,
                         const AttentionContext& ctx) const {
  Tape& tape = *state.nodes.tape;
  const Var nodes_att = ad::mul_row_vector(state.nodes, ctx.node_attention);
  const Var edges_att = ad::mul_row_vector(state.edges, ctx.edge_attention);

  Var neighbor = ad::gather_rows(nodes_att, topo.incidence_neighbor);
  if (!cfg_.ablate_aggregation_weights) {
    const Var pair = ad::concat_cols({ad::gather_rows(state.nodes, topo.incidence_node),
                                      ad::gather_rows(state.nodes, topo.incidence_neighbor)});
    neighbor = ad::mul_col_vector(neighbor, params_.tau.forward(pair));
  }
  const Var messages = params_.rho1_v.forward(
      ad::concat_cols({ad::gather_rows(edges_att, topo.incidence_edge), neighbor}));
  const Var summed = ad::scatter_add_rows(messages, topo.incidence_node, topo.node_count);
  const Var inv_deg = tape.constant(Tensor::matrix(topo.node_count, 1, topo.inverse_degree));
  const Var aggregated = ad::mul_col_vector(summed, inv_deg);
  return params_.rho2_v.forward(ad::concat_cols({aggregated, state.nodes}));
}

Var GlanModel::decode(const LatentGraphState& state) const {
  return params_.decoder.forward(state.edges);
}

ForwardPass GlanModel::forward(Tape& tape, const CostMatrix& cost,
                               bool differentiable_costs) const {
  ForwardPass pass{build_graph(cost, cfg_.t), {}, {}, {}};
  const GraphTopology topo(pass.graph);
  std::vector<double> raw(topo.edge_count);
  for (std::size_t e = 0; e < raw.size(); ++e) raw[e] = pass.graph.edges()[e].cost;
  Tensor input = Tensor::matrix(topo.edge_count, 1, std::move(raw));
  pass.costs = differentiable_costs ? tape.variable(std::move(input))
                                    : tape.constant(std::move(input));

  LatentGraphState state = encode(pass.costs, topo);
  for (std::size_t s = 0; s < cfg_.conv_iterations; ++s) {
    const AttentionContext ctx = channel_attention(state);
    state.edges = edge_conv(topo, state, ctx);
    state.nodes = node_conv(topo, state, ctx);
  }
  pass.labels = decode(state);
  const std::size_t n = pass.graph.n();
  pass.scores = ad::reshape(ad::scatter_add_rows(pass.labels, topo.score_position, n * n), n, n);
  return pass;
}

Prediction GlanModel::predict(const CostMatrix& cost) const {
  Tape tape(false);
  const ForwardPass pass = forward(tape, cost);
  return Prediction{pass.label_values(), pass.score_matrix()};
}

}  // namespace lapforge
