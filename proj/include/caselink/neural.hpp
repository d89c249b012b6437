// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph attention kernels with hand-written reverse passes.
//
// gat layer (single head), for target v over N(v) plus a self loop:
//   z_u       = W h_u
//   e_vu      = leaky_relu(a_dst . z_v + a_src . z_u), slope 0.2
//   alpha_vu  = softmax_u(e_vu)
//   out_v     = sum_u alpha_vu z_u
//
// typed layer (simplified single-head HGT): node-type projections W[t],
// relation matrices R[r] and per-relation attention vectors:
//   z_u       = W[type(u)] h_u
//   m_vu      = R[rel(u,v)] z_u
//   e_vu      = leaky_relu(a_dst[rel] . z_v + a_src[rel] . m_vu)
//   out_v     = sum over every relation of sum_u alpha_vu m_vu
// With one node type, R = I and all banks equal to the gat parameters, the
// two layers coincide.
//
// A stack runs `num_layers` layers with ELU between them and nothing after
// the last; with `residual` the input features are appended to the output.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "caselink/common.hpp"
#include "caselink/tensor.hpp"

namespace caselink {

inline constexpr double kLeakySlope = 0.2;

/// Model-time adjacency: incoming neighbor lists (CSR) including one self
/// loop per node. Stored edges are undirected and expanded both ways.
struct Topology {
  std::size_t num_nodes = 0;
  int num_node_types = 1;
  int num_edge_types = 1;  // stored relations; the self loop uses index num_edge_types
  std::vector<int> node_type;
  std::vector<std::size_t> offsets;  // size num_nodes + 1
  std::vector<std::size_t> sources;
  std::vector<int> relations;

  int self_relation() const noexcept { return num_edge_types; }
  std::size_t num_entries() const noexcept { return sources.size(); }

  struct Edge {
    std::size_t u, v;
    int relation;
  };

  static Topology build(std::size_t num_nodes, std::vector<int> node_type, int num_node_types, int num_edge_types,
                        const std::vector<Edge>& edges) {
    if (node_type.size() != num_nodes) throw ShapeError("node type list does not match node count");
    for (int t : node_type)
      if (t < 0 || t >= num_node_types) throw LookupError("unknown node type key " + std::to_string(t));
    std::vector<std::set<std::pair<std::size_t, int>>> incoming(num_nodes);
    for (const auto& e : edges) {
      if (e.u >= num_nodes || e.v >= num_nodes) throw ShapeError("edge endpoint out of range");
      if (e.relation < 0 || e.relation >= num_edge_types)
        throw LookupError("unknown edge type key " + std::to_string(e.relation));
      if (e.u == e.v) continue;  // self loops are added uniformly below
      incoming[e.v].emplace(e.u, e.relation);
      incoming[e.u].emplace(e.v, e.relation);
    }
    Topology g;
    g.num_nodes = num_nodes;
    g.num_node_types = num_node_types;
    g.num_edge_types = num_edge_types;
    g.node_type = std::move(node_type);
    g.offsets.push_back(0);
    for (std::size_t v = 0; v < num_nodes; ++v) {
      g.sources.push_back(v);
      g.relations.push_back(num_edge_types);
      for (const auto& [u, r] : incoming[v]) {
        g.sources.push_back(u);
        g.relations.push_back(r);
      }
      g.offsets.push_back(g.sources.size());
    }
    return g;
  }

  /// Same adjacency with a single node type and a single stored relation.
  Topology collapsed() const {
    Topology g = *this;
    g.num_node_types = 1;
    g.num_edge_types = 1;
    std::fill(g.node_type.begin(), g.node_type.end(), 0);
    for (auto& r : g.relations) r = (r == num_edge_types) ? 1 : 0;
    return g;
  }
};

// ---------------------------------------------------------------------------
// Activations.

template <typename S>
Matrix<S> elu(const Matrix<S>& x) {
  return x.unaryExpr([](S v) { return v > S(0) ? v : std::expm1(v); });
}

template <typename S>
Matrix<S> elu_backward(const Matrix<S>& pre, const Matrix<S>& grad) {
  return grad.cwiseProduct(pre.unaryExpr([](S v) { return v > S(0) ? S(1) : std::exp(v); }));
}

template <typename S>
S leaky_relu(S x) {
  return x > S(0) ? x : static_cast<S>(kLeakySlope) * x;
}

template <typename S>
S leaky_relu_grad(S x) {
  return x > S(0) ? S(1) : static_cast<S>(kLeakySlope);
}

// ---------------------------------------------------------------------------
// GAT layer.

struct GatLayerSpec {
  std::size_t weight = 0, att_dst = 0, att_src = 0;
  Eigen::Index in_dim = 0, out_dim = 0;
};

template <typename S>
GatLayerSpec add_gat_layer(ParamStore<S>& params, const std::string& prefix, Eigen::Index in_dim, Eigen::Index out_dim,
                           std::mt19937_64& rng) {
  GatLayerSpec spec;
  spec.in_dim = in_dim;
  spec.out_dim = out_dim;
  spec.weight = params.add(prefix + ".weight", glorot_uniform<S>(out_dim, in_dim, rng));
  spec.att_dst = params.add(prefix + ".att_dst", glorot_uniform<S>(out_dim, 1, rng));
  spec.att_src = params.add(prefix + ".att_src", glorot_uniform<S>(out_dim, 1, rng));
  return spec;
}

template <typename S>
struct GatCache {
  Matrix<S> input;
  Matrix<S> z;
  std::vector<S> pre;    // per CSR entry
  std::vector<S> alpha;  // per CSR entry
};

inline void check_states(Eigen::Index rows, Eigen::Index cols, const Topology& g, Eigen::Index in_dim) {
  if (static_cast<std::size_t>(rows) != g.num_nodes)
    throw ShapeError("node state rows (" + std::to_string(rows) + ") != node count (" + std::to_string(g.num_nodes) + ")");
  if (cols != in_dim)
    throw ShapeError("node state width " + std::to_string(cols) + " != layer input dim " + std::to_string(in_dim));
}

/// Softmax of `pre` over one neighborhood, after leaky-relu, written to alpha.
template <typename S>
void neighborhood_softmax(const std::vector<S>& pre, std::vector<S>& alpha, std::size_t begin, std::size_t end) {
  S max_e = -std::numeric_limits<S>::infinity();
  for (std::size_t k = begin; k < end; ++k) max_e = std::max(max_e, leaky_relu(pre[k]));
  S sum = 0;
  for (std::size_t k = begin; k < end; ++k) {
    alpha[k] = std::exp(leaky_relu(pre[k]) - max_e);
    sum += alpha[k];
  }
  for (std::size_t k = begin; k < end; ++k) alpha[k] /= sum;
}

/// Pre-activation output of one attention layer.
template <typename S>
Matrix<S> gat_forward(const Matrix<S>& h, const Topology& g, const ParamStore<S>& p, const GatLayerSpec& L,
                      GatCache<S>* cache = nullptr) {
  check_states(h.rows(), h.cols(), g, L.in_dim);
  const Matrix<S>& W = p[L.weight];
  Matrix<S> z = h * W.transpose();
  const Matrix<S> s_dst = z * p[L.att_dst];
  const Matrix<S> s_src = z * p[L.att_src];
  std::vector<S> pre(g.num_entries()), alpha(g.num_entries());
  Matrix<S> out = Matrix<S>::Zero(h.rows(), L.out_dim);
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    const std::size_t begin = g.offsets[v], end = g.offsets[v + 1];
    for (std::size_t k = begin; k < end; ++k) pre[k] = s_dst(static_cast<Eigen::Index>(v), 0) + s_src(static_cast<Eigen::Index>(g.sources[k]), 0);
    neighborhood_softmax(pre, alpha, begin, end);
    for (std::size_t k = begin; k < end; ++k) out.row(static_cast<Eigen::Index>(v)) += alpha[k] * z.row(static_cast<Eigen::Index>(g.sources[k]));
  }
  if (cache) {
    cache->input = h;
    cache->z = std::move(z);
    cache->pre = std::move(pre);
    cache->alpha = std::move(alpha);
  }
  return out;
}

/// Accumulates parameter gradients into `grads`; returns d loss / d input.
template <typename S>
Matrix<S> gat_backward(const GatCache<S>& c, const Matrix<S>& d_out, const Topology& g, const ParamStore<S>& p,
                       const GatLayerSpec& L, ParamStore<S>& grads) {
  const Eigen::Index n = c.z.rows();
  Matrix<S> dz = Matrix<S>::Zero(n, L.out_dim);
  Matrix<S> ds_dst = Matrix<S>::Zero(n, 1), ds_src = Matrix<S>::Zero(n, 1);
  std::vector<S> d_alpha;
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    const std::size_t begin = g.offsets[v], end = g.offsets[v + 1];
    d_alpha.assign(end - begin, S(0));
    S weighted = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto ui = static_cast<Eigen::Index>(g.sources[k]);
      d_alpha[k - begin] = d_out.row(vi).dot(c.z.row(ui));
      dz.row(ui) += c.alpha[k] * d_out.row(vi);
      weighted += c.alpha[k] * d_alpha[k - begin];
    }
    for (std::size_t k = begin; k < end; ++k) {
      const S d_pre = c.alpha[k] * (d_alpha[k - begin] - weighted) * leaky_relu_grad(c.pre[k]);
      ds_dst(vi, 0) += d_pre;
      ds_src(static_cast<Eigen::Index>(g.sources[k]), 0) += d_pre;
    }
  }
  dz += ds_dst * p[L.att_dst].transpose() + ds_src * p[L.att_src].transpose();
  grads[L.att_dst] += c.z.transpose() * ds_dst;
  grads[L.att_src] += c.z.transpose() * ds_src;
  grads[L.weight] += dz.transpose() * c.input;
  return dz * p[L.weight];
}

/// Attention weights per target node, aligned with the topology's CSR entries.
template <typename S>
std::vector<std::vector<S>> attention_by_node(const std::vector<S>& alpha, const Topology& g) {
  std::vector<std::vector<S>> out(g.num_nodes);
  for (std::size_t v = 0; v < g.num_nodes; ++v) out[v].assign(alpha.begin() + static_cast<std::ptrdiff_t>(g.offsets[v]), alpha.begin() + static_cast<std::ptrdiff_t>(g.offsets[v + 1]));
  return out;
}

// ---------------------------------------------------------------------------
// Typed (HGT-style) layer.

struct HgtLayerSpec {
  Eigen::Index in_dim = 0, out_dim = 0;
  std::vector<std::size_t> node_weight;  // per node type
  std::vector<std::size_t> relation;     // per relation, self loop last
  std::vector<std::size_t> att_dst;      // per relation
  std::vector<std::size_t> att_src;      // per relation
};

template <typename S>
HgtLayerSpec add_hgt_layer(ParamStore<S>& params, const std::string& prefix, Eigen::Index in_dim, Eigen::Index out_dim,
                           int num_node_types, int num_edge_types, std::mt19937_64& rng) {
  HgtLayerSpec spec;
  spec.in_dim = in_dim;
  spec.out_dim = out_dim;
  for (int t = 0; t < num_node_types; ++t)
    spec.node_weight.push_back(params.add(prefix + ".node" + std::to_string(t) + ".weight", glorot_uniform<S>(out_dim, in_dim, rng)));
  for (int r = 0; r <= num_edge_types; ++r) {
    const std::string rel = prefix + ".rel" + std::to_string(r);
    spec.relation.push_back(params.add(rel + ".matrix", Matrix<S>::Identity(out_dim, out_dim)));
    spec.att_dst.push_back(params.add(rel + ".att_dst", glorot_uniform<S>(out_dim, 1, rng)));
    spec.att_src.push_back(params.add(rel + ".att_src", glorot_uniform<S>(out_dim, 1, rng)));
  }
  return spec;
}

template <typename S>
struct HgtCache {
  Matrix<S> input;
  Matrix<S> z;    // per node, projected with its own type
  Matrix<S> msg;  // per CSR entry
  std::vector<S> pre, alpha;
};

inline void check_typed(const Topology& g, const HgtLayerSpec& L) {
  if (g.num_node_types > static_cast<int>(L.node_weight.size()))
    throw LookupError("graph has " + std::to_string(g.num_node_types) + " node types, layer has " +
                      std::to_string(L.node_weight.size()));
  if (g.num_edge_types + 1 > static_cast<int>(L.relation.size()))
    throw LookupError("graph has " + std::to_string(g.num_edge_types) + " edge types, layer has " +
                      std::to_string(L.relation.size() - 1));
}

// The self loop always maps to the layer's last relation bank, even when the
// graph uses fewer stored relations than the layer was built for.
inline std::size_t bank_of(const Topology& g, const HgtLayerSpec& L, int relation) {
  return relation == g.self_relation() ? L.relation.size() - 1 : static_cast<std::size_t>(relation);
}

template <typename S>
Matrix<S> hgt_forward(const Matrix<S>& h, const Topology& g, const ParamStore<S>& p, const HgtLayerSpec& L,
                      HgtCache<S>* cache = nullptr) {
  check_states(h.rows(), h.cols(), g, L.in_dim);
  check_typed(g, L);
  const Eigen::Index n = h.rows();
  Matrix<S> z(n, L.out_dim);
  for (Eigen::Index v = 0; v < n; ++v)
    z.row(v) = h.row(v) * p[L.node_weight[static_cast<std::size_t>(g.node_type[static_cast<std::size_t>(v)])]].transpose();
  const std::size_t entries = g.num_entries();
  Matrix<S> msg(static_cast<Eigen::Index>(entries), L.out_dim);
  std::vector<S> pre(entries), alpha(entries);
  Matrix<S> out = Matrix<S>::Zero(n, L.out_dim);
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    const std::size_t begin = g.offsets[v], end = g.offsets[v + 1];
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t r = bank_of(g, L, g.relations[k]);
      const auto ki = static_cast<Eigen::Index>(k);
      msg.row(ki) = z.row(static_cast<Eigen::Index>(g.sources[k])) * p[L.relation[r]].transpose();
      pre[k] = z.row(vi).dot(p[L.att_dst[r]].col(0).transpose()) + msg.row(ki).dot(p[L.att_src[r]].col(0).transpose());
    }
    neighborhood_softmax(pre, alpha, begin, end);
    for (std::size_t k = begin; k < end; ++k) out.row(vi) += alpha[k] * msg.row(static_cast<Eigen::Index>(k));
  }
  if (cache) {
    cache->input = h;
    cache->z = std::move(z);
    cache->msg = std::move(msg);
    cache->pre = std::move(pre);
    cache->alpha = std::move(alpha);
  }
  return out;
}

template <typename S>
Matrix<S> hgt_backward(const HgtCache<S>& c, const Matrix<S>& d_out, const Topology& g, const ParamStore<S>& p,
                       const HgtLayerSpec& L, ParamStore<S>& grads) {
  const Eigen::Index n = c.z.rows();
  Matrix<S> dz = Matrix<S>::Zero(n, L.out_dim);
  std::vector<S> d_alpha;
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    const std::size_t begin = g.offsets[v], end = g.offsets[v + 1];
    d_alpha.assign(end - begin, S(0));
    S weighted = 0;
    for (std::size_t k = begin; k < end; ++k) {
      d_alpha[k - begin] = d_out.row(vi).dot(c.msg.row(static_cast<Eigen::Index>(k)));
      weighted += c.alpha[k] * d_alpha[k - begin];
    }
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t r = bank_of(g, L, g.relations[k]);
      const auto ki = static_cast<Eigen::Index>(k);
      const auto ui = static_cast<Eigen::Index>(g.sources[k]);
      const S d_pre = c.alpha[k] * (d_alpha[k - begin] - weighted) * leaky_relu_grad(c.pre[k]);
      Matrix<S> d_msg = c.alpha[k] * d_out.row(vi) + d_pre * p[L.att_src[r]].transpose();
      grads[L.att_src[r]] += d_pre * c.msg.row(ki).transpose();
      grads[L.att_dst[r]] += d_pre * c.z.row(vi).transpose();
      dz.row(vi) += d_pre * p[L.att_dst[r]].transpose();
      grads[L.relation[r]] += d_msg.transpose() * c.z.row(ui);
      dz.row(ui) += d_msg * p[L.relation[r]];
    }
  }
  Matrix<S> dh(n, L.in_dim);
  for (Eigen::Index v = 0; v < n; ++v) {
    const std::size_t w = L.node_weight[static_cast<std::size_t>(g.node_type[static_cast<std::size_t>(v)])];
    grads[w] += dz.row(v).transpose() * c.input.row(v);
    dh.row(v) = dz.row(v) * p[w];
  }
  return dh;
}

/// Copies gat parameters into every bank of a typed layer with identity
/// relation matrices.
template <typename S>
void tie_hgt_to_gat(ParamStore<S>& hgt_params, const HgtLayerSpec& hgt, const ParamStore<S>& gat_params,
                    const GatLayerSpec& gat) {
  for (auto w : hgt.node_weight) hgt_params[w] = gat_params[gat.weight];
  for (auto r : hgt.relation) hgt_params[r] = Matrix<S>::Identity(hgt.out_dim, hgt.out_dim);
  for (auto a : hgt.att_dst) hgt_params[a] = gat_params[gat.att_dst];
  for (auto a : hgt.att_src) hgt_params[a] = gat_params[gat.att_src];
}

// ---------------------------------------------------------------------------
// Layer stacks.

enum class GraphMode { homogeneous, heterogeneous };

inline std::string to_string(GraphMode mode) { return mode == GraphMode::homogeneous ? "homogeneous" : "heterogeneous"; }

inline GraphMode parse_graph_mode(std::string_view s) {
  if (s == "homogeneous" || s == "homo") return GraphMode::homogeneous;
  if (s == "heterogeneous" || s == "hetero") return GraphMode::heterogeneous;
  throw ConfigError("unknown graph mode: " + std::string(s));
}

struct StackSpec {
  GraphMode mode = GraphMode::homogeneous;
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 64;
  Eigen::Index output_dim = 64;
  int num_layers = 2;
  bool residual = true;
  int num_node_types = 2;
  int num_edge_types = 3;

  Eigen::Index final_dim() const { return output_dim + (residual ? input_dim : 0); }

  nlohmann::json to_json() const {
    return {{"mode", to_string(mode)}, {"input_dim", input_dim},   {"hidden_dim", hidden_dim},
            {"output_dim", output_dim}, {"num_layers", num_layers}, {"residual", residual},
            {"num_node_types", num_node_types}, {"num_edge_types", num_edge_types}};
  }
  static StackSpec from_json(const nlohmann::json& j) {
    StackSpec s;
    s.mode = parse_graph_mode(j.at("mode").get<std::string>());
    s.input_dim = j.at("input_dim").get<Eigen::Index>();
    s.hidden_dim = j.at("hidden_dim").get<Eigen::Index>();
    s.output_dim = j.at("output_dim").get<Eigen::Index>();
    s.num_layers = j.at("num_layers").get<int>();
    s.residual = j.at("residual").get<bool>();
    s.num_node_types = j.at("num_node_types").get<int>();
    s.num_edge_types = j.at("num_edge_types").get<int>();
    return s;
  }
};

using LayerSpec = std::variant<GatLayerSpec, HgtLayerSpec>;

/// Layer descriptors for a stack whose tensors live in `params` under `prefix`.
struct Stack {
  StackSpec spec;
  std::vector<LayerSpec> layers;
};

template <typename S>
Stack add_stack(ParamStore<S>& params, const std::string& prefix, const StackSpec& spec, std::mt19937_64& rng) {
  if (spec.num_layers < 1) throw ConfigError("a stack needs at least one layer");
  if (spec.input_dim < 1 || spec.hidden_dim < 1 || spec.output_dim < 1) throw ShapeError("stack dims must be positive");
  Stack stack{spec, {}};
  Eigen::Index in = spec.input_dim;
  for (int l = 0; l < spec.num_layers; ++l) {
    const Eigen::Index out = (l + 1 == spec.num_layers) ? spec.output_dim : spec.hidden_dim;
    const std::string name = prefix + "layer" + std::to_string(l);
    if (spec.mode == GraphMode::homogeneous) stack.layers.emplace_back(add_gat_layer(params, name, in, out, rng));
    else stack.layers.emplace_back(add_hgt_layer(params, name, in, out, spec.num_node_types, spec.num_edge_types, rng));
    in = out;
  }
  return stack;
}

/// Rebinds a stack to tensors already present in `params` (checkpoint reload).
template <typename S>
Stack bind_stack(const ParamStore<S>& params, const std::string& prefix, const StackSpec& spec) {
  auto need = [&](const std::string& name) {
    auto i = params.find(name);
    if (!i) throw LookupError("checkpoint lacks tensor " + name);
    return *i;
  };
  Stack stack{spec, {}};
  Eigen::Index in = spec.input_dim;
  for (int l = 0; l < spec.num_layers; ++l) {
    const Eigen::Index out = (l + 1 == spec.num_layers) ? spec.output_dim : spec.hidden_dim;
    const std::string name = prefix + "layer" + std::to_string(l);
    if (spec.mode == GraphMode::homogeneous) {
      GatLayerSpec L{need(name + ".weight"), need(name + ".att_dst"), need(name + ".att_src"), in, out};
      if (params[L.weight].rows() != out || params[L.weight].cols() != in) throw ShapeError("tensor " + name + ".weight has the wrong shape");
      stack.layers.emplace_back(L);
    } else {
      HgtLayerSpec L;
      L.in_dim = in;
      L.out_dim = out;
      for (int t = 0; t < spec.num_node_types; ++t) L.node_weight.push_back(need(name + ".node" + std::to_string(t) + ".weight"));
      for (int r = 0; r <= spec.num_edge_types; ++r) {
        const std::string rel = name + ".rel" + std::to_string(r);
        L.relation.push_back(need(rel + ".matrix"));
        L.att_dst.push_back(need(rel + ".att_dst"));
        L.att_src.push_back(need(rel + ".att_src"));
      }
      stack.layers.emplace_back(std::move(L));
    }
    in = out;
  }
  return stack;
}

template <typename S>
struct StackCache {
  Matrix<S> input;
  std::vector<std::variant<GatCache<S>, HgtCache<S>>> layers;
  std::vector<Matrix<S>> pre_activation;  // per layer, before ELU
};

/// One attention layer (gat or typed), activation applied when `activate`.
template <typename S>
Matrix<S> apply_layer(const LayerSpec& layer, const Matrix<S>& h, const Topology& g, const ParamStore<S>& p,
                      std::variant<GatCache<S>, HgtCache<S>>* cache) {
  if (const auto* gat = std::get_if<GatLayerSpec>(&layer)) {
    if (!cache) return gat_forward(h, g, p, *gat);
    GatCache<S> c;
    auto out = gat_forward(h, g, p, *gat, &c);
    *cache = std::move(c);
    return out;
  }
  const auto& hgt = std::get<HgtLayerSpec>(layer);
  if (!cache) return hgt_forward(h, g, p, hgt);
  HgtCache<S> c;
  auto out = hgt_forward(h, g, p, hgt, &c);
  *cache = std::move(c);
  return out;
}

/// Runs the stack; output is [last layer | x] when the stack is residual.
template <typename S>
Matrix<S> stack_forward(const Stack& stack, const ParamStore<S>& p, const Topology& g, const Matrix<S>& x,
                        StackCache<S>* cache = nullptr) {
  if (x.cols() != stack.spec.input_dim)
    throw ShapeError("feature width " + std::to_string(x.cols()) + " != model input dim " + std::to_string(stack.spec.input_dim));
  if (cache) {
    cache->input = x;
    cache->layers.assign(stack.layers.size(), GatCache<S>{});
    cache->pre_activation.clear();
  }
  Matrix<S> h = x;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    Matrix<S> pre = apply_layer(stack.layers[l], h, g, p, cache ? &cache->layers[l] : nullptr);
    const bool last = l + 1 == stack.layers.size();
    h = last ? pre : elu(pre);
    if (cache) cache->pre_activation.push_back(std::move(pre));
  }
  if (!stack.spec.residual) return h;
  Matrix<S> out(h.rows(), h.cols() + x.cols());
  out << h, x;
  return out;
}

/// Accumulates parameter gradients; returns d loss / d x through the layers
/// (the residual pass-through of x is added as well).
template <typename S>
Matrix<S> stack_backward(const Stack& stack, const ParamStore<S>& p, const Topology& g, const StackCache<S>& cache,
                         const Matrix<S>& d_out, ParamStore<S>& grads) {
  const Eigen::Index out_dim = stack.spec.output_dim;
  Matrix<S> d_h = d_out.leftCols(out_dim);
  for (std::size_t l = stack.layers.size(); l-- > 0;) {
    const bool last = l + 1 == stack.layers.size();
    const Matrix<S> d_pre = last ? d_h : elu_backward(cache.pre_activation[l], d_h);
    if (const auto* gat = std::get_if<GatLayerSpec>(&stack.layers[l]))
      d_h = gat_backward(std::get<GatCache<S>>(cache.layers[l]), d_pre, g, p, *gat, grads);
    else
      d_h = hgt_backward(std::get<HgtCache<S>>(cache.layers[l]), d_pre, g, p, std::get<HgtLayerSpec>(stack.layers[l]), grads);
  }
  if (stack.spec.residual) d_h += d_out.rightCols(stack.spec.input_dim);
  return d_h;
}

/// A stack plus the parameters it owns. The CaseLink model is a residual
/// two-layer stack over the case-charge graph.
template <typename S>
struct GnnModel {
  Stack stack;
  ParamStore<S> params;
  std::uint64_t seed = 0;

  static GnnModel init(const StackSpec& spec, std::uint64_t seed) {
    GnnModel m;
    m.seed = seed;
    std::mt19937_64 rng(seed);
    m.stack = add_stack(m.params, "", spec, rng);
    return m;
  }

  const StackSpec& spec() const { return stack.spec; }

  nlohmann::json to_json() const {
    return params_to_json(params, {{"kind", "caselink"}, {"stack", stack.spec.to_json()}, {"seed", seed}});
  }
  static GnnModel from_json(const nlohmann::json& j) {
    GnnModel m;
    m.params = params_from_json<S>(j);
    const auto& meta = j.at("meta");
    m.seed = meta.value("seed", std::uint64_t{0});
    m.stack = bind_stack(m.params, "", StackSpec::from_json(meta.at("stack")));
    return m;
  }
};

/// Final node states [layer-2 output | x].
template <typename S>
Matrix<S> caselink_forward(const GnnModel<S>& model, const Topology& g, const Matrix<S>& x, StackCache<S>* cache = nullptr) {
  if (model.spec().mode == GraphMode::heterogeneous && g.num_node_types > model.spec().num_node_types)
    throw LookupError("graph node types exceed the model's parameter banks");
  return stack_forward(model.stack, model.params, g, x, cache);
}

}  // namespace caselink
