// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference validation of the hand-written reverse passes.
// Every registered op builds a random float64 instance from a seed, exposes
// its trainable scalars (parameters and, where meaningful, inputs), a scalar
// loss and the analytic gradient of that loss.
//
//   numeric_i = (L(v + h e_i) - L(v - h e_i)) / 2h,  h = 1e-5
//   rel_err_i = |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-4)
//
// The 1e-4 floor keeps components whose true gradient is ~0 from turning
// rounding noise into huge ratios.

#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "caselink/casegnn.hpp"
#include "caselink/common.hpp"
#include "caselink/neural.hpp"
#include "caselink/tensor.hpp"
#include "caselink/training.hpp"

namespace caselink {

struct GradProblem {
  std::vector<double*> vars;
  std::function<double()> loss;
  std::function<std::vector<double>()> grad;  // aligned with vars
};

struct GradCheckReport {
  std::string op;
  int trials = 0;
  std::uint64_t seed = 0;
  std::size_t scalars_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;

  bool passed(double tolerance = 1e-4) const { return max_rel_error < tolerance; }
  friend bool operator==(const GradCheckReport&, const GradCheckReport&) = default;
};

namespace gradcheck_detail {

inline constexpr double kStep = 1e-5;
inline constexpr double kFloor = 1e-4;

inline void collect(ParamStore<double>& store, std::vector<double*>& out) {
  for (std::size_t t = 0; t < store.count(); ++t)
    for (Eigen::Index i = 0; i < store[t].size(); ++i) out.push_back(store[t].data() + i);
}

inline void collect(Matrix<double>& m, std::vector<double*>& out) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
}

inline void flatten(const ParamStore<double>& store, std::vector<double>& out) {
  for (std::size_t t = 0; t < store.count(); ++t) out.insert(out.end(), store[t].data(), store[t].data() + store[t].size());
}

inline void flatten(const Matrix<double>& m, std::vector<double>& out) { out.insert(out.end(), m.data(), m.data() + m.size()); }

inline Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Random undirected typed graph; edges appear with probability p.
inline Topology random_topology(std::size_t n, int node_types, int edge_types, double p, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nt(0, node_types - 1), et(0, edge_types - 1);
  std::bernoulli_distribution keep(p);
  std::vector<int> types(n);
  for (auto& t : types) t = nt(rng);
  std::vector<Topology::Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (keep(rng)) edges.push_back({u, v, et(rng)});
  return Topology::build(n, types, node_types, edge_types, edges);
}

/// Perturbs every parameter away from its identity/zero initialization so
/// relation matrices are exercised too.
inline void jitter(ParamStore<double>& p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.3);
  for (std::size_t t = 0; t < p.count(); ++t)
    for (Eigen::Index i = 0; i < p[t].size(); ++i) p[t].data()[i] += n(rng);
}

struct State {
  ParamStore<double> params;
  Matrix<double> x, probe;
  Topology topo;
  std::vector<LayerSpec> layers;
  GnnModel<double> model;
  CaseGnnModel<double> cg;
  TextGraph fact, issue;
  std::vector<ContrastiveExample> batch;
  std::vector<Eigen::Index> rows, cols;
  double zero_scale = 1.0;
};

// Single-layer probe: L = sum(probe .* layer(x)).
inline GradProblem layer_problem(State& s, bool typed, std::mt19937_64& rng) {
  const std::size_t n = typed ? 8 : 6;
  const Eigen::Index in = 4, out = 3;
  s.topo = typed ? random_topology(n, 2, 3, 0.4, rng) : random_topology(n, 1, 1, 0.4, rng);
  s.x = random_matrix(static_cast<Eigen::Index>(n), in, rng);
  s.probe = random_matrix(static_cast<Eigen::Index>(n), out, rng) * s.zero_scale;
  if (typed) s.layers = {add_hgt_layer(s.params, "l", in, out, 2, 3, rng)};
  else s.layers = {add_gat_layer(s.params, "l", in, out, rng)};
  jitter(s.params, rng);
  GradProblem g;
  collect(s.params, g.vars);
  collect(s.x, g.vars);
  g.loss = [&s] { return apply_layer<double>(s.layers[0], s.x, s.topo, s.params, nullptr).cwiseProduct(s.probe).sum(); };
  g.grad = [&s, typed] {
    ParamStore<double> grads = s.params.zeros_like();
    Matrix<double> dx;
    if (typed) {
      HgtCache<double> c;
      hgt_forward(s.x, s.topo, s.params, std::get<HgtLayerSpec>(s.layers[0]), &c);
      dx = hgt_backward(c, s.probe, s.topo, s.params, std::get<HgtLayerSpec>(s.layers[0]), grads);
    } else {
      GatCache<double> c;
      gat_forward(s.x, s.topo, s.params, std::get<GatLayerSpec>(s.layers[0]), &c);
      dx = gat_backward(c, s.probe, s.topo, s.params, std::get<GatLayerSpec>(s.layers[0]), grads);
    }
    std::vector<double> out;
    flatten(grads, out);
    flatten(dx, out);
    return out;
  };
  return g;
}

inline StackSpec small_stack(GraphMode mode, Eigen::Index input_dim) {
  StackSpec spec;
  spec.mode = mode;
  spec.input_dim = input_dim;
  spec.hidden_dim = 4;
  spec.output_dim = 3;
  return spec;
}

inline GradProblem forward_problem(State& s, int trial, std::mt19937_64& rng) {
  const auto mode = trial % 2 ? GraphMode::heterogeneous : GraphMode::homogeneous;
  s.topo = random_topology(10, 2, 3, 0.3, rng);
  if (mode == GraphMode::homogeneous) s.topo = s.topo.collapsed();
  s.x = random_matrix(10, 5, rng);
  s.model = GnnModel<double>::init(small_stack(mode, 5), rng());
  jitter(s.model.params, rng);
  s.probe = random_matrix(10, s.model.spec().final_dim(), rng);
  GradProblem g;
  collect(s.model.params, g.vars);
  collect(s.x, g.vars);
  g.loss = [&s] { return caselink_forward(s.model, s.topo, s.x).cwiseProduct(s.probe).sum(); };
  g.grad = [&s] {
    StackCache<double> cache;
    caselink_forward(s.model, s.topo, s.x, &cache);
    ParamStore<double> grads = s.model.params.zeros_like();
    const Matrix<double> dx = stack_backward(s.model.stack, s.model.params, s.topo, cache, s.probe, grads);
    std::vector<double> out;
    flatten(grads, out);
    flatten(dx, out);
    return out;
  };
  return g;
}

inline GradProblem info_nce_problem(State& s, std::mt19937_64& rng) {
  s.x = random_matrix(8, 8, rng);  // query, positive, 1 easy, 5 hard
  s.batch = {{0, 1, {2, 3, 4, 5, 6, 7}}};
  GradProblem g;
  collect(s.x, g.vars);
  g.loss = [&s] { return info_nce_rows(s.x, 0, 1, s.batch[0].negatives, 0.1); };
  g.grad = [&s] {
    Matrix<double> d = Matrix<double>::Zero(s.x.rows(), s.x.cols());
    info_nce_rows(s.x, 0, 1, s.batch[0].negatives, 0.1, &d);
    std::vector<double> out;
    flatten(d, out);
    return out;
  };
  return g;
}

inline GradProblem deg_reg_problem(State& s, std::mt19937_64& rng) {
  s.x = random_matrix(5, 8, rng);
  s.rows = {0, 1, 2};
  s.cols = {0, 1, 2, 3, 4};
  GradProblem g;
  collect(s.x, g.vars);
  g.loss = [&s] { return deg_reg(s.x, s.rows, s.cols); };
  g.grad = [&s] {
    Matrix<double> d = Matrix<double>::Zero(s.x.rows(), s.x.cols());
    deg_reg(s.x, s.rows, s.cols, &d);
    std::vector<double> out;
    flatten(d, out);
    return out;
  };
  return g;
}

// End to end: features -> caselink_forward -> combined loss on a 10-node graph.
inline GradProblem combined_problem(State& s, int trial, std::mt19937_64& rng) {
  const auto mode = trial % 2 ? GraphMode::heterogeneous : GraphMode::homogeneous;
  s.topo = random_topology(10, 2, 3, 0.3, rng);
  if (mode == GraphMode::homogeneous) s.topo = s.topo.collapsed();
  s.x = random_matrix(10, 5, rng);
  s.model = GnnModel<double>::init(small_stack(mode, 5), rng());
  jitter(s.model.params, rng);
  s.batch = {{0, 3, {4, 5, 6}}, {1, 4, {3, 7, 8}}};
  s.rows = {3, 4, 5, 6, 7, 8};
  s.cols = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  GradProblem g;
  collect(s.model.params, g.vars);
  g.loss = [&s] {
    const auto h = caselink_forward(s.model, s.topo, s.x);
    return combined_loss(h, s.batch, s.rows, s.cols, 0.1, 0.1).total;
  };
  g.grad = [&s] {
    StackCache<double> cache;
    const auto h = caselink_forward(s.model, s.topo, s.x, &cache);
    Matrix<double> d = Matrix<double>::Zero(h.rows(), h.cols());
    combined_loss(h, s.batch, s.rows, s.cols, 0.1, 0.1, &d);
    ParamStore<double> grads = s.model.params.zeros_like();
    stack_backward(s.model.stack, s.model.params, s.topo, cache, d, grads);
    std::vector<double> out;
    flatten(grads, out);
    return out;
  };
  return g;
}

inline TextGraph random_text_graph(ViewTag tag, std::size_t entities, Eigen::Index dim, std::mt19937_64& rng) {
  TextGraph g;
  g.tag = tag;
  std::bernoulli_distribution keep(0.4);
  for (std::size_t i = 0; i <= entities; ++i) {
    const auto f = random_matrix(1, dim, rng);
    g.nodes.push_back({i == entities ? "virtual" : "e" + std::to_string(i), "", std::vector<double>(f.data(), f.data() + dim)});
  }
  g.virtual_node = entities;
  for (std::size_t u = 0; u < entities; ++u)
    for (std::size_t v = 0; v < entities; ++v)
      if (u != v && keep(rng)) g.edges.emplace_back(u, v);
  return g;
}

inline GradProblem casegnn_problem(State& s, std::mt19937_64& rng) {
  s.fact = random_text_graph(ViewTag::fact, 4, 5, rng);
  s.issue = random_text_graph(ViewTag::issue, 3, 5, rng);
  s.cg = CaseGnnModel<double>::init(5, 4, 3, 2, rng());
  jitter(s.cg.params, rng);
  s.probe = random_matrix(1, s.cg.output_dim(), rng);
  GradProblem g;
  collect(s.cg.params, g.vars);
  g.loss = [&s] { return casegnn_forward(s.fact, s.issue, s.cg).dot(s.probe.row(0)); };
  g.grad = [&s] {
    CaseGnnCache<double> cache;
    casegnn_forward(s.fact, s.issue, s.cg, &cache);
    ParamStore<double> grads = s.cg.params.zeros_like();
    casegnn_backward<double>(s.fact, s.issue, s.cg, cache, s.probe.row(0), grads);
    std::vector<double> out;
    flatten(grads, out);
    return out;
  };
  return g;
}

}  // namespace gradcheck_detail

inline const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {"gat_layer", "hgt_layer",      "caselink_forward", "info_nce",
                                               "deg_reg",   "combined_loss", "casegnn_forward",  "zero_probe"};
  return ops;
}

/// Compares analytic and numeric gradients of a prepared problem.
inline void compare_gradients(GradProblem& problem, GradCheckReport& report) {
  using namespace gradcheck_detail;
  const auto analytic = problem.grad();
  if (analytic.size() != problem.vars.size()) throw ShapeError("gradient length does not match variable count");
  for (std::size_t i = 0; i < problem.vars.size(); ++i) {
    double* v = problem.vars[i];
    const double saved = *v;
    *v = saved + kStep;
    const double up = problem.loss();
    *v = saved - kStep;
    const double down = problem.loss();
    *v = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    const double err = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), kFloor});
    report.max_rel_error = std::max(report.max_rel_error, err);
    report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(analytic[i]));
    ++report.scalars_checked;
  }
}

/// Max relative error over `trials` random float64 instances of `op_id`.
/// "zero_probe" is a gat layer under an all-zero probe, whose gradient is exactly zero.
inline GradCheckReport check_gradients(const std::string& op_id, int trials, std::uint64_t seed) {
  using namespace gradcheck_detail;
  const auto& ops = gradcheck_ops();
  if (std::find(ops.begin(), ops.end(), op_id) == ops.end()) throw LookupError("no gradient check registered for " + op_id);
  if (trials < 1) throw ConfigError("check_gradients needs trials >= 1");
  GradCheckReport report;
  report.op = op_id;
  report.trials = trials;
  report.seed = seed;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(t));
    State s;
    GradProblem p;
    if (op_id == "gat_layer") p = layer_problem(s, false, rng);
    else if (op_id == "hgt_layer") p = layer_problem(s, true, rng);
    else if (op_id == "caselink_forward") p = forward_problem(s, t, rng);
    else if (op_id == "info_nce") p = info_nce_problem(s, rng);
    else if (op_id == "deg_reg") p = deg_reg_problem(s, rng);
    else if (op_id == "combined_loss") p = combined_problem(s, t, rng);
    else if (op_id == "casegnn_forward") p = casegnn_problem(s, rng);
    else {
      s.zero_scale = 0.0;
      p = layer_problem(s, false, rng);
    }
    compare_gradients(p, report);
  }
  return report;
}

}  // namespace caselink
