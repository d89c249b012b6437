// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// The case-charge graph. Three undirected edge families:
//   case-case      BM25 per-case top-k pairs over the pool
//   charge-charge  cosine(charge embeddings) >= delta
//   case-charge    charge name occurs in the case text (case-insensitive)
//
// Graph file (graph.json), stable for external tooling:
//
//   {"format": "caselink-graph-v1", "mode": "heterogeneous", "feature_dim": 512,
//    "features": "features.jsonl",
//    "nodes": [{"id": "train_c0001", "kind": "case", "feature_ref": "train_c0001"}, ...],
//    "edges": [{"u": "train_c0001", "v": "train_c0007", "type": "case-case"}, ...]}
//
// Edges are stored once with u < v by node index; features live in an
// EmbeddingStore file next to the graph.

#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "caselink/bm25.hpp"
#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/neural.hpp"
#include "json.hpp"

namespace caselink {

enum class NodeKind { case_node = 0, charge = 1 };
enum class EdgeType { case_case = 0, charge_charge = 1, case_charge = 2 };

inline std::string to_string(NodeKind k) { return k == NodeKind::case_node ? "case" : "charge"; }

inline std::string to_string(EdgeType t) {
  switch (t) {
    case EdgeType::case_case: return "case-case";
    case EdgeType::charge_charge: return "charge-charge";
    case EdgeType::case_charge: return "case-charge";
  }
  return "?";
}

inline NodeKind parse_node_kind(std::string_view s) {
  if (s == "case") return NodeKind::case_node;
  if (s == "charge") return NodeKind::charge;
  throw ValidationError("unknown node kind: " + std::string(s));
}

inline EdgeType parse_edge_type(std::string_view s) {
  if (s == "case-case") return EdgeType::case_case;
  if (s == "charge-charge") return EdgeType::charge_charge;
  if (s == "case-charge") return EdgeType::case_charge;
  throw ValidationError("unknown edge type: " + std::string(s));
}

/// Node id of a charge; the prefix keeps charge and case ids disjoint.
inline std::string charge_node_id(std::string_view name) { return "charge::" + std::string(name); }

/// Unicode-aware lower-casing of a normalized text.
inline std::string fold_case(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) detail::append_utf8(out, detail::to_lower(detail::next_code_point(text, i)));
  return out;
}

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::case_node;
};

struct GraphEdge {
  std::size_t u = 0, v = 0;  // u < v
  EdgeType type = EdgeType::case_case;
  friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

class CaseLinkGraph {
 public:
  GraphMode mode = GraphMode::homogeneous;

  CaseLinkGraph() = default;
  CaseLinkGraph(GraphMode m, std::vector<GraphNode> nodes, EmbeddingStore features, std::vector<GraphEdge> edges)
      : mode(m), nodes_(std::move(nodes)), features_(std::move(features)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!index_.emplace(nodes_[i].id, i).second) throw ValidationError("duplicate graph node id: " + nodes_[i].id);
      if (!features_.contains(nodes_[i].id)) throw LookupError("no feature vector for graph node " + nodes_[i].id);
    }
    for (auto& e : edges_) {
      if (e.u >= nodes_.size() || e.v >= nodes_.size()) throw ValidationError("edge endpoint out of range");
      if (e.u == e.v) throw ValidationError("self edge on node " + nodes_[e.u].id);
      if (e.v < e.u) std::swap(e.u, e.v);
      if (!endpoints_match(e)) throw ValidationError(to_string(e.type) + " edge between " + nodes_[e.u].id + " and " + nodes_[e.v].id +
                                                     " violates endpoint kinds");
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end(),
                             [](const GraphEdge& a, const GraphEdge& b) { return a.u == b.u && a.v == b.v; }),
                 edges_.end());
  }

  const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }
  const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
  const EmbeddingStore& features() const noexcept { return features_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t feature_dim() const noexcept { return features_.dim(); }

  bool contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }
  std::size_t index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw LookupError("node " + std::string(id) + " is not in the graph");
    return it->second;
  }

  bool has_edge(std::string_view a, std::string_view b) const {
    if (!contains(a) || !contains(b)) return false;
    std::size_t u = index_of(a), v = index_of(b);
    if (v < u) std::swap(u, v);
    return std::any_of(edges_.begin(), edges_.end(), [&](const GraphEdge& e) { return e.u == u && e.v == v; });
  }

  bool endpoints_match(const GraphEdge& e) const {
    const bool cu = nodes_[e.u].kind == NodeKind::case_node, cv = nodes_[e.v].kind == NodeKind::case_node;
    switch (e.type) {
      case EdgeType::case_case: return cu && cv;
      case EdgeType::charge_charge: return !cu && !cv;
      case EdgeType::case_charge: return cu != cv;
    }
    return false;
  }

  /// Node features as a matrix aligned with node order.
  template <typename S>
  Matrix<S> feature_matrix() const {
    Matrix<S> x(static_cast<Eigen::Index>(nodes_.size()), static_cast<Eigen::Index>(features_.dim()));
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& f = features_.at(nodes_[i].id);
      for (std::size_t j = 0; j < f.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<S>(f[j]);
    }
    return x;
  }

  /// Typed adjacency (node types case=0/charge=1, three relations); a
  /// homogeneous graph hides the types from the model.
  Topology topology() const {
    std::vector<int> types;
    for (const auto& n : nodes_) types.push_back(static_cast<int>(n.kind));
    std::vector<Topology::Edge> edges;
    for (const auto& e : edges_) edges.push_back({e.u, e.v, static_cast<int>(e.type)});
    Topology t = Topology::build(nodes_.size(), std::move(types), 2, 3, edges);
    return mode == GraphMode::homogeneous ? t.collapsed() : t;
  }

 private:
  std::vector<GraphNode> nodes_;
  EmbeddingStore features_;
  std::vector<GraphEdge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GraphBuildOptions {
  int k = 5;
  double delta = 0.9;
  GraphMode mode = GraphMode::heterogeneous;
  double bm25_k1 = Bm25Index::kDefaultK1;
  double bm25_b = Bm25Index::kDefaultB;
};

inline CaseLinkGraph build_graph(const std::vector<CaseDocument>& pool, const std::vector<ChargeEntry>& charges,
                                 const EmbeddingStore& case_emb, const EmbeddingStore& charge_emb,
                                 const GraphBuildOptions& options = {}) {
  if (!(options.delta > 0.0 && options.delta <= 1.0)) throw ConfigError("graph delta must lie in (0, 1]");
  if (options.k < 1) throw ConfigError("graph k must be >= 1");
  if (pool.empty()) throw ValidationError("cannot build a graph over an empty case pool");
  for (const auto& d : pool)
    if (!case_emb.contains(d.id)) throw LookupError("no case embedding for " + d.id);
  for (const auto& c : charges)
    if (!charge_emb.contains(charge_node_id(c.name))) throw LookupError("no charge embedding for " + charge_node_id(c.name));
  if (!charges.empty() && charge_emb.dim() != case_emb.dim())
    throw ShapeError("charge embedding dim " + std::to_string(charge_emb.dim()) + " != case embedding dim " +
                     std::to_string(case_emb.dim()));

  std::vector<GraphNode> nodes;
  EmbeddingStore features(case_emb.dim());
  for (const auto& d : pool) {
    nodes.push_back({d.id, NodeKind::case_node});
    features.insert(d.id, case_emb.at(d.id));
  }
  for (const auto& c : charges) {
    const auto id = charge_node_id(c.name);
    nodes.push_back({id, NodeKind::charge});
    features.insert(id, charge_emb.at(id));
  }
  const std::size_t first_charge = pool.size();

  auto case_case = std::async(std::launch::async, [&] {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < pool.size(); ++i) pos.emplace(pool[i].id, i);
    const auto index = Bm25Index::build(pool, options.bm25_k1, options.bm25_b);
    std::vector<GraphEdge> out;
    for (const auto& [a, b] : top_k_pairs(index, pool, options.k)) out.push_back({pos.at(a), pos.at(b), EdgeType::case_case});
    return out;
  });
  auto charge_charge = std::async(std::launch::async, [&] {
    std::vector<GraphEdge> out;
    for (std::size_t i = 0; i < charges.size(); ++i)
      for (std::size_t j = i + 1; j < charges.size(); ++j)
        if (cosine(charge_emb.at(charge_node_id(charges[i].name)), charge_emb.at(charge_node_id(charges[j].name))) >= options.delta)
          out.push_back({first_charge + i, first_charge + j, EdgeType::charge_charge});
    return out;
  });
  auto case_charge = std::async(std::launch::async, [&] {
    std::vector<std::string> names;
    for (const auto& c : charges) names.push_back(fold_case(normalize_whitespace(c.name)));
    std::vector<GraphEdge> out;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const std::string text = fold_case(normalize_whitespace(pool[i].text));
      for (std::size_t j = 0; j < names.size(); ++j)
        if (!names[j].empty() && text.find(names[j]) != std::string::npos)
          out.push_back({i, first_charge + j, EdgeType::case_charge});
    }
    return out;
  });

  std::vector<GraphEdge> edges = case_case.get();
  for (auto* family : {&charge_charge, &case_charge}) {
    auto part = family->get();
    edges.insert(edges.end(), part.begin(), part.end());
  }
  return CaseLinkGraph(options.mode, std::move(nodes), std::move(features), std::move(edges));
}

inline CaseLinkGraph collapse_to_homogeneous(const CaseLinkGraph& g) {
  CaseLinkGraph out = g;
  out.mode = GraphMode::homogeneous;
  return out;
}

struct GraphStats {
  std::string mode;
  std::map<std::string, std::size_t> node_counts;  // by kind
  std::map<std::string, std::size_t> edge_counts;  // by type
  std::size_t total_edges = 0;
  std::map<std::string, std::map<std::size_t, std::size_t>> degree_histogram;  // kind -> degree -> count
  std::vector<std::string> isolated;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;

  nlohmann::json to_json() const {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [kind, h] : degree_histogram) {
      nlohmann::json row = nlohmann::json::object();
      for (const auto& [deg, count] : h) row[std::to_string(deg)] = count;
      hist[kind] = row;
    }
    return {{"mode", mode},
            {"node_counts", node_counts},
            {"edge_counts", edge_counts},
            {"total_edges", total_edges},
            {"degree_histogram", hist},
            {"isolated", isolated}};
  }
};

inline GraphStats graph_stats(const CaseLinkGraph& g) {
  GraphStats s;
  s.mode = to_string(g.mode);
  s.node_counts = {{"case", 0}, {"charge", 0}};
  s.edge_counts = {{"case-case", 0}, {"charge-charge", 0}, {"case-charge", 0}};
  std::vector<std::size_t> degree(g.num_nodes(), 0);
  for (const auto& n : g.nodes()) ++s.node_counts[to_string(n.kind)];
  for (const auto& e : g.edges()) {
    ++s.edge_counts[to_string(e.type)];
    ++degree[e.u];
    ++degree[e.v];
  }
  s.total_edges = g.edges().size();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    ++s.degree_histogram[to_string(g.nodes()[i].kind)][degree[i]];
    if (degree[i] == 0) s.isolated.push_back(g.nodes()[i].id);
  }
  return s;
}

inline nlohmann::json graph_to_json(const CaseLinkGraph& g, const std::string& features_file = "features.jsonl") {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : g.nodes()) nodes.push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"feature_ref", n.id}});
  for (const auto& e : g.edges())
    edges.push_back({{"u", g.nodes()[e.u].id}, {"v", g.nodes()[e.v].id}, {"type", to_string(e.type)}});
  return {{"format", "caselink-graph-v1"}, {"mode", to_string(g.mode)}, {"feature_dim", g.feature_dim()},
          {"features", features_file},     {"nodes", nodes},             {"edges", edges}};
}

inline CaseLinkGraph graph_from_json(const nlohmann::json& j, const EmbeddingStore& feature_store) {
  if (j.value("format", "") != "caselink-graph-v1") throw ValidationError("not a caselink graph file");
  std::vector<GraphNode> nodes;
  EmbeddingStore features(feature_store.dim());
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& n : j.at("nodes")) {
    const auto id = n.at("id").get<std::string>();
    pos.emplace(id, nodes.size());
    nodes.push_back({id, parse_node_kind(n.at("kind").get<std::string>())});
    features.insert(id, feature_store.at(n.value("feature_ref", id)));
  }
  std::vector<GraphEdge> edges;
  for (const auto& e : j.at("edges")) {
    auto lookup = [&](const char* key) {
      const auto id = e.at(key).get<std::string>();
      auto it = pos.find(id);
      if (it == pos.end()) throw LookupError("edge references unknown node " + id);
      return it->second;
    };
    edges.push_back({lookup("u"), lookup("v"), parse_edge_type(e.at("type").get<std::string>())});
  }
  return CaseLinkGraph(parse_graph_mode(j.at("mode").get<std::string>()), std::move(nodes), std::move(features),
                       std::move(edges));
}

/// Writes graph.json and its feature store into `dir`.
inline void save_graph(const CaseLinkGraph& g, const fs::path& dir) {
  g.features().save(dir / "features.jsonl");
  write_file_atomic(dir / "graph.json", graph_to_json(g).dump(1) + "\n");
}

inline CaseLinkGraph load_graph(const fs::path& dir) {
  const auto j = nlohmann::json::parse(read_file(dir / "graph.json"));
  return graph_from_json(j, EmbeddingStore::load(dir / j.value("features", std::string("features.jsonl"))));
}

}  // namespace caselink
