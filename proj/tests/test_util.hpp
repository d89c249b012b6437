// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit tests.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "caselink/caselink.hpp"

namespace caselink::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("caselink_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline CaseDocument doc(std::string id, std::string text, CaseRole role = CaseRole::candidate) {
  return {std::move(id), std::move(text), std::nullopt, role};
}

/// Writes a split directory in the on-disk corpus layout.
inline void write_split(const fs::path& root, const std::string& name, const std::vector<CaseDocument>& queries,
                        const std::vector<CaseDocument>& candidates, const RelevanceLabels& labels) {
  for (const auto& q : queries) write_file_atomic(root / name / "queries" / (q.id + ".txt"), q.text);
  for (const auto& c : candidates) write_file_atomic(root / name / "candidates" / (c.id + ".txt"), c.text);
  fs::create_directories(root / name / "candidates");
  write_file_atomic(root / name / "labels.json", labels_to_json(labels).dump());
}

template <typename S = double>
Matrix<S> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix<S> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(n(rng));
  return m;
}

/// Random graph with every possible edge present with probability p.
inline Topology random_topology(std::size_t n, int node_types, int edge_types, double p, std::mt19937_64& rng) {
  std::vector<int> types(n);
  std::uniform_int_distribution<int> pick_type(0, node_types - 1), pick_rel(0, edge_types - 1);
  for (auto& t : types) t = pick_type(rng);
  std::bernoulli_distribution keep(p);
  std::vector<Topology::Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (keep(rng)) edges.push_back({u, v, pick_rel(rng)});
  return Topology::build(n, types, node_types, edge_types, edges);
}

/// Random pool and charge list with random unit-ish embeddings.
struct RandomGraphWorld {
  std::vector<CaseDocument> pool;
  std::vector<ChargeEntry> charges;
  EmbeddingStore case_emb{6}, charge_emb{6};

  RandomGraphWorld(std::size_t n_cases, std::size_t n_charges, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> word(0, 25);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t j = 0; j < n_charges; ++j) charges.push_back({"charge" + std::to_string(j), "desc"});
    std::bernoulli_distribution mention(0.2);
    for (std::size_t i = 0; i < n_cases; ++i) {
      std::string text;
      for (int w = 0; w < 15; ++w) text += "w" + std::to_string(word(rng)) + " ";
      for (const auto& c : charges)
        if (mention(rng)) text += c.name + " ";
      pool.push_back(doc("case" + std::to_string(i), text));
    }
    auto vec = [&] {
      std::vector<double> v(6);
      for (auto& x : v) x = g(rng);
      v[0] += 2.0;  // bias toward a shared direction so some charge pairs exceed delta
      return v;
    };
    for (const auto& d : pool) case_emb.insert(d.id, vec());
    for (const auto& c : charges) charge_emb.insert(charge_node_id(c.name), vec());
  }

  CaseLinkGraph build(int k, double delta, GraphMode mode = GraphMode::heterogeneous) const {
    GraphBuildOptions o;
    o.k = k;
    o.delta = delta;
    o.mode = mode;
    return build_graph(pool, charges, case_emb, charge_emb, o);
  }
};

inline std::set<std::pair<std::size_t, std::size_t>> edge_set(const CaseLinkGraph& g, std::optional<EdgeType> type = {}) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : g.edges())
    if (!type || e.type == *type) out.emplace(e.u, e.v);
  return out;
}

inline bool subset(const std::set<std::pair<std::size_t, std::size_t>>& a, const std::set<std::pair<std::size_t, std::size_t>>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace caselink::testing
