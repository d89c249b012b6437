// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deliberately naive re-derivation of the ranking metrics from 0/1 gain
// vectors. Shares no code with evalkit so the two can check each other.

#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "caselink/caselink.hpp"

namespace caselink::testing {

/// Values in table order: P@k, R@k, Mi-F1, Ma-F1, MRR@k, MAP, NDCG@k.
inline std::array<double, 7> oracle_metrics(const RetrievalRun& run, const RelevanceLabels& labels, int k) {
  double p_sum = 0, r_sum = 0, rr_sum = 0, ap_sum = 0, ndcg_sum = 0;
  double hits_all = 0, retrieved_all = 0, relevant_all = 0;
  double nq = 0;
  for (const auto& [q, ranking] : run.rankings) {
    const auto& rel = labels.at(q);
    std::vector<int> gain;
    for (const auto& s : ranking) gain.push_back(rel.count(s.id) ? 1 : 0);
    const std::size_t depth = std::min<std::size_t>(k, gain.size());
    double hits = 0;
    for (std::size_t i = 0; i < depth; ++i) hits += gain[i];
    double rr = 0;
    for (std::size_t i = 0; i < depth; ++i)
      if (gain[i]) {
        rr = 1.0 / (i + 1.0);
        break;
      }
    double ap = 0;
    for (std::size_t i = 0; i < gain.size(); ++i) {
      if (!gain[i]) continue;
      double above = 0;
      for (std::size_t j = 0; j <= i; ++j) above += gain[j];
      ap += above / (i + 1.0);
    }
    ap = rel.empty() ? 0 : ap / rel.size();
    double dcg = 0, ideal = 0;
    for (std::size_t i = 0; i < depth; ++i) dcg += gain[i] / std::log2(i + 2.0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k) && i < rel.size(); ++i) ideal += 1.0 / std::log2(i + 2.0);
    p_sum += hits / k;
    r_sum += rel.empty() ? 0 : hits / rel.size();
    rr_sum += rr;
    ap_sum += ap;
    ndcg_sum += ideal > 0 ? dcg / ideal : 0;
    hits_all += hits;
    retrieved_all += depth;
    relevant_all += rel.size();
    nq += 1;
  }
  if (nq == 0) return {};
  auto f1 = [](double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); };
  const double P = p_sum / nq, R = r_sum / nq;
  const double mp = retrieved_all ? hits_all / retrieved_all : 0, mr = relevant_all ? hits_all / relevant_all : 0;
  return {P, R, f1(mp, mr), f1(P, R), rr_sum / nq, ap_sum / nq, ndcg_sum / nq};
}

struct RandomInstance {
  RetrievalRun run;
  RelevanceLabels labels;
  int k = 5;
};

/// Random queries over a random pool; some queries have short rankings,
/// some have relevant ids that are never retrieved.
inline RandomInstance random_instance(std::mt19937_64& rng) {
  RandomInstance inst;
  std::uniform_int_distribution<int> nq(1, 8), pool(1, 30), kd(1, 10);
  inst.k = kd(rng);
  const int n = pool(rng);
  for (int q = 0, m = nq(rng); q < m; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    std::shuffle(ids.begin(), ids.end(), rng);
    const int len = std::uniform_int_distribution<int>(0, n)(rng);
    auto& ranking = inst.run.rankings[qid];
    for (int i = 0; i < len; ++i) ranking.push_back({"d" + std::to_string(ids[i]), static_cast<double>(n - i)});
    auto& rel = inst.labels[qid];
    std::bernoulli_distribution pick(std::uniform_real_distribution<double>(0.05, 0.5)(rng));
    for (int i = 0; i < n; ++i)
      if (pick(rng)) rel.insert("d" + std::to_string(i));
    if (rel.empty()) rel.insert("d" + std::to_string(ids[0]));
  }
  return inst;
}

/// Max |evalkit - oracle| over all seven metrics.
inline double max_metric_gap(const RandomInstance& inst) {
  const auto ref = oracle_metrics(inst.run, inst.labels, inst.k);
  const auto got = evaluate(inst.run, inst.labels, inst.k).metric_values();
  double gap = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) gap = std::max(gap, std::abs(ref[i] - got[i]));
  return gap;
}

/// Fixture A: one query, relevant at ranks 1 and 3 of five.
inline RandomInstance fixture_ranked() {
  RandomInstance f;
  f.run.rankings["q"] = {{"a", 5}, {"x", 4}, {"b", 3}, {"y", 2}, {"z", 1}};
  f.labels["q"] = {"a", "b"};
  return f;
}

/// Fixture B: q1 has 3 relevant with 2 in the top 5; q2 has 1 of 1.
inline RandomInstance fixture_pooled() {
  RandomInstance f;
  f.run.rankings["q1"] = {{"r1", 5}, {"n1", 4}, {"r2", 3}, {"n2", 2}, {"n3", 1}};
  f.run.rankings["q2"] = {{"n4", 5}, {"s1", 4}, {"n5", 3}, {"n6", 2}, {"n7", 1}};
  f.labels["q1"] = {"r1", "r2", "r3"};
  f.labels["q2"] = {"s1"};
  return f;
}

}  // namespace caselink::testing
