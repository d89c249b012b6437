// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Retrieval metrics and significance testing.
//
// For a query with relevant set R and ranking r_1, r_2, ...:
//   P@k    = |R ∩ top-k| / k
//   R@k    = |R ∩ top-k| / |R|
//   MRR@k  = 1 / rank of the first relevant document within top-k, else 0
//   AP     = (1/|R|) * sum over relevant positions i of precision@i (full ranking)
//   NDCG@k = DCG@k / IDCG@k, binary gains, discount 1/log2(i + 1),
//            IDCG from min(|R|, k) relevant documents
// Averages are over queries. Mi-F1 pools hits, retrieved and relevant counts
// over all queries; Ma-F1 is the harmonic mean of the averaged P@k and R@k.

#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/retrieval_run.hpp"
#include "json.hpp"

namespace caselink {

struct QueryMetrics {
  std::string query;
  std::size_t relevant = 0;
  std::size_t retrieved = 0;  // min(k, ranking length)
  std::size_t hits = 0;       // relevant within top-k
  double precision = 0, recall = 0, reciprocal_rank = 0, average_precision = 0, ndcg = 0;
};

struct MetricReport {
  int k = 5;
  bool map_at_k = false;
  std::size_t num_queries = 0;
  double precision = 0, recall = 0, micro_f1 = 0, macro_f1 = 0, mrr = 0, map = 0, ndcg = 0;
  std::vector<QueryMetrics> per_query;

  /// Column order of the results tables: P@k, R@k, Mi-F1, Ma-F1, MRR@k, MAP, NDCG@k.
  std::vector<std::string> metric_names() const {
    const std::string ks = std::to_string(k);
    return {"P@" + ks, "R@" + ks, "Mi-F1", "Ma-F1", "MRR@" + ks, map_at_k ? "MAP@" + ks : "MAP", "NDCG@" + ks};
  }
  std::vector<double> metric_values() const { return {precision, recall, micro_f1, macro_f1, mrr, map, ndcg}; }

  double get(std::string_view name) const {
    const auto names = metric_names();
    const auto values = metric_values();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw LookupError("metric " + std::string(name) + " not in report at k=" + std::to_string(k));
  }

  nlohmann::json to_json(bool include_per_query = true) const {
    nlohmann::json metrics = nlohmann::json::object();
    const auto names = metric_names();
    const auto values = metric_values();
    for (std::size_t i = 0; i < names.size(); ++i) metrics[names[i]] = values[i];
    nlohmann::json j = {{"k", k}, {"num_queries", num_queries}, {"metrics", metrics}};
    if (include_per_query) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& q : per_query)
        rows.push_back({{"query", q.query},
                        {"relevant", q.relevant},
                        {"retrieved", q.retrieved},
                        {"hits", q.hits},
                        {"precision", q.precision},
                        {"recall", q.recall},
                        {"reciprocal_rank", q.reciprocal_rank},
                        {"average_precision", q.average_precision},
                        {"ndcg", q.ndcg}});
      j["per_query"] = rows;
    }
    return j;
  }

  /// Plain-text table, values in percent.
  std::string table(std::string_view label = "run") const {
    std::ostringstream os;
    const auto names = metric_names();
    const auto values = metric_values();
    os << std::left << std::setw(16) << "System";
    for (const auto& n : names) os << std::right << std::setw(9) << n;
    os << '\n' << std::left << std::setw(16) << label;
    os << std::fixed << std::setprecision(1);
    for (double v : values) os << std::right << std::setw(9) << 100.0 * v;
    os << '\n';
    return os.str();
  }
};

inline MetricReport evaluate(const RetrievalRun& run, const RelevanceLabels& labels, int k, bool map_at_k = false) {
  if (k < 1) throw ConfigError("metric cutoff k must be >= 1");
  MetricReport report;
  report.k = k;
  report.map_at_k = map_at_k;
  std::size_t pooled_hits = 0, pooled_retrieved = 0, pooled_relevant = 0;
  for (const auto& [query, ranking] : run.rankings) {
    auto it = labels.find(query);
    if (it == labels.end()) throw ValidationError("query " + query + " has no relevance labels");
    const auto& relevant = it->second;
    QueryMetrics m;
    m.query = query;
    m.relevant = relevant.size();
    m.retrieved = std::min<std::size_t>(static_cast<std::size_t>(k), ranking.size());
    double dcg = 0.0;
    std::size_t seen_relevant = 0;
    double precision_sum = 0.0;
    const std::size_t ap_depth = map_at_k ? m.retrieved : ranking.size();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      if (!relevant.count(ranking[i].id)) continue;
      ++seen_relevant;
      if (i < ap_depth) precision_sum += static_cast<double>(seen_relevant) / static_cast<double>(i + 1);
      if (i < m.retrieved) {
        ++m.hits;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        if (m.reciprocal_rank == 0.0) m.reciprocal_rank = 1.0 / static_cast<double>(i + 1);
      }
    }
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(relevant.size(), static_cast<std::size_t>(k)); ++i)
      idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    m.precision = static_cast<double>(m.hits) / static_cast<double>(k);
    m.recall = relevant.empty() ? 0.0 : static_cast<double>(m.hits) / static_cast<double>(relevant.size());
    m.average_precision = relevant.empty() ? 0.0 : precision_sum / static_cast<double>(relevant.size());
    m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;

    report.precision += m.precision;
    report.recall += m.recall;
    report.mrr += m.reciprocal_rank;
    report.map += m.average_precision;
    report.ndcg += m.ndcg;
    pooled_hits += m.hits;
    pooled_retrieved += m.retrieved;
    pooled_relevant += m.relevant;
    report.per_query.push_back(std::move(m));
  }
  report.num_queries = report.per_query.size();
  if (report.num_queries == 0) return report;
  const double n = static_cast<double>(report.num_queries);
  report.precision /= n;
  report.recall /= n;
  report.mrr /= n;
  report.map /= n;
  report.ndcg /= n;
  auto harmonic = [](double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; };
  const double micro_p = pooled_retrieved ? static_cast<double>(pooled_hits) / static_cast<double>(pooled_retrieved) : 0.0;
  const double micro_r = pooled_relevant ? static_cast<double>(pooled_hits) / static_cast<double>(pooled_relevant) : 0.0;
  report.micro_f1 = harmonic(micro_p, micro_r);
  report.macro_f1 = harmonic(report.precision, report.recall);
  return report;
}

/// Parses names like "NDCG@5", "P@10", "MAP", "Mi-F1@5" into (name, k).
inline std::pair<std::string, int> parse_metric(std::string_view metric, int default_k = 5) {
  const auto at = metric.find('@');
  if (at == std::string_view::npos) return {std::string(metric), default_k};
  int k = 0;
  try {
    k = std::stoi(std::string(metric.substr(at + 1)));
  } catch (const std::exception&) {
    throw ConfigError("malformed metric name: " + std::string(metric));
  }
  if (k < 1) throw ConfigError("metric cutoff must be >= 1: " + std::string(metric));
  return {std::string(metric.substr(0, at)), k};
}

inline double metric_value(const RetrievalRun& run, const RelevanceLabels& labels, std::string_view metric) {
  const auto [name, k] = parse_metric(metric);
  const auto report = evaluate(run, labels, k);
  const std::string ks = std::to_string(k);
  if (name == "P") return report.precision;
  if (name == "R") return report.recall;
  if (name == "Mi-F1") return report.micro_f1;
  if (name == "Ma-F1") return report.macro_f1;
  if (name == "MRR") return report.mrr;
  if (name == "MAP") return report.map;
  if (name == "NDCG") return report.ndcg;
  throw ConfigError("unknown metric: " + std::string(metric));
}

/// Monte-Carlo expectation of every metric under uniformly random rankings
/// of a pool of `pool_size` candidates containing each query's relevant set.
inline MetricReport random_baseline(const RelevanceLabels& labels, std::size_t pool_size, int k, int trials,
                                    std::uint64_t seed) {
  if (trials < 1) throw ConfigError("random_baseline needs trials >= 1");
  std::mt19937_64 rng(seed);
  MetricReport mean;
  mean.k = k;
  for (int t = 0; t < trials; ++t) {
    RetrievalRun run;
    RelevanceLabels trial_labels;
    for (const auto& [q, rel] : labels) {
      const std::size_t r = std::min(rel.size(), pool_size);
      std::vector<ScoredId> ranking;
      auto& tl = trial_labels[q];
      for (std::size_t i = 0; i < pool_size; ++i) {
        std::string id = (i < r ? "rel_" : "non_") + std::to_string(i);
        if (i < r) tl.insert(id);
        ranking.push_back({std::move(id), 0.0});
      }
      std::shuffle(ranking.begin(), ranking.end(), rng);
      run.rankings[q] = std::move(ranking);
    }
    const auto rep = evaluate(run, trial_labels, k);
    mean.num_queries = rep.num_queries;
    mean.precision += rep.precision;
    mean.recall += rep.recall;
    mean.micro_f1 += rep.micro_f1;
    mean.macro_f1 += rep.macro_f1;
    mean.mrr += rep.mrr;
    mean.map += rep.map;
    mean.ndcg += rep.ndcg;
  }
  for (double* v : {&mean.precision, &mean.recall, &mean.micro_f1, &mean.macro_f1, &mean.mrr, &mean.map, &mean.ndcg})
    *v /= trials;
  return mean;
}

// ---------------------------------------------------------------------------
// Paired t-test over query subsets.

struct PairedTTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
  bool degenerate = false;
};

/// Two-sided paired t-test. Zero variance of the differences yields p = 1
/// with the degenerate flag set.
inline PairedTTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("paired t-test needs samples of equal size");
  if (a.size() < 2) throw ValidationError("paired t-test needs at least two pairs");
  PairedTTest r;
  r.n = a.size();
  r.df = static_cast<double>(r.n - 1);
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) d[i] = a[i] - b[i];
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(r.n);
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
  r.sd_diff = std::sqrt(ss / r.df);
  if (r.sd_diff <= 1e-12 * std::max(1.0, std::abs(r.mean_diff))) {
    r.degenerate = true;
    r.t = 0.0;
    r.p_value = 1.0;
    return r;
  }
  r.t = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(r.n)));
  const boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(dist, -std::abs(r.t)));
  return r;
}

struct TestReport {
  std::string metric;
  std::size_t n_subsets = 0;
  std::vector<std::size_t> subset_sizes;
  std::vector<double> values_a, values_b;
  PairedTTest test;
  double alpha = 0.05;
  int comparisons = 1;
  bool significant = false;

  double threshold() const { return alpha / comparisons; }

  nlohmann::json to_json() const {
    return {{"metric", metric},
            {"n_subsets", n_subsets},
            {"subset_sizes", subset_sizes},
            {"values_a", values_a},
            {"values_b", values_b},
            {"mean_diff", test.mean_diff},
            {"t", test.t},
            {"df", test.df},
            {"p_value", test.p_value},
            {"alpha", alpha},
            {"comparisons", comparisons},
            {"threshold", threshold()},
            {"degenerate_variance", test.degenerate},
            {"significant", significant}};
  }
};

/// Sorted-id contiguous blocks with sizes differing by at most one.
inline std::vector<std::vector<std::string>> partition_queries(std::vector<std::string> ids, std::size_t n_subsets) {
  if (n_subsets < 1) throw ConfigError("n_subsets must be >= 1");
  if (ids.size() < n_subsets)
    throw ValidationError("cannot split " + std::to_string(ids.size()) + " queries into " + std::to_string(n_subsets) + " subsets");
  std::sort(ids.begin(), ids.end());
  std::vector<std::vector<std::string>> blocks(n_subsets);
  const std::size_t base = ids.size() / n_subsets, extra = ids.size() % n_subsets;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_subsets; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    blocks[b].assign(ids.begin() + static_cast<std::ptrdiff_t>(pos), ids.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return blocks;
}

inline TestReport subset_ttest(const RetrievalRun& run_a, const RetrievalRun& run_b, const RelevanceLabels& labels,
                               const std::string& metric = "NDCG@5", std::size_t n_subsets = 5, double alpha = 0.05,
                               int comparisons = 1) {
  if (comparisons < 1) throw ConfigError("Bonferroni divisor must be >= 1");
  const auto ids_a = run_a.query_ids();
  if (ids_a != run_b.query_ids()) throw ValidationError("runs cover different query sets");
  TestReport report;
  report.metric = metric;
  report.n_subsets = n_subsets;
  report.alpha = alpha;
  report.comparisons = comparisons;
  for (const auto& block : partition_queries(ids_a, n_subsets)) {
    RetrievalRun sub_a, sub_b;
    for (const auto& q : block) {
      sub_a.rankings[q] = run_a.rankings.at(q);
      sub_b.rankings[q] = run_b.rankings.at(q);
    }
    report.subset_sizes.push_back(block.size());
    report.values_a.push_back(metric_value(sub_a, labels, metric));
    report.values_b.push_back(metric_value(sub_b, labels, metric));
  }
  report.test = paired_ttest(report.values_a, report.values_b);
  report.significant = !report.test.degenerate && report.test.p_value < report.threshold();
  return report;
}

}  // namespace caselink
