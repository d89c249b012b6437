// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Okapi BM25 over the shared tokenizer. Used for case-case edges, candidate
// pre-ranking and hard-negative mining.
//
//   score(q, d) = sum over query tokens t (with repetition) of
//                 idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
//   idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//
// The idf form is strictly positive, so a score is zero exactly when the
// query and the document share no term.

#pragma once

#include <cmath>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/retrieval_run.hpp"

namespace caselink {

class Bm25Index {
 public:
  static constexpr double kDefaultK1 = 1.5;
  static constexpr double kDefaultB = 0.75;

  static Bm25Index build(const std::vector<CaseDocument>& docs, double k1 = kDefaultK1, double b = kDefaultB) {
    if (docs.empty()) throw ValidationError("cannot build a BM25 index over an empty corpus");
    if (!(k1 >= 0.0) || !(b >= 0.0 && b <= 1.0)) throw ConfigError("BM25 requires k1 >= 0 and 0 <= b <= 1");
    Bm25Index index;
    index.k1_ = k1;
    index.b_ = b;
    std::size_t total_length = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& doc = docs[d];
      if (!index.position_.emplace(doc.id, d).second)
        throw ValidationError("duplicate document id in BM25 index: " + doc.id);
      index.ids_.push_back(doc.id);
      std::unordered_map<std::string, int> tf;
      const auto tokens = tokenize(doc.text);
      for (const auto& t : tokens) ++tf[t];
      index.lengths_.push_back(tokens.size());
      total_length += tokens.size();
      for (const auto& [term, count] : tf) index.postings_[term].emplace_back(d, count);
    }
    index.avgdl_ = static_cast<double>(total_length) / static_cast<double>(docs.size());
    if (index.avgdl_ <= 0.0) index.avgdl_ = 1.0;  // all-empty corpus; every score is 0 anyway
    return index;
  }

  std::size_t size() const noexcept { return ids_.size(); }
  double avgdl() const noexcept { return avgdl_; }
  double k1() const noexcept { return k1_; }
  double b() const noexcept { return b_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::size_t document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
  }

  std::size_t length(std::string_view id) const { return lengths_[position(id)]; }

  bool contains(std::string_view id) const { return position_.count(std::string(id)) != 0; }

  std::size_t position(std::string_view id) const {
    auto it = position_.find(std::string(id));
    if (it == position_.end()) throw LookupError("document not in BM25 index: " + std::string(id));
    return it->second;
  }

  double idf(const std::string& term) const {
    const double n = static_cast<double>(size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  double score(std::string_view query_text, std::string_view doc_id) const {
    const std::size_t d = position(doc_id);
    return score_all(query_text)[d];
  }

  /// Scores of `query_text` against every indexed document, in index order.
  std::vector<double> score_all(std::string_view query_text) const {
    std::unordered_map<std::string, int> query_tf;
    for (const auto& t : tokenize(query_text)) ++query_tf[t];
    std::vector<double> scores(size(), 0.0);
    for (const auto& [term, qtf] : query_tf) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double w = idf(term) * qtf;
      for (const auto& [d, tf] : it->second) {
        const double norm = k1_ * (1.0 - b_ + b_ * static_cast<double>(lengths_[d]) / avgdl_);
        scores[d] += w * tf * (k1_ + 1.0) / (tf + norm);
      }
    }
    return scores;
  }

 private:
  Bm25Index() = default;

  double k1_ = kDefaultK1;
  double b_ = kDefaultB;
  double avgdl_ = 0.0;
  std::vector<std::string> ids_;
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, std::size_t> position_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
};

using IdPair = std::pair<std::string, std::string>;

inline IdPair make_undirected(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

/// Per-case top-k: each pool case contributes pairs with its k highest-scoring
/// other pool cases (ties by ascending id). Pairs are unordered, self-free and
/// deduplicated.
inline std::set<IdPair> top_k_pairs(const Bm25Index& index, const std::vector<CaseDocument>& pool, int k) {
  if (k < 1) throw ConfigError("top_k_pairs requires k >= 1");
  std::set<IdPair> pairs;
  if (pool.size() < 2) return pairs;
  std::vector<std::size_t> positions;
  for (const auto& d : pool) positions.push_back(index.position(d.id));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto scores = index.score_all(pool[i].text);
    std::vector<ScoredId> others;
    for (std::size_t j = 0; j < pool.size(); ++j)
      if (j != i && pool[j].id != pool[i].id) others.push_back({pool[j].id, scores[positions[j]]});
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), others.size());
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(keep), others.end(), ranks_before);
    for (std::size_t r = 0; r < keep; ++r) pairs.insert(make_undirected(pool[i].id, others[r].id));
  }
  return pairs;
}

/// Every indexed document except the query itself, best first, truncated to n.
inline std::vector<ScoredId> rank_candidates(const Bm25Index& index, const CaseDocument& query, int n) {
  if (n < 1) throw ConfigError("rank_candidates requires n >= 1");
  const auto scores = index.score_all(query.text);
  std::vector<ScoredId> ranking;
  ranking.reserve(index.size());
  for (std::size_t d = 0; d < index.size(); ++d)
    if (index.ids()[d] != query.id) ranking.push_back({index.ids()[d], scores[d]});
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(n), ranking.size());
  std::partial_sort(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(keep), ranking.end(), ranks_before);
  ranking.resize(keep);
  return ranking;
}

/// The n_hard highest-BM25 indexed documents that are neither the query nor
/// relevant to it.
inline std::vector<std::string> mine_hard_negatives(const Bm25Index& index, const CaseDocument& query,
                                                    const RelevanceLabels& labels, int n_hard) {
  if (n_hard < 0) throw ConfigError("mine_hard_negatives requires n_hard >= 0");
  std::vector<std::string> out;
  if (n_hard == 0) return out;
  static const std::set<std::string> kNone;
  auto it = labels.find(query.id);
  const auto& relevant = it == labels.end() ? kNone : it->second;
  for (const auto& s : rank_candidates(index, query, static_cast<int>(std::max<std::size_t>(index.size(), 1)))) {
    if (relevant.count(s.id)) continue;
    out.push_back(s.id);
    if (static_cast<int>(out.size()) == n_hard) break;
  }
  if (static_cast<int>(out.size()) < n_hard)
    warn("query " + query.id + ": only " + std::to_string(out.size()) + " non-relevant candidates available for " +
         std::to_string(n_hard) + " hard negatives");
  return out;
}

/// BM25 ranking of the whole index for each query (the lexical baseline run).
inline RetrievalRun bm25_run(const Bm25Index& index, const std::vector<CaseDocument>& queries) {
  RetrievalRun run;
  for (const auto& q : queries)
    run.rankings[q.id] = rank_candidates(index, q, static_cast<int>(std::max<std::size_t>(index.size(), 1)));
  return run;
}

}  // namespace caselink
