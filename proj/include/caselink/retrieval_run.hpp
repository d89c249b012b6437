// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "caselink/common.hpp"
#include "json.hpp"

namespace caselink {

struct ScoredId {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// Descending score, ascending id on ties.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

inline void sort_ranking(std::vector<ScoredId>& ranking) { std::sort(ranking.begin(), ranking.end(), ranks_before); }

/// Per-query ranked candidate lists.
struct RetrievalRun {
  std::map<std::string, std::vector<ScoredId>> rankings;

  std::vector<std::string> query_ids() const {
    std::vector<std::string> ids;
    for (const auto& [q, _] : rankings) ids.push_back(q);
    return ids;
  }

  /// Throws ValidationError on duplicate candidates or increasing scores.
  void validate() const {
    for (const auto& [q, list] : rankings) {
      std::unordered_set<std::string> seen;
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (!seen.insert(list[i].id).second)
          throw ValidationError("ranking for " + q + " lists " + list[i].id + " twice");
        if (i > 0 && list[i].score > list[i - 1].score)
          throw ValidationError("ranking for " + q + " has increasing scores at position " + std::to_string(i));
      }
    }
  }

  friend bool operator==(const RetrievalRun&, const RetrievalRun&) = default;
};

/// JSON Lines, one query per line, in query-id order:
/// {"query": id, "ranking": [id, ...], "scores": [real, ...]}
inline std::string to_jsonl(const RetrievalRun& run) {
  std::string out;
  for (const auto& [q, list] : run.rankings) {
    nlohmann::json ids = nlohmann::json::array();
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : list) {
      ids.push_back(s.id);
      scores.push_back(s.score);
    }
    out += nlohmann::json{{"query", q}, {"ranking", ids}, {"scores", scores}}.dump() + "\n";
  }
  return out;
}

inline RetrievalRun run_from_jsonl(std::string_view content) {
  RetrievalRun run;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto& ids = j.at("ranking");
    const auto& scores = j.at("scores");
    if (ids.size() != scores.size())
      throw ValidationError("run line " + std::to_string(line_no) + ": ranking and scores differ in length");
    auto& list = run.rankings[j.at("query").get<std::string>()];
    for (std::size_t i = 0; i < ids.size(); ++i) list.push_back({ids[i].get<std::string>(), scores[i].get<double>()});
  }
  run.validate();
  return run;
}

}  // namespace caselink
