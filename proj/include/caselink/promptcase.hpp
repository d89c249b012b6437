// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Three-view case representation: an LLM fact summary, the sentences that
// carry dataset placeholders (the issue view), and the full text. The three
// view embeddings are concatenated in that order.

#pragma once

#include <regex>
#include <string>
#include <vector>

#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/llm.hpp"
#include "json.hpp"

namespace caselink {

/// Stands in for an empty view so every block of the concatenated vector has
/// a comparable norm.
inline constexpr std::string_view kEmptyViewMarker = "EMPTY_VIEW";

struct CaseViews {
  std::string case_id;
  std::string fact_text;
  std::string issue_text;
  std::string full_text;

  friend bool operator==(const CaseViews&, const CaseViews&) = default;

  nlohmann::json to_json() const {
    return {{"case_id", case_id}, {"fact", fact_text}, {"issue", issue_text}, {"full", full_text}};
  }
  static CaseViews from_json(const nlohmann::json& j) {
    return {j.at("case_id").get<std::string>(), j.at("fact").get<std::string>(), j.at("issue").get<std::string>(),
            j.at("full").get<std::string>()};
  }
};

struct ViewOptions {
  std::vector<std::string> placeholders = default_placeholders();
  int word_limit = 50;
  /// When non-empty and matching, capture group 1 is fed to the summarizer
  /// instead of the whole case.
  std::string fact_section_regex;
  /// Whitespace-word budget for the full-text view at encoding time; 0 keeps everything.
  int full_text_token_budget = 512;
};

/// Splits after '.', '?' or '!' when followed by whitespace or the end of
/// the text. Sentences are trimmed; empty ones are dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto s = normalize_whitespace(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '?' || c == '!') && (i + 1 == text.size() || is_space(text[i + 1]))) flush(i + 1);
  }
  flush(text.size());
  return out;
}

/// Sentences containing any placeholder, in document order, joined by single spaces.
inline std::string extract_issues(std::string_view text, const std::vector<std::string>& placeholders) {
  if (placeholders.empty()) throw ConfigError("extract_issues needs at least one placeholder");
  std::vector<std::string> picked;
  for (auto& sentence : split_sentences(text)) {
    for (const auto& p : placeholders)
      if (!p.empty() && sentence.find(p) != std::string::npos) {
        picked.push_back(std::move(sentence));
        break;
      }
  }
  return join(picked, " ");
}

inline std::string fact_section(std::string_view text, const std::string& section_regex) {
  const std::string normalized = normalize_whitespace(text);
  if (section_regex.empty()) return normalized;
  const std::regex re(section_regex, std::regex::ECMAScript);
  std::smatch m;
  const std::string raw(text);
  if (std::regex_search(raw, m, re) && m.size() > 1 && m[1].matched) {
    auto section = normalize_whitespace(m[1].str());
    if (!section.empty()) return section;
  }
  return normalized;
}

inline CaseViews build_views(const CaseDocument& doc, LlmClient& llm, const ViewOptions& options = {}) {
  const std::string full = normalize_whitespace(doc.text);
  if (full.empty()) throw ValidationError("case " + doc.id + " has empty text");
  CaseViews views;
  views.case_id = doc.id;
  views.fact_text = llm.summarize(fact_section(doc.text, options.fact_section_regex), options.word_limit);
  views.issue_text = extract_issues(full, options.placeholders);
  views.full_text = full;
  return views;
}

enum class ViewKind { fact = 0, issue = 1, full = 2 };

inline std::string view_text_id(const std::string& case_id, ViewKind kind) {
  static constexpr const char* kSuffix[] = {"#fact", "#issue", "#full"};
  return case_id + kSuffix[static_cast<int>(kind)];
}

inline std::string view_text_for_encoding(const CaseViews& views, ViewKind kind, int full_text_token_budget) {
  switch (kind) {
    case ViewKind::fact: return views.fact_text.empty() ? std::string(kEmptyViewMarker) : views.fact_text;
    case ViewKind::issue: return views.issue_text.empty() ? std::string(kEmptyViewMarker) : views.issue_text;
    case ViewKind::full:
      return full_text_token_budget > 0 ? first_words(views.full_text, full_text_token_budget) : views.full_text;
  }
  return views.full_text;
}

/// [emb(fact) | emb(issue) | emb(full)], length 3 * encoder.dim().
inline std::vector<double> encode_views(const CaseViews& views, const TextEncoder& encoder, int full_text_token_budget = 512) {
  const std::size_t dim = encoder.dim();
  std::vector<double> out;
  out.reserve(3 * dim);
  for (auto kind : {ViewKind::fact, ViewKind::issue, ViewKind::full}) {
    const auto v = encoder.encode(view_text_id(views.case_id, kind), view_text_for_encoding(views, kind, full_text_token_budget));
    if (v.size() != dim)
      throw ShapeError("encoder returned dim " + std::to_string(v.size()) + " for " + views.case_id + ", expected " +
                       std::to_string(dim));
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

/// The block of a concatenated view vector belonging to `kind`.
inline std::vector<double> view_slice(const std::vector<double>& concatenated, ViewKind kind) {
  if (concatenated.size() % 3 != 0) throw ShapeError("view vector length is not a multiple of 3");
  const std::size_t dim = concatenated.size() / 3;
  const auto begin = concatenated.begin() + static_cast<std::ptrdiff_t>(dim * static_cast<std::size_t>(kind));
  return {begin, begin + static_cast<std::ptrdiff_t>(dim)};
}

/// File name for a per-case views document; ids that are not filesystem-safe
/// get a hash suffix to stay unique.
inline std::string views_file_name(const std::string& id) {
  std::string safe = id;
  bool changed = false;
  for (char& c : safe)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      c = '_';
      changed = true;
    }
  if (changed) safe += "-" + sha256_hex(id).substr(0, 8);
  return safe + ".json";
}

}  // namespace caselink
