// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Case/charge data model, the on-disk dataset layout, year filtering,
// statistics and the planted-cluster synthetic corpus generator.
//
// Layout read by load_dataset and written by generate_synthetic:
//
//   <root>/charges.tsv                      name<TAB>description per line
//   <root>/<split>/candidates/<id>.txt
//   <root>/<split>/queries/<id>.txt
//   <root>/<split>/labels.json              {"query_id": ["candidate_id", ...]}
//   <root>/<split>/metadata.json            optional: {"id": {"year": 2019}}

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "caselink/common.hpp"
#include "json.hpp"

namespace caselink {

using json = nlohmann::json;

enum class CaseRole { query, candidate, both };

inline std::string to_string(CaseRole role) {
  switch (role) {
    case CaseRole::query: return "query";
    case CaseRole::candidate: return "candidate";
    case CaseRole::both: return "both";
  }
  return "?";
}

struct CaseDocument {
  std::string id;
  std::string text;
  std::optional<int> year;
  CaseRole role = CaseRole::candidate;
};

struct ChargeEntry {
  std::string name;
  std::string description;
};

/// Which text represents a charge node.
enum class ChargeTextMode { name, description, name_and_description };

inline std::string charge_text(const ChargeEntry& charge, ChargeTextMode mode) {
  switch (mode) {
    case ChargeTextMode::name: return charge.name;
    case ChargeTextMode::description: return charge.description.empty() ? charge.name : charge.description;
    case ChargeTextMode::name_and_description: return charge.name + " " + charge.description;
  }
  return charge.name;
}

inline ChargeTextMode parse_charge_text_mode(std::string_view s) {
  if (s == "name") return ChargeTextMode::name;
  if (s == "description") return ChargeTextMode::description;
  if (s == "name+description" || s == "name_and_description") return ChargeTextMode::name_and_description;
  throw ConfigError("unknown charge text mode: " + std::string(s));
}

/// query id -> relevant candidate ids. Ordered containers keep every
/// downstream iteration deterministic.
using RelevanceLabels = std::map<std::string, std::set<std::string>>;

struct DatasetSplit {
  std::string name;
  std::vector<CaseDocument> queries;
  std::vector<CaseDocument> candidates;
  RelevanceLabels labels;

  /// Queries followed by candidates, each id once (role `both` cases appear
  /// in the query position).
  std::vector<CaseDocument> pool() const {
    std::vector<CaseDocument> out;
    std::unordered_set<std::string> seen;
    for (const auto* list : {&queries, &candidates})
      for (const auto& d : *list)
        if (seen.insert(d.id).second) out.push_back(d);
    return out;
  }

  const CaseDocument* find(std::string_view id) const {
    for (const auto* list : {&queries, &candidates})
      for (const auto& d : *list)
        if (d.id == id) return &d;
    return nullptr;
  }

  std::vector<std::string> query_ids() const {
    std::vector<std::string> ids;
    for (const auto& q : queries) ids.push_back(q.id);
    return ids;
  }
  std::vector<std::string> candidate_ids() const {
    std::vector<std::string> ids;
    for (const auto& c : candidates) ids.push_back(c.id);
    return ids;
  }
};

/// Checks every DatasetSplit invariant; throws ValidationError listing all
/// offending ids.
inline void validate(const DatasetSplit& split) {
  std::vector<std::string> problems;
  auto check_pool = [&](const std::vector<CaseDocument>& docs, const char* what) {
    std::unordered_set<std::string> ids;
    for (const auto& d : docs) {
      if (d.id.empty()) problems.push_back(std::string("empty ") + what + " id");
      else if (!ids.insert(d.id).second) problems.push_back(std::string("duplicate ") + what + " id " + d.id);
      if (normalize_whitespace(d.text).empty())
        problems.push_back(std::string(what) + " " + d.id + " has empty text");
    }
    return ids;
  };
  const auto query_ids = check_pool(split.queries, "query");
  const auto candidate_ids = check_pool(split.candidates, "candidate");

  std::vector<std::string> unknown;
  for (const auto& [q, rel] : split.labels) {
    if (!query_ids.count(q)) unknown.push_back(q);
    for (const auto& c : rel) {
      if (!candidate_ids.count(c)) unknown.push_back(c);
      if (c == q) problems.push_back("query " + q + " is labelled relevant to itself");
    }
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    problems.push_back("labels reference unknown ids: " + join(unknown, ", "));
  }
  if (!problems.empty())
    throw ValidationError("split '" + split.name + "' failed validation: " + join(problems, "; "));
}

/// Throws ValidationError when the two splits share a case id.
inline void check_disjoint(const DatasetSplit& a, const DatasetSplit& b) {
  std::unordered_set<std::string> ids;
  for (const auto& d : a.pool()) ids.insert(d.id);
  std::vector<std::string> shared;
  for (const auto& d : b.pool())
    if (ids.count(d.id)) shared.push_back(d.id);
  if (!shared.empty())
    throw ValidationError("splits '" + a.name + "' and '" + b.name + "' share ids: " + join(shared, ", "));
}

// ---------------------------------------------------------------------------
// Loading.

namespace detail {

inline std::vector<CaseDocument> load_case_dir(const fs::path& dir, CaseRole role) {
  if (!fs::is_directory(dir)) throw LoadError("missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<CaseDocument> docs;
  docs.reserve(files.size());
  for (const auto& f : files) docs.push_back({f.stem().string(), read_file(f), std::nullopt, role});
  return docs;
}

}  // namespace detail

inline RelevanceLabels labels_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("labels must be a JSON object of query id -> [candidate ids]");
  RelevanceLabels labels;
  for (const auto& [q, list] : j.items()) {
    if (!list.is_array()) throw ValidationError("labels for " + q + " must be an array");
    auto& rel = labels[q];
    for (const auto& c : list) rel.insert(c.get<std::string>());
  }
  return labels;
}

inline json labels_to_json(const RelevanceLabels& labels) {
  json j = json::object();
  for (const auto& [q, rel] : labels) j[q] = std::vector<std::string>(rel.begin(), rel.end());
  return j;
}

/// Reads `<root>/<split>/` and returns a validated split.
inline DatasetSplit load_dataset(const fs::path& root, const std::string& split_name) {
  const fs::path dir = root / split_name;
  if (!fs::is_directory(dir)) throw LoadError("dataset split directory not found: " + dir.string());

  DatasetSplit split;
  split.name = split_name;
  split.candidates = detail::load_case_dir(dir / "candidates", CaseRole::candidate);
  if (split.candidates.empty()) throw LoadError("empty candidate pool in " + (dir / "candidates").string());
  split.queries = detail::load_case_dir(dir / "queries", CaseRole::query);

  std::unordered_set<std::string> query_ids;
  for (const auto& q : split.queries) query_ids.insert(q.id);
  std::unordered_set<std::string> shared;
  for (auto& c : split.candidates)
    if (query_ids.count(c.id)) {
      c.role = CaseRole::both;
      shared.insert(c.id);
    }
  for (auto& q : split.queries)
    if (shared.count(q.id)) q.role = CaseRole::both;

  const fs::path labels_path = dir / "labels.json";
  if (!fs::exists(labels_path)) throw LoadError("missing labels file: " + labels_path.string());
  try {
    split.labels = labels_from_json(json::parse(read_file(labels_path)));
  } catch (const json::exception& e) {
    throw ValidationError("malformed labels.json: " + std::string(e.what()));
  }

  const fs::path meta_path = dir / "metadata.json";
  if (fs::exists(meta_path)) {
    const json meta = json::parse(read_file(meta_path));
    for (auto* list : {&split.queries, &split.candidates})
      for (auto& d : *list)
        if (auto it = meta.find(d.id); it != meta.end() && it->contains("year"))
          d.year = it->at("year").get<int>();
  }

  validate(split);
  return split;
}

inline std::vector<ChargeEntry> parse_charges(std::string_view content) {
  std::vector<ChargeEntry> charges;
  std::unordered_set<std::string> names;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (normalize_whitespace(line).empty()) {
      if (end == content.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ValidationError("charge list line " + std::to_string(line_no) + " has no TAB separator");
    ChargeEntry entry{normalize_whitespace(line.substr(0, tab)), std::string(line.substr(tab + 1))};
    if (entry.name.empty()) throw ValidationError("charge list line " + std::to_string(line_no) + " has an empty name");
    if (!names.insert(entry.name).second) throw ValidationError("duplicate charge name: " + entry.name);
    charges.push_back(std::move(entry));
    if (end == content.size()) break;
  }
  return charges;
}

inline std::vector<ChargeEntry> load_charges(const fs::path& path) { return parse_charges(read_file(path)); }

inline std::string format_charges(const std::vector<ChargeEntry>& charges) {
  std::string out;
  for (const auto& c : charges) out += c.name + "\t" + c.description + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Filtering and statistics.

/// Restricts the candidate pool to year <= max_year and prunes labels to
/// match. Candidates without a year are kept and reported.
inline DatasetSplit filter_by_year(const DatasetSplit& split, int max_year) {
  DatasetSplit out;
  out.name = split.name;
  out.queries = split.queries;
  std::unordered_set<std::string> kept;
  std::size_t missing = 0;
  for (const auto& c : split.candidates) {
    if (!c.year) ++missing;
    if (!c.year || *c.year <= max_year) {
      out.candidates.push_back(c);
      kept.insert(c.id);
    }
  }
  if (missing)
    warn(std::to_string(missing) + " candidate(s) in split '" + split.name +
         "' have no year metadata and were kept");
  if (out.candidates.empty())
    warn("year filter <= " + std::to_string(max_year) + " left split '" + split.name + "' with an empty candidate pool");
  for (const auto& [q, rel] : split.labels) {
    auto& pruned = out.labels[q];
    for (const auto& c : rel)
      if (kept.count(c)) pruned.insert(c);
  }
  return out;
}

struct StatisticsReport {
  std::string split;
  std::size_t num_queries = 0;
  std::size_t num_candidates = 0;
  std::size_t num_labelled_pairs = 0;
  double avg_relevant_per_query = 0.0;
  double avg_case_length = 0.0;  // over the unique pool
  std::size_t max_case_length = 0;
  double avg_query_length = 0.0;
  double avg_candidate_length = 0.0;
  std::size_t cases_without_year = 0;

  json to_json() const {
    return {{"split", split},
            {"num_queries", num_queries},
            {"num_candidates", num_candidates},
            {"num_labelled_pairs", num_labelled_pairs},
            {"avg_relevant_per_query", avg_relevant_per_query},
            {"avg_case_length_tokens", avg_case_length},
            {"max_case_length_tokens", max_case_length},
            {"avg_query_length_tokens", avg_query_length},
            {"avg_candidate_length_tokens", avg_candidate_length},
            {"cases_without_year", cases_without_year}};
  }
};

inline StatisticsReport dataset_statistics(const DatasetSplit& split) {
  StatisticsReport r;
  r.split = split.name;
  r.num_queries = split.queries.size();
  r.num_candidates = split.candidates.size();
  for (const auto& [q, rel] : split.labels) r.num_labelled_pairs += rel.size();
  if (!split.queries.empty()) {
    std::size_t total = 0;
    for (const auto& q : split.queries) {
      auto it = split.labels.find(q.id);
      if (it != split.labels.end()) total += it->second.size();
    }
    r.avg_relevant_per_query = static_cast<double>(total) / static_cast<double>(split.queries.size());
  }
  auto mean_len = [](const std::vector<CaseDocument>& docs) {
    if (docs.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& d : docs) total += tokenize(d.text).size();
    return static_cast<double>(total) / static_cast<double>(docs.size());
  };
  r.avg_query_length = mean_len(split.queries);
  r.avg_candidate_length = mean_len(split.candidates);
  const auto pool = split.pool();
  std::size_t total = 0;
  for (const auto& d : pool) {
    const std::size_t len = tokenize(d.text).size();
    total += len;
    r.max_case_length = std::max(r.max_case_length, len);
    if (!d.year) ++r.cases_without_year;
  }
  if (!pool.empty()) r.avg_case_length = static_cast<double>(total) / static_cast<double>(pool.size());
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic planted-cluster corpus.

struct SynthConfig {
  int clusters = 6;
  int candidates_per_cluster = 20;
  int queries_per_cluster = 5;
  int relevant_per_query = 5;
  int background_vocab = 300;
  int cluster_vocab = 40;
  int words_per_case = 150;
  int words_per_sentence = 12;
  double topic_fraction = 0.4;
  double verb_fraction = 0.12;
  double placeholder_rate = 0.25;  // per sentence
  double charge_injection_rate = 0.6;  // per case
  int charges_per_cluster = 2;
  int year_min = 2010;
  int year_max = 2023;
  std::vector<std::string> splits = {"train", "test"};

  void validate() const {
    std::vector<std::string> bad;
    if (clusters < 1) bad.push_back("clusters must be >= 1");
    if (candidates_per_cluster < 1) bad.push_back("candidates_per_cluster must be >= 1");
    if (queries_per_cluster < 0) bad.push_back("queries_per_cluster must be >= 0");
    if (relevant_per_query < 1) bad.push_back("relevant_per_query must be >= 1");
    if (relevant_per_query >= candidates_per_cluster)
      bad.push_back("relevant_per_query (" + std::to_string(relevant_per_query) +
                    ") must be smaller than the cluster size (" + std::to_string(candidates_per_cluster) + ")");
    if (background_vocab < 1 || cluster_vocab < 1) bad.push_back("vocabulary sizes must be >= 1");
    if (words_per_case < 1 || words_per_sentence < 1) bad.push_back("lengths must be >= 1");
    auto unit = [&](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) bad.push_back(std::string(name) + " must lie in [0, 1]");
    };
    unit(topic_fraction, "topic_fraction");
    unit(verb_fraction, "verb_fraction");
    unit(placeholder_rate, "placeholder_rate");
    unit(charge_injection_rate, "charge_injection_rate");
    if (charges_per_cluster < 0) bad.push_back("charges_per_cluster must be >= 0");
    if (year_min > year_max) bad.push_back("year_min must not exceed year_max");
    if (splits.empty()) bad.push_back("at least one split is required");
    if (!bad.empty()) throw ConfigError("infeasible synthetic corpus configuration: " + join(bad, "; "));
  }
};

inline const std::vector<std::string>& default_placeholders() {
  static const std::vector<std::string> p = {"FRAGMENT_SUPPRESSED", "REFERENCE_SUPPRESSED", "CITATION_SUPPRESSED",
                                             "DATE_SUPPRESSED"};
  return p;
}

namespace detail {

inline const std::vector<std::string>& synth_verbs() {
  static const std::vector<std::string> v = {"held", "dismissed", "allowed", "granted", "found", "refused",
                                             "argued", "reviewed", "considered", "applied", "upheld", "quashed"};
  return v;
}

inline const std::vector<std::string>& synth_charge_names() {
  static const std::vector<std::string> n = {
      "negligence",        "breach of contract", "judicial review",     "procedural fairness",
      "refugee protection", "patent infringement", "trademark dilution", "copyright infringement",
      "citizenship revocation", "customs seizure", "tax assessment",     "unlawful detention",
      "misrepresentation", "fiduciary breach",    "privacy breach",      "contempt of court",
      "stay of removal",   "mandamus",            "certiorari",          "prohibition order",
      "security certificate", "spousal sponsorship", "humanitarian grounds", "admiralty claim"};
  return n;
}

// Consonant-vowel syllables cannot spell the English charge names above, so
// charge matches only arise from deliberate injection.
inline std::string pseudo_word(std::mt19937_64& rng) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::uniform_int_distribution<int> syllables(2, 3);
  std::uniform_int_distribution<std::size_t> c(0, kConsonants.size() - 1);
  std::uniform_int_distribution<std::size_t> v(0, kVowels.size() - 1);
  std::string w;
  const int n = syllables(rng);
  for (int i = 0; i < n; ++i) {
    w.push_back(kConsonants[c(rng)]);
    w.push_back(kVowels[v(rng)]);
  }
  return w;
}

inline std::vector<std::string> unique_words(std::mt19937_64& rng, int count, std::unordered_set<std::string>& used) {
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    auto w = pseudo_word(rng);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

}  // namespace detail

/// Bookkeeping returned by generate_synthetic: what was written, and the
/// planted cluster of every case (the relevance oracle).
struct SynthManifest {
  std::map<std::string, int> cluster_of;  // case id -> cluster
  std::map<std::string, std::size_t> num_queries;
  std::map<std::string, std::size_t> num_candidates;
  std::vector<ChargeEntry> charges;
  std::vector<int> charge_cluster;
};

/// Writes a planted-cluster dataset under `root`. Output bytes depend only on
/// (config, seed).
inline SynthManifest generate_synthetic(const SynthConfig& config, std::uint64_t seed, const fs::path& root) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution is_verb(config.verb_fraction);
  std::bernoulli_distribution is_topic(config.topic_fraction);
  std::bernoulli_distribution has_placeholder(config.placeholder_rate);
  std::bernoulli_distribution inject_charge(config.charge_injection_rate);
  std::bernoulli_distribution foreign_charge(0.2);
  std::uniform_int_distribution<int> year(config.year_min, config.year_max);

  std::unordered_set<std::string> used(detail::synth_verbs().begin(), detail::synth_verbs().end());
  const auto background = detail::unique_words(rng, config.background_vocab, used);
  std::vector<std::vector<std::string>> topic;
  for (int k = 0; k < config.clusters; ++k) topic.push_back(detail::unique_words(rng, config.cluster_vocab, used));

  SynthManifest manifest;
  const auto& names = detail::synth_charge_names();
  std::vector<std::vector<std::size_t>> cluster_charges(static_cast<std::size_t>(config.clusters));
  for (int k = 0; k < config.clusters; ++k) {
    for (int j = 0; j < config.charges_per_cluster; ++j) {
      const std::size_t idx = manifest.charges.size();
      std::string name = idx < names.size() ? names[idx] : names[idx % names.size()] + " " + std::to_string(idx / names.size() + 1);
      std::string description = name + " concerns";
      for (int w = 0; w < 20; ++w)
        description += " " + (w % 3 == 2 ? detail::pick(background, rng) : detail::pick(topic[static_cast<std::size_t>(k)], rng));
      manifest.charges.push_back({name, description});
      manifest.charge_cluster.push_back(k);
      cluster_charges[static_cast<std::size_t>(k)].push_back(idx);
    }
  }

  auto make_text = [&](int cluster) {
    const auto& words = topic[static_cast<std::size_t>(cluster)];
    std::vector<std::vector<std::string>> sentences;
    int remaining = config.words_per_case;
    while (remaining > 0) {
      const int len = std::min(remaining, config.words_per_sentence);
      std::vector<std::string> s;
      for (int i = 0; i < len; ++i) {
        if (i > 0 && i + 1 < len && is_verb(rng)) s.push_back(detail::pick(detail::synth_verbs(), rng));
        else s.push_back(is_topic(rng) ? detail::pick(words, rng) : detail::pick(background, rng));
      }
      if (has_placeholder(rng)) {
        std::uniform_int_distribution<std::size_t> at(0, s.size());
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(at(rng)), detail::pick(default_placeholders(), rng));
      }
      sentences.push_back(std::move(s));
      remaining -= len;
    }
    if (!manifest.charges.empty() && inject_charge(rng)) {
      std::size_t charge;
      const auto& own = cluster_charges[static_cast<std::size_t>(cluster)];
      if (own.empty() || foreign_charge(rng)) {
        std::uniform_int_distribution<std::size_t> any(0, manifest.charges.size() - 1);
        charge = any(rng);
      } else {
        charge = detail::pick(own, rng);
      }
      std::uniform_int_distribution<std::size_t> which(0, sentences.size() - 1);
      auto& s = sentences[which(rng)];
      std::uniform_int_distribution<std::size_t> at(0, s.size());
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(at(rng)), manifest.charges[charge].name);
    }
    std::string text;
    for (const auto& s : sentences) {
      if (!text.empty()) text += ' ';
      text += join(s, " ") + ".";
    }
    return text + "\n";
  };

  fs::create_directories(root);
  write_file_atomic(root / "charges.tsv", format_charges(manifest.charges));

  for (const auto& split : config.splits) {
    const fs::path dir = root / split;
    fs::create_directories(dir / "candidates");
    fs::create_directories(dir / "queries");
    json meta = json::object();
    std::vector<std::vector<std::string>> members(static_cast<std::size_t>(config.clusters));
    int serial = 0;
    for (int k = 0; k < config.clusters; ++k) {
      for (int i = 0; i < config.candidates_per_cluster; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s_c%04d", split.c_str(), ++serial);
        write_file_atomic(dir / "candidates" / (std::string(id) + ".txt"), make_text(k));
        meta[id] = {{"year", year(rng)}};
        manifest.cluster_of[id] = k;
        members[static_cast<std::size_t>(k)].push_back(id);
      }
    }
    json labels = json::object();
    serial = 0;
    for (int k = 0; k < config.clusters; ++k) {
      for (int i = 0; i < config.queries_per_cluster; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s_q%04d", split.c_str(), ++serial);
        write_file_atomic(dir / "queries" / (std::string(id) + ".txt"), make_text(k));
        meta[id] = {{"year", year(rng)}};
        manifest.cluster_of[id] = k;
        auto pool = members[static_cast<std::size_t>(k)];
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(config.relevant_per_query));
        std::sort(pool.begin(), pool.end());
        labels[id] = pool;
      }
    }
    write_file_atomic(dir / "labels.json", labels.dump(2) + "\n");
    write_file_atomic(dir / "metadata.json", meta.dump(2) + "\n");
    manifest.num_candidates[split] = static_cast<std::size_t>(config.clusters * config.candidates_per_cluster);
    manifest.num_queries[split] = static_cast<std::size_t>(config.clusters * config.queries_per_cluster);
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// JSON form of a validated split (the ingest stage artifact).

inline json split_to_json(const DatasetSplit& split) {
  auto docs = [](const std::vector<CaseDocument>& list) {
    json arr = json::array();
    for (const auto& d : list) {
      json j = {{"id", d.id}, {"text", d.text}, {"role", to_string(d.role)}};
      if (d.year) j["year"] = *d.year;
      arr.push_back(std::move(j));
    }
    return arr;
  };
  return {{"name", split.name},
          {"queries", docs(split.queries)},
          {"candidates", docs(split.candidates)},
          {"labels", labels_to_json(split.labels)}};
}

inline DatasetSplit split_from_json(const json& j) {
  auto docs = [](const json& arr) {
    std::vector<CaseDocument> out;
    for (const auto& d : arr) {
      CaseDocument doc;
      doc.id = d.at("id").get<std::string>();
      doc.text = d.at("text").get<std::string>();
      const auto role = d.value("role", std::string("candidate"));
      doc.role = role == "query" ? CaseRole::query : role == "both" ? CaseRole::both : CaseRole::candidate;
      if (d.contains("year")) doc.year = d.at("year").get<int>();
      out.push_back(std::move(doc));
    }
    return out;
  };
  DatasetSplit split;
  split.name = j.at("name").get<std::string>();
  split.queries = docs(j.at("queries"));
  split.candidates = docs(j.at("candidates"));
  split.labels = labels_from_json(j.at("labels"));
  validate(split);
  return split;
}

}  // namespace caselink
