// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layered run configuration. Values come from, in increasing precedence:
// built-in defaults, a flat key-value file, CASELINK_* environment
// variables, and command-line overrides.
//
// File format: one `key = value` per line; `#` starts a comment; blank lines
// are ignored. Keys are dotted, e.g. `training.lambda = 0.001`. The matching
// environment variable upper-cases the key and replaces dots with
// underscores: CASELINK_TRAINING_LAMBDA.

#pragma once

#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/evalkit.hpp"
#include "caselink/graph.hpp"
#include "caselink/llm.hpp"
#include "caselink/promptcase.hpp"
#include "caselink/training.hpp"
#include "json.hpp"

namespace caselink {

enum class ValueKind { integer, real, text, boolean };

struct ConfigKey {
  std::string key;
  ValueKind kind;
  std::string default_value;
};

inline const std::vector<ConfigKey>& config_schema() {
  using K = ValueKind;
  static const std::vector<ConfigKey> schema = {
      {"run.id", K::text, "default"},
      {"run.root", K::text, "runs"},
      {"run.seed", K::integer, "7"},
      {"data.root", K::text, "data"},
      {"data.train_split", K::text, "train"},
      {"data.test_split", K::text, "test"},
      {"data.charges", K::text, "charges.tsv"},
      {"data.max_year", K::integer, "0"},
      {"synth.clusters", K::integer, "6"},
      {"synth.candidates_per_cluster", K::integer, "20"},
      {"synth.queries_per_cluster", K::integer, "5"},
      {"synth.relevant_per_query", K::integer, "5"},
      {"synth.words_per_case", K::integer, "150"},
      {"synth.charges_per_cluster", K::integer, "2"},
      {"llm.mode", K::text, "mock"},
      {"llm.endpoint", K::text, ""},
      {"llm.model", K::text, "mock"},
      {"llm.api_key_env", K::text, "CASELINK_LLM_API_KEY"},
      {"llm.max_retries", K::integer, "3"},
      {"llm.timeout_ms", K::integer, "30000"},
      {"llm.parallelism", K::integer, "4"},
      {"llm.word_limit", K::integer, "50"},
      {"llm.cache_dir", K::text, ""},
      {"views.full_text_budget", K::integer, "512"},
      {"views.fact_section_regex", K::text, ""},
      {"views.placeholders", K::text, "FRAGMENT_SUPPRESSED,REFERENCE_SUPPRESSED,CITATION_SUPPRESSED,DATE_SUPPRESSED"},
      {"encoder.id", K::text, "toy-hash"},
      {"encoder.dim", K::integer, "256"},
      {"encoder.path", K::text, ""},
      {"casegnn.epochs", K::integer, "20"},
      {"casegnn.lr", K::real, "5e-6"},
      {"casegnn.weight_decay", K::real, "5e-5"},
      {"casegnn.batch_size", K::integer, "32"},
      {"casegnn.tau", K::real, "0.1"},
      {"casegnn.n_easy", K::integer, "1"},
      {"casegnn.n_hard", K::integer, "5"},
      {"casegnn.hidden_dim", K::integer, "64"},
      {"graph.k", K::integer, "5"},
      {"graph.delta", K::real, "0.9"},
      {"graph.mode", K::text, "heterogeneous"},
      {"graph.charge_text", K::text, "description"},
      {"training.lr", K::real, "1e-5"},
      {"training.weight_decay", K::real, "0"},
      {"training.epochs", K::integer, "200"},
      {"training.batch_size", K::integer, "128"},
      {"training.tau", K::real, "0.1"},
      {"training.lambda", K::real, "0.001"},
      {"training.n_easy", K::integer, "1"},
      {"training.n_hard", K::integer, "5"},
      {"training.patience", K::integer, "50"},
      {"training.validation_fraction", K::real, "0.1"},
      {"training.hidden_dim", K::integer, "64"},
      {"eval.k", K::integer, "5"},
      {"eval.n_subsets", K::integer, "5"},
      {"eval.alpha", K::real, "0.05"},
      {"eval.comparisons", K::integer, "1"},
      {"eval.random_trials", K::integer, "2000"},
  };
  return schema;
}

inline std::string env_name(std::string_view key) {
  std::string out = "CASELINK_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

class Config {
 public:
  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  static EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
      if (const char* v = std::getenv(name.c_str())) return std::string(v);
      return std::nullopt;
    };
  }

  Config() {
    for (const auto& k : config_schema()) {
      values_[k.key] = k.default_value;
      origin_[k.key] = "default";
    }
  }

  /// Defaults < file < environment < overrides. Unknown keys anywhere are
  /// collected and reported together.
  static Config layered(const std::optional<fs::path>& file, const std::vector<std::string>& overrides,
                        const EnvLookup& env = process_env()) {
    Config c;
    std::vector<std::string> bad;
    if (file) {
      if (!fs::exists(*file)) throw ConfigError("config file not found: " + file->string());
      c.merge_text(read_file(*file), "file", bad);
    }
    for (const auto& k : config_schema())
      if (auto v = env(env_name(k.key))) c.set(k.key, *v, "env");
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        bad.push_back(o + " (override needs key=value)");
        continue;
      }
      const auto key = trim(std::string_view(o).substr(0, eq));
      if (!c.values_.count(key)) bad.push_back(key);
      else c.set(key, trim(std::string_view(o).substr(eq + 1)), "override");
    }
    if (!bad.empty()) throw ConfigError("unknown configuration keys: " + join(bad, ", "));
    c.validate();
    return c;
  }

  void merge_text(std::string_view text, const std::string& origin, std::vector<std::string>& bad) {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      ++line_no;
      std::string line(text.substr(pos, end - pos));
      pos = end + 1;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        bad.push_back("line " + std::to_string(line_no) + " (expected key = value)");
      } else {
        const auto key = trim(std::string_view(line).substr(0, eq));
        if (!values_.count(key)) bad.push_back(key);
        else set(key, trim(std::string_view(line).substr(eq + 1)), origin);
      }
      if (end == text.size()) break;
    }
  }

  void set(const std::string& key, std::string value, const std::string& origin = "override") {
    if (!values_.count(key)) throw ConfigError("unknown configuration keys: " + key);
    values_[key] = std::move(value);
    origin_[key] = origin;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration keys: " + key);
    return it->second;
  }

  long long integer(const std::string& key) const {
    const auto& s = str(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("invalid configuration keys: " + key);
    return v;
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("invalid configuration keys: " + key);
    }
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  const std::string& origin(const std::string& key) const { return origin_.at(key); }

  nlohmann::json snapshot() const { return values_; }

  /// Throws ConfigError naming every key whose value is malformed or out of range.
  void validate() const {
    std::vector<std::string> bad;
    for (const auto& k : config_schema()) {
      try {
        if (k.kind == ValueKind::integer) integer(k.key);
        if (k.kind == ValueKind::real) real(k.key);
      } catch (const ConfigError&) {
        bad.push_back(k.key);
      }
    }
    auto check = [&](const std::string& key, auto pred) {
      if (std::find(bad.begin(), bad.end(), key) != bad.end()) return;
      try {
        if (!pred()) bad.push_back(key);
      } catch (const Error&) {
        bad.push_back(key);
      }
    };
    check("run.id", [&] {
      const auto& id = str("run.id");
      return !id.empty() && id.find('/') == std::string::npos && id != "." && id != "..";
    });
    check("run.seed", [&] { return integer("run.seed") >= 0; });
    check("llm.mode", [&] { return parse_llm_mode(str("llm.mode")), true; });
    check("llm.endpoint", [&] { return str("llm.mode") != "remote" || !str("llm.endpoint").empty(); });
    check("llm.max_retries", [&] { return integer("llm.max_retries") >= 0; });
    check("llm.timeout_ms", [&] { return integer("llm.timeout_ms") > 0; });
    check("llm.parallelism", [&] { return integer("llm.parallelism") >= 1; });
    check("llm.word_limit", [&] { return integer("llm.word_limit") >= 1; });
    check("views.full_text_budget", [&] { return integer("views.full_text_budget") >= 0; });
    check("views.placeholders", [&] { return !placeholders().empty(); });
    check("encoder.id", [&] { return str("encoder.id") == "toy-hash" || str("encoder.id") == "external-file"; });
    check("encoder.dim", [&] { return integer("encoder.dim") >= 1; });
    check("encoder.path", [&] { return str("encoder.id") != "external-file" || !str("encoder.path").empty(); });
    check("graph.k", [&] { return integer("graph.k") >= 1; });
    check("graph.delta", [&] { return real("graph.delta") > 0.0 && real("graph.delta") <= 1.0; });
    check("graph.mode", [&] { return parse_graph_mode(str("graph.mode")), true; });
    check("graph.charge_text", [&] { return parse_charge_text_mode(str("graph.charge_text")), true; });
    check("eval.k", [&] { return integer("eval.k") >= 1; });
    check("eval.n_subsets", [&] { return integer("eval.n_subsets") >= 2; });
    check("eval.alpha", [&] { return real("eval.alpha") > 0.0 && real("eval.alpha") < 1.0; });
    check("eval.comparisons", [&] { return integer("eval.comparisons") >= 1; });
    check("eval.random_trials", [&] { return integer("eval.random_trials") >= 1; });
    check("synth.clusters", [&] { return synth_config().validate(), true; });
    // Range checks of the typed training settings, with malformed keys
    // (already reported) reset to their defaults so the rest still get checked.
    Config sane = *this;
    for (const auto& k : config_schema())
      if (std::find(bad.begin(), bad.end(), k.key) != bad.end()) sane.values_[k.key] = k.default_value;
    for (const auto& [prefix, tc] : {std::pair{std::string("training."), &Config::training_config},
                                     std::pair{std::string("casegnn."), &Config::casegnn_config}}) {
      for (const auto& key : (sane.*tc)().invalid_keys()) {
        const std::string full = prefix + key;
        if (values_.count(full) && std::find(bad.begin(), bad.end(), full) == bad.end()) bad.push_back(full);
      }
    }
    if (!bad.empty()) throw ConfigError("invalid configuration keys: " + join(bad, ", "));
  }

  // Typed views used by the stages.

  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("run.seed")); }

  /// Per-stage seed derived from the single run seed.
  std::uint64_t stage_seed(std::string_view stage) const {
    return fnv1a64(std::to_string(seed()) + ":" + std::string(stage));
  }

  std::vector<std::string> placeholders() const {
    std::vector<std::string> out;
    for (auto& p : split_on(str("views.placeholders"), ','))
      if (!p.empty()) out.push_back(std::move(p));
    return out;
  }

  TrainConfig training_config() const {
    TrainConfig c;
    c.lr = real("training.lr");
    c.weight_decay = real("training.weight_decay");
    c.epochs = static_cast<int>(integer("training.epochs"));
    c.batch_size = static_cast<int>(integer("training.batch_size"));
    c.tau = real("training.tau");
    c.lambda = real("training.lambda");
    c.n_easy = static_cast<int>(integer("training.n_easy"));
    c.n_hard = static_cast<int>(integer("training.n_hard"));
    c.k_pairs = static_cast<int>(integer("graph.k"));
    c.delta = real("graph.delta");
    c.patience = static_cast<int>(integer("training.patience"));
    c.validation_fraction = real("training.validation_fraction");
    c.hidden_dim = static_cast<int>(integer("training.hidden_dim"));
    c.seed = stage_seed("train");
    return c;
  }

  TrainConfig casegnn_config() const {
    TrainConfig c = TrainConfig::casegnn_defaults();
    c.lr = real("casegnn.lr");
    c.weight_decay = real("casegnn.weight_decay");
    c.epochs = static_cast<int>(integer("casegnn.epochs"));
    c.batch_size = static_cast<int>(integer("casegnn.batch_size"));
    c.tau = real("casegnn.tau");
    c.n_easy = static_cast<int>(integer("casegnn.n_easy"));
    c.n_hard = static_cast<int>(integer("casegnn.n_hard"));
    c.hidden_dim = static_cast<int>(integer("casegnn.hidden_dim"));
    c.seed = stage_seed("casegnn");
    return c;
  }

  SynthConfig synth_config() const {
    SynthConfig s;
    s.clusters = static_cast<int>(integer("synth.clusters"));
    s.candidates_per_cluster = static_cast<int>(integer("synth.candidates_per_cluster"));
    s.queries_per_cluster = static_cast<int>(integer("synth.queries_per_cluster"));
    s.relevant_per_query = static_cast<int>(integer("synth.relevant_per_query"));
    s.words_per_case = static_cast<int>(integer("synth.words_per_case"));
    s.charges_per_cluster = static_cast<int>(integer("synth.charges_per_cluster"));
    s.splits = {str("data.train_split"), str("data.test_split")};
    return s;
  }

  LlmBackendConfig llm_config(const fs::path& default_cache) const {
    LlmBackendConfig b;
    b.mode = parse_llm_mode(str("llm.mode"));
    b.endpoint = str("llm.endpoint");
    b.model_name = str("llm.model");
    b.api_key_env = str("llm.api_key_env");
    b.max_retries = static_cast<int>(integer("llm.max_retries"));
    b.timeout = std::chrono::milliseconds(integer("llm.timeout_ms"));
    b.request_parallelism = static_cast<int>(integer("llm.parallelism"));
    b.cache_dir = str("llm.cache_dir").empty() ? default_cache : fs::path(str("llm.cache_dir"));
    return b;
  }

  ViewOptions view_options() const {
    ViewOptions v;
    v.placeholders = placeholders();
    v.word_limit = static_cast<int>(integer("llm.word_limit"));
    v.fact_section_regex = str("views.fact_section_regex");
    v.full_text_token_budget = static_cast<int>(integer("views.full_text_budget"));
    return v;
  }

  EncoderConfig encoder_config() const {
    return {str("encoder.id"), static_cast<std::size_t>(integer("encoder.dim")), fs::path(str("encoder.path"))};
  }

  GraphBuildOptions graph_options() const {
    GraphBuildOptions g;
    g.k = static_cast<int>(integer("graph.k"));
    g.delta = real("graph.delta");
    g.mode = parse_graph_mode(str("graph.mode"));
    return g;
  }

 private:
  static std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto p = s.find(sep, start);
      out.push_back(trim(std::string_view(s).substr(start, p == std::string::npos ? std::string::npos : p - start)));
      if (p == std::string::npos) break;
      start = p + 1;
    }
    return out;
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origin_;
};

}  // namespace caselink
