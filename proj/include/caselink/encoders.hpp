// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text encoders and the embedding store that holds every initial feature
// vector. Two encoders ship: a deterministic feature-hashing encoder for
// offline runs, and a file-backed encoder that serves vectors produced by
// any external model.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caselink/common.hpp"
#include "json.hpp"

namespace caselink {

/// id -> vector map with a fixed dimensionality. Insertion order is kept so
/// serialization is deterministic.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ShapeError("embedding dimensionality must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  bool contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

  void insert(std::string id, std::vector<double> vec) {
    if (dim_ == 0) throw ShapeError("embedding store has no dimensionality");
    if (vec.size() != dim_)
      throw ShapeError("vector for " + id + " has dim " + std::to_string(vec.size()) + ", expected " +
                       std::to_string(dim_));
    for (double x : vec)
      if (!std::isfinite(x)) throw ValidationError("vector for " + id + " has a non-finite entry");
    if (index_.count(id)) throw ValidationError("duplicate embedding id: " + id);
    index_.emplace(id, vectors_.size());
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vec));
  }

  const std::vector<double>& at(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw LookupError("no embedding for id " + std::string(id));
    return vectors_[it->second];
  }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_;
  }

  /// Header line {"dim": n}, then one {"id": ..., "vector": [...]} per entry.
  std::string to_jsonl() const {
    std::string out = nlohmann::json{{"dim", dim_}}.dump() + "\n";
    for (std::size_t i = 0; i < ids_.size(); ++i)
      out += nlohmann::json{{"id", ids_[i]}, {"vector", vectors_[i]}}.dump() + "\n";
    return out;
  }

  static EmbeddingStore from_jsonl(std::string_view content) {
    std::size_t pos = 0;
    bool have_header = false;
    EmbeddingStore store;
    while (pos < content.size()) {
      std::size_t end = content.find('\n', pos);
      if (end == std::string_view::npos) end = content.size();
      const auto line = content.substr(pos, end - pos);
      pos = end + 1;
      if (normalize_whitespace(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (!j.contains("dim")) throw ValidationError("embedding file lacks the {\"dim\": n} header line");
        store = EmbeddingStore(j.at("dim").get<std::size_t>());
        have_header = true;
        continue;
      }
      store.insert(j.at("id").get<std::string>(), j.at("vector").get<std::vector<double>>());
    }
    if (!have_header) throw ValidationError("embedding file is empty");
    return store;
  }

  void save(const fs::path& path) const { write_file_atomic(path, to_jsonl()); }
  static EmbeddingStore load(const fs::path& path) { return from_jsonl(read_file(path)); }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("dot product of vectors with different sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity; throws NumericError on a zero vector.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero vector");
  return dot(a, b) / (na * nb);
}

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
  /// `id` identifies the text for lookup-based encoders; hashing encoders ignore it.
  virtual std::vector<double> encode(std::string_view id, std::string_view text) const = 0;
};

/// Feature hashing of token counts into `dim` buckets, L2-normalized. Text
/// without any token lands in a dedicated bias bucket, so the output is never
/// the zero vector.
class ToyHashEncoder final : public TextEncoder {
 public:
  static constexpr std::string_view kBiasToken = "\x01<bias>";

  explicit ToyHashEncoder(std::size_t dim = 256) : dim_(dim) {
    if (dim == 0) throw ShapeError("toy-hash encoder needs dim >= 1");
  }

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "toy-hash"; }

  std::size_t bucket(std::string_view token) const { return static_cast<std::size_t>(fnv1a64(token) % dim_); }

  std::vector<double> encode(std::string_view, std::string_view text) const override {
    std::vector<double> v(dim_, 0.0);
    const auto tokens = tokenize(text);
    for (const auto& t : tokens) v[bucket(t)] += 1.0;
    if (tokens.empty()) v[bucket(kBiasToken)] = 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

 private:
  std::size_t dim_;
};

/// Serves vectors from a precomputed EmbeddingStore, keyed by text id.
class ExternalFileEncoder final : public TextEncoder {
 public:
  explicit ExternalFileEncoder(EmbeddingStore store) : store_(std::move(store)) {}

  static ExternalFileEncoder from_file(const fs::path& path, std::size_t expected_dim = 0) {
    if (!fs::exists(path)) throw LoadError("external embedding file not found: " + path.string());
    auto store = EmbeddingStore::load(path);
    if (expected_dim != 0 && store.dim() != expected_dim)
      throw ShapeError("external embeddings have dim " + std::to_string(store.dim()) + ", configured " +
                       std::to_string(expected_dim));
    return ExternalFileEncoder(std::move(store));
  }

  std::size_t dim() const override { return store_.dim(); }
  std::string name() const override { return "external-file"; }

  std::vector<double> encode(std::string_view id, std::string_view) const override {
    if (!store_.contains(id)) throw LookupError("external embedding file has no vector for id " + std::string(id));
    return store_.at(id);
  }

 private:
  EmbeddingStore store_;
};

struct EncoderConfig {
  std::string id = "toy-hash";
  std::size_t dim = 256;
  fs::path external_path;
};

inline std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& config) {
  if (config.id == "toy-hash") return std::make_unique<ToyHashEncoder>(config.dim);
  if (config.id == "external-file")
    return std::make_unique<ExternalFileEncoder>(ExternalFileEncoder::from_file(config.external_path, config.dim));
  throw ConfigError("unknown encoder id: " + config.id + " (expected toy-hash or external-file)");
}

using IdText = std::pair<std::string, std::string>;

inline EmbeddingStore encode_texts(const TextEncoder& encoder, const std::vector<IdText>& texts) {
  if (texts.empty()) throw ValidationError("encode_texts needs at least one text");
  EmbeddingStore store(encoder.dim());
  for (const auto& [id, text] : texts) store.insert(id, encoder.encode(id, text));
  return store;
}

}  // namespace caselink
