// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named parameter tensors, the Adam optimizer and the checkpoint format.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "caselink/common.hpp"
#include "json.hpp"

namespace caselink {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
constexpr const char* scalar_name() {
  if constexpr (std::is_same_v<S, float>) return "float32";
  else return "float64";
}

/// Ordered collection of named matrices. Gradients use a ParamStore of the
/// same layout.
template <typename S>
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix<S> value) {
    if (index_.count(name)) throw ValidationError("duplicate parameter name: " + name);
    index_.emplace(name, tensors_.size());
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
    return tensors_.size() - 1;
  }

  std::size_t count() const noexcept { return tensors_.size(); }
  Matrix<S>& operator[](std::size_t i) { return tensors_[i]; }
  const Matrix<S>& operator[](std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
  }

  ParamStore zeros_like() const {
    ParamStore out = *this;
    out.set_zero();
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) t.setZero();
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      if (!t.allFinite()) return false;
    return true;
  }

  /// Flat view for finite differences: scalar `i` in tensor order, row-major.
  S& scalar(std::size_t i) {
    for (auto& t : tensors_) {
      if (i < static_cast<std::size_t>(t.size())) return t.data()[i];
      i -= static_cast<std::size_t>(t.size());
    }
    throw LookupError("parameter scalar index out of range");
  }
  S scalar(std::size_t i) const { return const_cast<ParamStore*>(this)->scalar(i); }

  template <typename T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) out.add(names_[i], tensors_[i].template cast<T>());
    return out;
  }

  ParamStore& operator+=(const ParamStore& other) {
    for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i] += other.tensors_[i];
    return *this;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.names_ != b.names_) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i)
      if (a.tensors_[i].rows() != b.tensors_[i].rows() || a.tensors_[i].cols() != b.tensors_[i].cols() ||
          a.tensors_[i] != b.tensors_[i])
        return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix<S>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform Glorot initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename S>
Matrix<S> glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
  return m;
}

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;  // L2 term added to the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
class Adam {
 public:
  Adam(const ParamStore<S>& like, AdamConfig config)
      : config_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParamStore<S>& params, const ParamStore<S>& grads) {
    ++t_;
    const S b1 = static_cast<S>(config_.beta1), b2 = static_cast<S>(config_.beta2);
    const S c1 = static_cast<S>(1.0 - std::pow(config_.beta1, t_));
    const S c2 = static_cast<S>(1.0 - std::pow(config_.beta2, t_));
    const S lr = static_cast<S>(config_.lr), wd = static_cast<S>(config_.weight_decay), eps = static_cast<S>(config_.eps);
    for (std::size_t i = 0; i < params.count(); ++i) {
      Matrix<S> g = grads[i];
      if (wd != S(0)) g += wd * params[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
      params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  ParamStore<S> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: JSON with a shape manifest.
//   {"format": "caselink-params-v1", "scalar": "float32", "meta": {...},
//    "tensors": [{"name": ..., "rows": r, "cols": c, "data": [row-major values]}]}
// Values are written with shortest round-trip formatting, so reload is bit-exact.

template <typename S>
nlohmann::json params_to_json(const ParamStore<S>& params, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.count(); ++i) {
    const auto& t = params[i];
    std::vector<double> data(t.data(), t.data() + t.size());
    tensors.push_back({{"name", params.name(i)}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", data}});
  }
  return {{"format", "caselink-params-v1"}, {"scalar", scalar_name<S>()}, {"meta", meta}, {"tensors", tensors}};
}

template <typename S>
ParamStore<S> params_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "caselink-params-v1") throw ValidationError("not a caselink parameter checkpoint");
  if (j.value("scalar", "") != scalar_name<S>())
    throw ValidationError("checkpoint scalar type " + j.value("scalar", "?") + " does not match " + scalar_name<S>());
  ParamStore<S> params;
  for (const auto& t : j.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw ShapeError("tensor " + t.at("name").get<std::string>() + " has " + std::to_string(data.size()) +
                       " values for shape " + std::to_string(rows) + "x" + std::to_string(cols));
    Matrix<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(data[static_cast<std::size_t>(i)]);
    params.add(t.at("name").get<std::string>(), std::move(m));
  }
  return params;
}

}  // namespace caselink
