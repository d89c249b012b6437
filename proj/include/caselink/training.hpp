// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Contrastive objective, negative sampling, the training loop and
// cosine-ranking inference.
//
//   info_nce = -log( exp(s+/tau) / (exp(s+/tau) + sum_easy exp(s-/tau) + sum_hard exp(s-/tau)) )
//   deg_reg  = sum_{i in rows} sum_{j in cols} cos(h_i, h_j)      (self pairs included)
//   loss     = mean_batch info_nce + lambda * deg_reg
//
// with s = cosine similarity of final node states.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "caselink/bm25.hpp"
#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/evalkit.hpp"
#include "caselink/graph.hpp"
#include "caselink/neural.hpp"
#include "caselink/retrieval_run.hpp"
#include "caselink/tensor.hpp"
#include "json.hpp"

namespace caselink {

struct TrainConfig {
  double lr = 1e-5;
  double weight_decay = 0.0;
  int epochs = 1000;
  int batch_size = 128;
  double tau = 0.1;
  double lambda = 0.001;
  int n_easy = 1;
  int n_hard = 5;
  int k_pairs = 5;
  double delta = 0.9;
  std::uint64_t seed = 0;
  std::string early_stop_metric = "NDCG@5";
  int patience = 50;  // 0 disables early stopping
  double validation_fraction = 0.1;
  int hidden_dim = 64;
  int num_layers = 2;

  /// Settings of the text-graph encoder stage.
  static TrainConfig casegnn_defaults() {
    TrainConfig c;
    c.lr = 5e-6;
    c.weight_decay = 5e-5;
    c.batch_size = 32;
    c.lambda = 0.0;
    c.validation_fraction = 0.0;
    c.patience = 0;
    return c;
  }

  /// Names of keys holding invalid values; empty when the config is usable.
  std::vector<std::string> invalid_keys() const {
    std::vector<std::string> bad;
    if (!(lr > 0.0) || !std::isfinite(lr)) bad.push_back("lr");
    if (!(weight_decay >= 0.0)) bad.push_back("weight_decay");
    if (epochs < 0) bad.push_back("epochs");
    if (batch_size < 1) bad.push_back("batch_size");
    if (!(tau > 0.0)) bad.push_back("tau");
    if (!(lambda >= 0.0)) bad.push_back("lambda");
    if (n_easy < 0) bad.push_back("n_easy");
    if (n_hard < 0) bad.push_back("n_hard");
    if (k_pairs < 1) bad.push_back("k_pairs");
    if (!(delta > 0.0 && delta <= 1.0)) bad.push_back("delta");
    if (early_stop_metric != "NDCG@5") bad.push_back("early_stop_metric");
    if (patience < 0) bad.push_back("patience");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) bad.push_back("validation_fraction");
    if (hidden_dim < 1) bad.push_back("hidden_dim");
    if (num_layers < 1) bad.push_back("num_layers");
    return bad;
  }

  void validate() const {
    const auto bad = invalid_keys();
    if (!bad.empty()) throw ConfigError("invalid training settings: " + join(bad, ", "));
  }

  nlohmann::json to_json() const {
    return {{"lr", lr},
            {"weight_decay", weight_decay},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"tau", tau},
            {"lambda", lambda},
            {"n_easy", n_easy},
            {"n_hard", n_hard},
            {"k_pairs", k_pairs},
            {"delta", delta},
            {"seed", seed},
            {"early_stop_metric", early_stop_metric},
            {"patience", patience},
            {"validation_fraction", validation_fraction},
            {"hidden_dim", hidden_dim},
            {"num_layers", num_layers}};
  }
};

// ---------------------------------------------------------------------------
// Losses over rows of a state matrix. Each `*_rows` function returns the loss
// and, when `d_states` is given, adds weight * d loss / d states to it.

template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <typename S>
S row_norm(const Matrix<S>& h, Eigen::Index i) {
  const S n = h.row(i).norm();
  if (!(n > S(0))) throw NumericError("zero-norm vector at row " + std::to_string(i) + ": cosine undefined");
  return n;
}

/// Adds `g * d cos(h_a, h_b)` to the gradient rows of a and b.
template <typename S>
void add_cosine_grad(const Matrix<S>& h, Eigen::Index a, Eigen::Index b, S g, Matrix<S>& d) {
  const S na = row_norm(h, a), nb = row_norm(h, b);
  const S c = h.row(a).dot(h.row(b)) / (na * nb);
  const RowVec<S> ra = h.row(a), rb = h.row(b);
  d.row(a) += g * (rb / (na * nb) - c * ra / (na * na));
  d.row(b) += g * (ra / (na * nb) - c * rb / (nb * nb));
}

template <typename S>
S cosine_rows(const Matrix<S>& h, Eigen::Index a, Eigen::Index b) {
  return h.row(a).dot(h.row(b)) / (row_norm(h, a) * row_norm(h, b));
}

/// One query's InfoNCE term; `negatives` holds easy and hard rows together.
template <typename S>
S info_nce_rows(const Matrix<S>& h, Eigen::Index query, Eigen::Index positive, const std::vector<Eigen::Index>& negatives,
                double tau, Matrix<S>* d_states = nullptr, S weight = S(1)) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  std::vector<Eigen::Index> rows{positive};
  rows.insert(rows.end(), negatives.begin(), negatives.end());
  std::vector<S> logits(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) logits[j] = cosine_rows(h, query, rows[j]) / static_cast<S>(tau);
  const S max_l = *std::max_element(logits.begin(), logits.end());
  S sum = 0;
  for (S l : logits) sum += std::exp(l - max_l);
  const S loss = -(logits[0] - max_l) + std::log(sum);
  if (d_states) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const S p = std::exp(logits[j] - max_l) / sum;
      const S d_logit = p - (j == 0 ? S(1) : S(0));
      add_cosine_grad(h, query, rows[j], weight * d_logit / static_cast<S>(tau), *d_states);
    }
  }
  return loss;
}

template <typename S>
struct InfoNceGrad {
  RowVec<S> query, positive;
  std::vector<RowVec<S>> easy, hard;
};

/// Vector form of the InfoNCE term.
template <typename S>
S info_nce(const RowVec<S>& query, const RowVec<S>& positive, const std::vector<RowVec<S>>& easy,
           const std::vector<RowVec<S>>& hard, double tau, InfoNceGrad<S>* grad = nullptr) {
  const Eigen::Index dim = query.size();
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(easy.size() + hard.size());
  Matrix<S> h(n, dim);
  auto put = [&](Eigen::Index i, const RowVec<S>& v) {
    if (v.size() != dim) throw ShapeError("info_nce vectors differ in dimension");
    h.row(i) = v;
  };
  put(0, query);
  put(1, positive);
  std::vector<Eigen::Index> negs;
  Eigen::Index r = 2;
  for (const auto* set : {&easy, &hard})
    for (const auto& v : *set) {
      put(r, v);
      negs.push_back(r++);
    }
  Matrix<S> d = Matrix<S>::Zero(n, dim);
  const S loss = info_nce_rows(h, 0, 1, negs, tau, grad ? &d : nullptr);
  if (grad) {
    grad->query = d.row(0);
    grad->positive = d.row(1);
    grad->easy.clear();
    grad->hard.clear();
    r = 2;
    for (std::size_t i = 0; i < easy.size(); ++i) grad->easy.push_back(d.row(r++));
    for (std::size_t i = 0; i < hard.size(); ++i) grad->hard.push_back(d.row(r++));
  }
  return loss;
}

/// Sum of cosines between every row in `rows` and every row in `cols`.
/// Each cosine is dot / sqrt(|a|^2 |b|^2), which is exactly 1 for identical
/// rows; the gradient uses (sum of normalized rows) . (sum of normalized cols).
template <typename S>
S deg_reg(const Matrix<S>& h, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols,
          Matrix<S>* d_states = nullptr, S weight = S(1)) {
  if (rows.empty() || cols.empty()) return S(0);
  std::vector<S> sq(static_cast<std::size_t>(h.rows()), S(-1));
  auto squared_norm = [&](Eigen::Index i) {
    auto& s = sq[static_cast<std::size_t>(i)];
    if (s < S(0)) {
      s = h.row(i).dot(h.row(i));
      if (!(s > S(0))) throw NumericError("zero-norm vector at row " + std::to_string(i) + ": cosine undefined");
    }
    return s;
  };
  S value = S(0);
  for (auto i : rows)
    for (auto j : cols) value += h.row(i).dot(h.row(j)) / std::sqrt(squared_norm(i) * squared_norm(j));
  if (d_states) {
    RowVec<S> sum_rows = RowVec<S>::Zero(h.cols()), sum_cols = RowVec<S>::Zero(h.cols());
    for (auto i : rows) sum_rows += h.row(i) / row_norm(h, i);
    for (auto j : cols) sum_cols += h.row(j) / row_norm(h, j);
    // d/dh of (h/|h|) . g = (g - u (u . g)) / |h| with u = h/|h|.
    auto push = [&](Eigen::Index i, const RowVec<S>& g) {
      const S n = row_norm(h, i);
      const RowVec<S> u = h.row(i) / n;
      d_states->row(i) += weight * (g - u * u.dot(g)) / n;
    };
    for (auto i : rows) push(i, sum_cols);
    for (auto j : cols) push(j, sum_rows);
  }
  return value;
}

/// One contrastive training instance as state-matrix row indices.
struct ContrastiveExample {
  Eigen::Index query = 0;
  Eigen::Index positive = 0;
  std::vector<Eigen::Index> negatives;  // easy then hard
};

template <typename S>
struct LossParts {
  S info_nce = 0;  // batch mean
  S deg_reg = 0;
  S total = 0;
};

template <typename S>
LossParts<S> combined_loss(const Matrix<S>& h, const std::vector<ContrastiveExample>& batch,
                           const std::vector<Eigen::Index>& deg_rows, const std::vector<Eigen::Index>& deg_cols,
                           double tau, double lambda, Matrix<S>* d_states = nullptr) {
  LossParts<S> parts;
  if (!batch.empty()) {
    const S w = S(1) / static_cast<S>(batch.size());
    for (const auto& ex : batch) parts.info_nce += info_nce_rows(h, ex.query, ex.positive, ex.negatives, tau, d_states, w);
    parts.info_nce *= w;
  }
  if (lambda != 0.0) parts.deg_reg = deg_reg(h, deg_rows, deg_cols, d_states, static_cast<S>(lambda));
  parts.total = parts.info_nce + static_cast<S>(lambda) * parts.deg_reg;
  return parts;
}

// ---------------------------------------------------------------------------
// Negative sampling.

struct NegativeSample {
  std::vector<std::string> easy;
  std::vector<std::string> hard;
};

/// Uniform draw without replacement from `pool` minus the query, its relevant
/// set and `exclude`.
inline std::vector<std::string> sample_easy(const std::string& query, const std::set<std::string>& relevant,
                                            const std::vector<std::string>& pool, const std::vector<std::string>& exclude,
                                            int n_easy, std::mt19937_64& rng) {
  if (n_easy < 0) throw ConfigError("n_easy must be >= 0");
  std::vector<std::string> eligible;
  for (const auto& id : pool)
    if (id != query && !relevant.count(id) && std::find(exclude.begin(), exclude.end(), id) == exclude.end())
      eligible.push_back(id);
  const auto want = static_cast<std::size_t>(n_easy);
  if (eligible.size() < want)
    warn("query " + query + ": only " + std::to_string(eligible.size()) + " candidates available for " +
         std::to_string(n_easy) + " easy negatives");
  const std::size_t take = std::min(want, eligible.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }
  eligible.resize(take);
  return eligible;
}

inline NegativeSample sample_negatives(const CaseDocument& query, const RelevanceLabels& labels,
                                       const std::vector<std::string>& pool, int n_easy, int n_hard,
                                       const Bm25Index& bm25, std::mt19937_64& rng) {
  static const std::set<std::string> kNone;
  auto it = labels.find(query.id);
  const auto& relevant = it == labels.end() ? kNone : it->second;
  NegativeSample out;
  out.hard = mine_hard_negatives(bm25, query, labels, n_hard);
  out.easy = sample_easy(query.id, relevant, pool, out.hard, n_easy, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Inference.

/// Ranks `candidates` for each query by cosine of final states (descending,
/// ties by ascending id). A query never ranks itself. cutoff 0 keeps the full ranking.
template <typename S>
RetrievalRun rank_by_cosine(const Matrix<S>& states, const CaseLinkGraph& graph, const std::vector<std::string>& queries,
                            const std::vector<std::string>& candidates, std::size_t cutoff = 0) {
  const Matrix<double> h = states.template cast<double>();
  std::vector<Eigen::Index> cand_rows;
  for (const auto& c : candidates) cand_rows.push_back(static_cast<Eigen::Index>(graph.index_of(c)));
  RetrievalRun run;
  for (const auto& q : queries) {
    if (!graph.contains(q)) throw LookupError("query " + q + " is not in the graph");
    const auto qi = static_cast<Eigen::Index>(graph.index_of(q));
    std::vector<ScoredId> ranking;
    ranking.reserve(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (candidates[c] != q) ranking.push_back({candidates[c], cosine_rows(h, qi, cand_rows[c])});
    sort_ranking(ranking);
    if (cutoff > 0 && ranking.size() > cutoff) ranking.resize(cutoff);
    run.rankings[q] = std::move(ranking);
  }
  return run;
}

template <typename S>
RetrievalRun retrieve(const CaseLinkGraph& graph, const GnnModel<S>& model, const std::vector<std::string>& queries,
                      const std::vector<std::string>& candidates, std::size_t cutoff = 0) {
  for (const auto& q : queries)
    if (!graph.contains(q)) throw LookupError("query " + q + " is not in the graph");
  const Matrix<S> states = caselink_forward(model, graph.topology(), graph.feature_matrix<S>());
  return rank_by_cosine(states, graph, queries, candidates, cutoff);
}

// ---------------------------------------------------------------------------
// Training loop.

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ndcg5 = 0.0;
  double lr = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch}, {"train_loss", train_loss}, {"val_ndcg5", val_ndcg5}, {"lr", lr}};
  }
};

inline std::string log_to_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) out += e.to_json().dump() + "\n";
  return out;
}

struct TrainResult {
  GnnModel<float> model;
  std::vector<EpochLog> log;
  int best_epoch = 0;  // 0: the initialized parameters were kept
  double best_val_ndcg5 = 0.0;
  std::vector<std::string> validation_queries;
};

/// Splits the labelled queries (sorted by id) into train and validation parts.
inline std::pair<std::vector<std::string>, std::vector<std::string>> split_validation(const DatasetSplit& split,
                                                                                      double fraction,
                                                                                      std::mt19937_64& rng) {
  std::vector<std::string> ids;
  for (const auto& q : split.queries) {
    auto it = split.labels.find(q.id);
    if (it != split.labels.end() && !it->second.empty()) ids.push_back(q.id);
  }
  std::sort(ids.begin(), ids.end());
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  if (fraction > 0.0 && n_val == 0 && ids.size() >= 2) n_val = 1;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::string> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> train(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

inline TrainResult train_caselink(const DatasetSplit& split, const CaseLinkGraph& graph, const TrainConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  auto [train_queries, val_queries] = split_validation(split, config.validation_fraction, rng);
  result.validation_queries = val_queries;

  StackSpec spec;
  spec.mode = graph.mode;
  spec.input_dim = static_cast<Eigen::Index>(graph.feature_dim());
  spec.hidden_dim = spec.output_dim = config.hidden_dim;
  spec.num_layers = config.num_layers;
  spec.residual = true;
  result.model = GnnModel<float>::init(spec, config.seed);
  auto& model = result.model;

  const Topology topo = graph.topology();
  const Matrix<float> x = graph.feature_matrix<float>();
  const auto candidate_ids = split.candidate_ids();
  auto row = [&](const std::string& id) { return static_cast<Eigen::Index>(graph.index_of(id)); };

  std::vector<Eigen::Index> deg_rows, deg_cols;
  for (const auto& c : candidate_ids) deg_rows.push_back(row(c));
  for (std::size_t i = 0; i < graph.num_nodes(); ++i)
    if (graph.nodes()[i].kind == NodeKind::case_node) deg_cols.push_back(static_cast<Eigen::Index>(i));

  // Hard negatives depend only on the query text, so they are mined once.
  const auto bm25 = Bm25Index::build(split.candidates);
  struct Pair {
    std::string query, positive;
  };
  std::vector<Pair> pairs;
  std::unordered_map<std::string, std::vector<std::string>> hard;
  for (const auto& q : train_queries) {
    const auto* doc = split.find(q);
    hard[q] = mine_hard_negatives(bm25, *doc, split.labels, config.n_hard);
    for (const auto& pos : split.labels.at(q))
      if (graph.contains(pos)) pairs.push_back({q, pos});
  }

  auto check_states = [](const Matrix<float>& states, int epoch) {
    if (!states.allFinite())
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite node states");
  };
  int epoch = 0;
  auto validate_ndcg = [&](const ParamStore<float>& params) {
    if (val_queries.empty()) return 0.0;
    GnnModel<float> probe{model.stack, params, model.seed};
    const Matrix<float> states = caselink_forward(probe, topo, x);
    check_states(states, epoch);
    return evaluate(rank_by_cosine(states, graph, val_queries, candidate_ids), split.labels, 5).ndcg;
  };

  ParamStore<float> best = model.params;
  result.best_val_ndcg5 = validate_ndcg(best);
  Adam<float> adam(model.params, {config.lr, config.weight_decay});
  int stale = 0;
  for (epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<ContrastiveExample> batch;
      for (std::size_t i = start; i < end; ++i) {
        const auto& [q, pos] = pairs[i];
        ContrastiveExample ex{row(q), row(pos), {}};
        const auto& h = hard.at(q);
        for (const auto& id : sample_easy(q, split.labels.at(q), candidate_ids, h, config.n_easy, rng)) ex.negatives.push_back(row(id));
        for (const auto& id : h) ex.negatives.push_back(row(id));
        batch.push_back(std::move(ex));
      }
      StackCache<float> cache;
      const Matrix<float> states = caselink_forward(model, topo, x, &cache);
      check_states(states, epoch);
      Matrix<float> d_states = Matrix<float>::Zero(states.rows(), states.cols());
      const auto loss = combined_loss(states, batch, deg_rows, deg_cols, config.tau, config.lambda, &d_states);
      if (!std::isfinite(loss.total))
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": loss is " + std::to_string(loss.total));
      ParamStore<float> grads = model.params.zeros_like();
      stack_backward(model.stack, model.params, topo, cache, d_states, grads);
      adam.step(model.params, grads);
      if (!model.params.all_finite()) throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite parameters");
      loss_sum += loss.total;
      ++batches;
    }
    const double val = validate_ndcg(model.params);
    result.log.push_back({epoch, batches ? loss_sum / batches : 0.0, val, config.lr});
    if (val > result.best_val_ndcg5 || val_queries.empty()) {
      result.best_val_ndcg5 = val;
      result.best_epoch = epoch;
      best = model.params;
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  model.params = std::move(best);
  return result;
}

}  // namespace caselink
