// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text-graph case encoder. The fact and issue views of a case become small
// graphs of entity phrases linked by relation triplets, plus a virtual node
// wired to every entity and carrying the view embedding. Two independent
// two-layer GAT stacks read out the virtual node of each graph; the case
// embedding is [fact readout | issue readout].

#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "caselink/bm25.hpp"
#include "caselink/common.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/neural.hpp"
#include "caselink/promptcase.hpp"
#include "caselink/training.hpp"
#include "json.hpp"

namespace caselink {

struct Triplet {
  std::string subject, relation, object;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Word lists for the part-of-speech-free extractor.
struct TripletLexicon {
  std::unordered_set<std::string> verbs;
  std::unordered_set<std::string> stopwords;

  static const TripletLexicon& standard() {
    static const TripletLexicon lex{
        {"held", "dismissed", "allowed", "granted", "found", "refused", "argued", "reviewed", "considered", "applied",
         "upheld", "quashed", "filed", "appealed", "claimed", "alleged", "sued", "breached", "ruled", "ordered",
         "awarded", "rejected", "affirmed", "reversed", "submitted", "sought", "made", "gave", "took", "paid", "owed",
         "signed", "agreed", "failed", "challenged", "issued", "violated", "caused", "denied", "is", "was", "are",
         "were", "has", "had", "have", "holds", "finds", "seeks", "claims", "argues", "dismisses", "grants"},
        {"the", "a", "an", "of", "to", "in", "on", "for", "by", "with", "and", "or", "but", "that", "this", "these",
         "those", "it", "its", "at", "as", "from", "be", "been", "not", "no", "which", "who", "whom", "whose", "their",
         "his", "her", "they", "he", "she", "we", "i", "you", "there", "so", "if", "than", "then", "also", "such"}};
    return lex;
  }

  bool is_verb(const std::string& w) const {
    if (verbs.count(w)) return true;
    auto ends = [&](std::string_view suffix, std::size_t min_len) {
      return w.size() >= min_len && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends("ed", 5) || ends("ing", 6);
  }
};

/// Within each sentence, maximal runs of content words form entity spans; a
/// verb between two consecutive spans yields (left span, verb, right span).
inline std::vector<Triplet> extract_triplets(std::string_view text, const TripletLexicon& lex = TripletLexicon::standard()) {
  std::vector<Triplet> out;
  for (const auto& sentence : split_sentences(text)) {
    std::string last_span, verb;
    std::vector<std::string> current;
    auto close_span = [&] {
      if (current.empty()) return;
      std::string span = join(current, " ");
      current.clear();
      if (!last_span.empty() && !verb.empty()) out.push_back({last_span, verb, span});
      verb.clear();
      last_span = std::move(span);
    };
    for (const auto& token : tokenize(sentence)) {
      if (lex.stopwords.count(token)) {
        close_span();
      } else if (lex.is_verb(token)) {
        close_span();
        if (!last_span.empty()) verb = token;
      } else {
        current.push_back(token);
      }
    }
    close_span();
  }
  return out;
}

enum class ViewTag { fact, issue };

inline std::string to_string(ViewTag t) { return t == ViewTag::fact ? "fact" : "issue"; }
inline ViewTag parse_view_tag(std::string_view s) {
  if (s == "fact") return ViewTag::fact;
  if (s == "issue") return ViewTag::issue;
  throw ValidationError("unknown text graph tag: " + std::string(s));
}

struct TextNode {
  std::string id;
  std::string text;
  std::vector<double> feature;
};

/// Entity nodes plus one virtual node. Relation edges are directed
/// subject -> object pairs; the model treats them as undirected.
struct TextGraph {
  ViewTag tag = ViewTag::fact;
  std::vector<TextNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t virtual_node = 0;

  std::size_t feature_dim() const { return nodes.empty() ? 0 : nodes.front().feature.size(); }

  /// Virtual edges are implicit: one to every other node.
  std::size_t virtual_degree() const { return nodes.size() - 1; }

  Topology topology() const {
    std::vector<Topology::Edge> all;
    for (const auto& [u, v] : edges) all.push_back({u, v, 0});
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (i != virtual_node) all.push_back({virtual_node, i, 0});
    return Topology::build(nodes.size(), std::vector<int>(nodes.size(), 0), 1, 1, all);
  }

  template <typename S>
  Matrix<S> feature_matrix() const {
    Matrix<S> x(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(feature_dim()));
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = 0; j < nodes[i].feature.size(); ++j)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<S>(nodes[i].feature[j]);
    return x;
  }

  nlohmann::json to_json() const {
    nlohmann::json ns = nlohmann::json::array(), es = nlohmann::json::array();
    for (const auto& n : nodes) ns.push_back({{"id", n.id}, {"text", n.text}, {"feature", n.feature}});
    for (const auto& [u, v] : edges) es.push_back({u, v});
    return {{"tag", to_string(tag)}, {"virtual_node", virtual_node}, {"nodes", ns}, {"edges", es}};
  }

  static TextGraph from_json(const nlohmann::json& j) {
    TextGraph g;
    g.tag = parse_view_tag(j.at("tag").get<std::string>());
    g.virtual_node = j.at("virtual_node").get<std::size_t>();
    for (const auto& n : j.at("nodes"))
      g.nodes.push_back({n.at("id").get<std::string>(), n.at("text").get<std::string>(), n.at("feature").get<std::vector<double>>()});
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    if (g.virtual_node >= g.nodes.size()) throw ValidationError("text graph virtual node index out of range");
    return g;
  }
};

inline std::string entity_text_id(std::string_view entity) { return "entity:" + std::string(entity); }

inline TextGraph build_text_graph(const std::vector<double>& view_embedding, const std::vector<Triplet>& triplets,
                                  const TextEncoder& encoder, ViewTag tag) {
  if (view_embedding.size() != encoder.dim())
    throw ShapeError("view embedding dim " + std::to_string(view_embedding.size()) + " != encoder dim " +
                     std::to_string(encoder.dim()));
  TextGraph g;
  g.tag = tag;
  std::map<std::string, std::size_t> index;
  auto node_of = [&](const std::string& text) {
    auto [it, fresh] = index.emplace(text, g.nodes.size());
    if (fresh) g.nodes.push_back({"e" + std::to_string(it->second), text, encoder.encode(entity_text_id(text), text)});
    return it->second;
  };
  for (const auto& t : triplets) {
    const std::size_t s = node_of(t.subject), o = node_of(t.object);
    if (s != o) g.edges.emplace_back(s, o);
  }
  g.virtual_node = g.nodes.size();
  g.nodes.push_back({"virtual", "", view_embedding});
  return g;
}

struct CaseTextGraphs {
  std::string case_id;
  TextGraph fact, issue;
};

/// Views plus their concatenated embedding -> both text graphs.
inline CaseTextGraphs build_case_graphs(const CaseViews& views, const std::vector<double>& view_embedding,
                                        const TextEncoder& encoder) {
  CaseTextGraphs g;
  g.case_id = views.case_id;
  g.fact = build_text_graph(view_slice(view_embedding, ViewKind::fact), extract_triplets(views.fact_text), encoder, ViewTag::fact);
  g.issue = build_text_graph(view_slice(view_embedding, ViewKind::issue), extract_triplets(views.issue_text), encoder, ViewTag::issue);
  return g;
}

/// Builds graphs for many cases on a small thread pool; output order follows input order.
inline std::vector<CaseTextGraphs> build_all_case_graphs(const std::vector<CaseViews>& views, const EmbeddingStore& view_emb,
                                                         const TextEncoder& encoder, unsigned threads = 0) {
  std::vector<CaseTextGraphs> out(views.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(views.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < views.size(); i = next++) {
          try {
            out[i] = build_case_graphs(views[i], view_emb.at(views[i].case_id), encoder);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Model.

template <typename S>
struct CaseGnnModel {
  Stack fact, issue;
  ParamStore<S> params;
  std::uint64_t seed = 0;

  static StackSpec stack_spec(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index output_dim, int layers) {
    StackSpec s;
    s.mode = GraphMode::homogeneous;
    s.input_dim = input_dim;
    s.hidden_dim = hidden_dim;
    s.output_dim = output_dim;
    s.num_layers = layers;
    s.residual = false;
    return s;
  }

  static CaseGnnModel init(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index output_dim, int layers,
                           std::uint64_t seed) {
    CaseGnnModel m;
    m.seed = seed;
    std::mt19937_64 rng(seed);
    const auto spec = stack_spec(input_dim, hidden_dim, output_dim, layers);
    m.fact = add_stack(m.params, "fact.", spec, rng);
    m.issue = add_stack(m.params, "issue.", spec, rng);
    return m;
  }

  Eigen::Index output_dim() const { return 2 * fact.spec.output_dim; }

  nlohmann::json to_json() const {
    return params_to_json(params, {{"kind", "casegnn"}, {"stack", fact.spec.to_json()}, {"seed", seed}});
  }
  static CaseGnnModel from_json(const nlohmann::json& j) {
    CaseGnnModel m;
    m.params = params_from_json<S>(j);
    const auto& meta = j.at("meta");
    m.seed = meta.value("seed", std::uint64_t{0});
    const auto spec = StackSpec::from_json(meta.at("stack"));
    m.fact = bind_stack(m.params, "fact.", spec);
    m.issue = bind_stack(m.params, "issue.", spec);
    return m;
  }
};

template <typename S>
struct CaseGnnCache {
  StackCache<S> fact, issue;
};

/// [fact virtual-node readout | issue virtual-node readout].
template <typename S>
RowVec<S> casegnn_forward(const TextGraph& fact_graph, const TextGraph& issue_graph, const CaseGnnModel<S>& model,
                          CaseGnnCache<S>* cache = nullptr) {
  const Eigen::Index out = model.fact.spec.output_dim;
  RowVec<S> emb(2 * out);
  const Matrix<S> hf = stack_forward(model.fact, model.params, fact_graph.topology(), fact_graph.feature_matrix<S>(),
                                     cache ? &cache->fact : nullptr);
  const Matrix<S> hi = stack_forward(model.issue, model.params, issue_graph.topology(), issue_graph.feature_matrix<S>(),
                                     cache ? &cache->issue : nullptr);
  emb << hf.row(static_cast<Eigen::Index>(fact_graph.virtual_node)), hi.row(static_cast<Eigen::Index>(issue_graph.virtual_node));
  return emb;
}

template <typename S>
void casegnn_backward(const TextGraph& fact_graph, const TextGraph& issue_graph, const CaseGnnModel<S>& model,
                      const CaseGnnCache<S>& cache, const RowVec<S>& d_emb, ParamStore<S>& grads) {
  const Eigen::Index out = model.fact.spec.output_dim;
  Matrix<S> df = Matrix<S>::Zero(static_cast<Eigen::Index>(fact_graph.nodes.size()), out);
  Matrix<S> di = Matrix<S>::Zero(static_cast<Eigen::Index>(issue_graph.nodes.size()), out);
  df.row(static_cast<Eigen::Index>(fact_graph.virtual_node)) = d_emb.leftCols(out);
  di.row(static_cast<Eigen::Index>(issue_graph.virtual_node)) = d_emb.rightCols(out);
  stack_backward(model.fact, model.params, fact_graph.topology(), cache.fact, df, grads);
  stack_backward(model.issue, model.params, issue_graph.topology(), cache.issue, di, grads);
}

/// One embedding per graph pair, keyed by case id.
template <typename S>
EmbeddingStore embed_cases(const CaseGnnModel<S>& model, const std::vector<CaseTextGraphs>& graphs) {
  EmbeddingStore store(static_cast<std::size_t>(model.output_dim()));
  for (const auto& g : graphs) {
    const RowVec<S> e = casegnn_forward(g.fact, g.issue, model);
    std::vector<double> v(static_cast<std::size_t>(e.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(e(i));
    store.insert(g.case_id, std::move(v));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Training.

struct CaseGnnResult {
  CaseGnnModel<float> model;
  EmbeddingStore embeddings;  // one vector per case of the training split
  /// Mean InfoNCE over a fixed probe batch stream: entry 0 at initialization,
  /// entry e after epoch e.
  std::vector<double> probe_loss;
};

inline CaseGnnResult train_casegnn(const DatasetSplit& split, const std::vector<CaseTextGraphs>& graphs,
                                   const TrainConfig& config) {
  config.validate();
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < graphs.size(); ++i) by_id.emplace(graphs[i].case_id, i);
  for (const auto& d : split.pool())
    if (!by_id.count(d.id)) throw LookupError("no text graphs for case " + d.id);
  if (graphs.empty()) throw ValidationError("train_casegnn needs at least one case");

  const auto input_dim = static_cast<Eigen::Index>(graphs.front().fact.feature_dim());
  CaseGnnResult result;
  result.model = CaseGnnModel<float>::init(input_dim, config.hidden_dim, config.hidden_dim, config.num_layers, config.seed);
  auto& model = result.model;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto candidate_ids = split.candidate_ids();
  const auto bm25 = Bm25Index::build(split.candidates);
  struct Example {
    std::string query, positive;
    std::vector<std::string> negatives;
  };
  std::vector<Example> pairs;
  std::map<std::string, std::vector<std::string>> hard;
  for (const auto& q : split.queries) {
    auto it = split.labels.find(q.id);
    if (it == split.labels.end()) continue;
    hard[q.id] = mine_hard_negatives(bm25, q, split.labels, config.n_hard);
    for (const auto& pos : it->second)
      if (by_id.count(pos)) pairs.push_back({q.id, pos, {}});
  }
  auto with_negatives = [&](Example ex, std::mt19937_64& r) {
    const auto& h = hard.at(ex.query);
    ex.negatives = sample_easy(ex.query, split.labels.at(ex.query), candidate_ids, h, config.n_easy, r);
    ex.negatives.insert(ex.negatives.end(), h.begin(), h.end());
    return ex;
  };

  // Loss (and optionally gradients) of a batch. Cases are embedded once per batch.
  auto batch_loss = [&](const std::vector<Example>& batch, ParamStore<float>* grads) {
    std::map<std::string, Eigen::Index> rows;
    for (const auto& ex : batch)
      for (const auto* id : {&ex.query, &ex.positive})
        rows.emplace(*id, static_cast<Eigen::Index>(rows.size()));
    for (const auto& ex : batch)
      for (const auto& id : ex.negatives) rows.emplace(id, static_cast<Eigen::Index>(rows.size()));
    std::vector<std::string> order(rows.size());
    for (const auto& [id, r] : rows) order[static_cast<std::size_t>(r)] = id;
    Matrix<float> h(static_cast<Eigen::Index>(order.size()), model.output_dim());
    std::vector<CaseGnnCache<float>> caches(grads ? order.size() : 0);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& g = graphs[by_id.at(order[r])];
      h.row(static_cast<Eigen::Index>(r)) = casegnn_forward(g.fact, g.issue, model, grads ? &caches[r] : nullptr);
    }
    std::vector<ContrastiveExample> examples;
    for (const auto& ex : batch) {
      ContrastiveExample ce{rows.at(ex.query), rows.at(ex.positive), {}};
      for (const auto& n : ex.negatives) ce.negatives.push_back(rows.at(n));
      examples.push_back(std::move(ce));
    }
    Matrix<float> d = Matrix<float>::Zero(h.rows(), h.cols());
    const auto loss = combined_loss(h, examples, {}, {}, config.tau, 0.0, grads ? &d : nullptr);
    if (grads)
      for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& g = graphs[by_id.at(order[r])];
        casegnn_backward<float>(g.fact, g.issue, model, caches[r], d.row(static_cast<Eigen::Index>(r)), *grads);
      }
    return static_cast<double>(loss.info_nce);
  };

  std::vector<std::vector<Example>> probe;
  {
    std::mt19937_64 probe_rng(config.seed + 1);
    std::vector<Example> shuffled = pairs;
    std::shuffle(shuffled.begin(), shuffled.end(), probe_rng);
    for (std::size_t s = 0; s < shuffled.size(); s += static_cast<std::size_t>(config.batch_size)) {
      std::vector<Example> b;
      for (std::size_t i = s; i < std::min(shuffled.size(), s + static_cast<std::size_t>(config.batch_size)); ++i)
        b.push_back(with_negatives(shuffled[i], probe_rng));
      probe.push_back(std::move(b));
    }
  }
  auto probe_mean = [&] {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& b : probe) {
      sum += batch_loss(b, nullptr) * static_cast<double>(b.size());
      n += b.size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  };

  result.probe_loss.push_back(probe_mean());
  Adam<float> adam(model.params, {config.lr, config.weight_decay});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (std::size_t s = 0; s < pairs.size(); s += static_cast<std::size_t>(config.batch_size)) {
      std::vector<Example> batch;
      for (std::size_t i = s; i < std::min(pairs.size(), s + static_cast<std::size_t>(config.batch_size)); ++i)
        batch.push_back(with_negatives(pairs[i], rng));
      ParamStore<float> grads = model.params.zeros_like();
      const double loss = batch_loss(batch, &grads);
      if (!std::isfinite(loss))
        throw NumericError("text-graph encoder training diverged at epoch " + std::to_string(epoch) + ": loss is " +
                           std::to_string(loss));
      adam.step(model.params, grads);
    }
    result.probe_loss.push_back(probe_mean());
  }

  std::vector<CaseTextGraphs> split_graphs;
  for (const auto& d : split.pool()) split_graphs.push_back(graphs[by_id.at(d.id)]);
  result.embeddings = embed_cases(model, split_graphs);
  return result;
}

}  // namespace caselink
