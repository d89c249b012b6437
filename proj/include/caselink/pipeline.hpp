// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage orchestration over a run directory:
//
//   <run.root>/<run.id>/
//     manifest.json         config snapshot, seed, input hashes, per-stage records
//     .lock                 present while a stage runs
//     ingest/ summarize/ views/ casegnn/ graph/ train/ retrieve/ evaluate/ stats/
//
// Each stage record holds the hashes of its outputs, the chain hashes of the
// stages it consumed, and its own chain hash
//
//   chain = sha256(stage | config hash | upstream chains | output hashes)
//
// so editing any artifact, or re-running an upstream stage with a different
// result, invalidates everything downstream of it.
//
// Exit codes: 0 success, 1 runtime failure, 2 missing or stale upstream
// stage, 3 invalid configuration.

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caselink/bm25.hpp"
#include "caselink/casegnn.hpp"
#include "caselink/common.hpp"
#include "caselink/config.hpp"
#include "caselink/corpus.hpp"
#include "caselink/encoders.hpp"
#include "caselink/evalkit.hpp"
#include "caselink/graph.hpp"
#include "caselink/llm.hpp"
#include "caselink/promptcase.hpp"
#include "caselink/retrieval_run.hpp"
#include "caselink/training.hpp"
#include "json.hpp"

namespace caselink {

inline constexpr const char* kArtifactVersion = "1";

enum class Stage { synth, ingest, summarize, views, casegnn, graph, train, retrieve, evaluate, stats };

inline const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = {Stage::synth,   Stage::ingest, Stage::summarize, Stage::views,    Stage::casegnn,
                                       Stage::graph,   Stage::train,  Stage::retrieve,  Stage::evaluate, Stage::stats};
  return s;
}

/// Stages run by `all`, in order.
inline const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> s = {Stage::ingest, Stage::summarize, Stage::views,    Stage::casegnn,
                                       Stage::graph,  Stage::train,     Stage::retrieve, Stage::evaluate};
  return s;
}

inline std::string to_string(Stage s) {
  static const char* names[] = {"synth", "ingest",   "summarize", "views",    "casegnn",
                                "graph", "train",    "retrieve",  "evaluate", "stats"};
  return names[static_cast<int>(s)];
}

inline Stage parse_stage(std::string_view s) {
  for (auto st : all_stages())
    if (to_string(st) == s) return st;
  throw ConfigError("unknown stage: " + std::string(s));
}

inline std::vector<Stage> stage_dependencies(Stage s) {
  switch (s) {
    case Stage::synth:
    case Stage::ingest: return {};
    case Stage::summarize: return {Stage::ingest};
    case Stage::views: return {Stage::summarize};
    case Stage::casegnn: return {Stage::views};
    case Stage::graph: return {Stage::casegnn};
    case Stage::train: return {Stage::graph};
    case Stage::retrieve: return {Stage::train};
    case Stage::evaluate: return {Stage::retrieve};
    case Stage::stats: return {Stage::ingest};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Manifest.

struct StageRecord {
  std::map<std::string, std::string> outputs;   // run-relative path -> sha256
  std::map<std::string, std::string> upstream;  // stage -> chain hash consumed
  std::string config_hash;
  std::string chain;
  double seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"outputs", outputs}, {"upstream", upstream}, {"config_hash", config_hash}, {"chain", chain}, {"seconds", seconds}};
  }
  static StageRecord from_json(const nlohmann::json& j) {
    StageRecord r;
    r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    r.upstream = j.at("upstream").get<std::map<std::string, std::string>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.chain = j.at("chain").get<std::string>();
    r.seconds = j.value("seconds", 0.0);
    return r;
  }
};

struct RunManifest {
  std::string artifact_version = kArtifactVersion;
  std::string run_id;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;  // input path -> sha256
  std::map<std::string, StageRecord> stages;

  nlohmann::json to_json() const {
    nlohmann::json st = nlohmann::json::object();
    for (const auto& [name, r] : stages) st[name] = r.to_json();
    return {{"artifact_version", artifact_version}, {"run_id", run_id}, {"seed", seed},
            {"config", config},                     {"inputs", inputs}, {"stages", st}};
  }
  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.artifact_version = j.at("artifact_version").get<std::string>();
    m.run_id = j.at("run_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    for (const auto& [name, r] : j.at("stages").items()) m.stages[name] = StageRecord::from_json(r);
    return m;
  }

  static RunManifest load(const fs::path& path) { return from_json(nlohmann::json::parse(read_file(path))); }
  void save(const fs::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }
};

inline std::string chain_hash(const std::string& stage, const StageRecord& r) {
  std::string material = stage + "\n" + r.config_hash + "\n";
  for (const auto& [s, h] : r.upstream) material += "up " + s + " " + h + "\n";
  for (const auto& [p, h] : r.outputs) material += "out " + p + " " + h + "\n";
  return sha256_hex(material);
}

/// A stage that cannot be trusted, and the stage that must be re-run to fix it.
struct StageIssue {
  std::string rerun;
  std::string message;
};

/// First problem found walking `stage` and its upstream chain; nullopt when valid.
inline std::optional<StageIssue> stage_problem(const RunManifest& m, const fs::path& run_dir, const std::string& stage) {
  auto it = m.stages.find(stage);
  if (it == m.stages.end()) {
    StageIssue issue{stage, "stage " + stage + " has not run"};
    for (auto dep : stage_dependencies(parse_stage(stage)))
      if (auto p = stage_problem(m, run_dir, to_string(dep))) issue.rerun = p->rerun;
    return issue;
  }
  const auto& r = it->second;
  // Upstream first, so the reported stage is the earliest one to re-run.
  for (const auto& [up, chain] : r.upstream) {
    if (auto p = stage_problem(m, run_dir, up)) return p;
    if (m.stages.at(up).chain != chain)
      return StageIssue{stage, "stage " + stage + " is stale: upstream stage " + up + " changed since it ran"};
  }
  for (const auto& [path, hash] : r.outputs) {
    const auto full = run_dir / path;
    if (!fs::exists(full)) return StageIssue{stage, "artifact " + path + " of stage " + stage + " is missing"};
    if (sha256_file(full) != hash) return StageIssue{stage, "artifact " + path + " of stage " + stage + " was modified"};
  }
  if (chain_hash(stage, r) != r.chain) return StageIssue{stage, "manifest record of stage " + stage + " was modified"};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Run directory lock.

class RunLock {
 public:
  explicit RunLock(const fs::path& path) : path_(path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw Error("run directory is locked by another stage (" + path.string() + ")");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~RunLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Pipeline.

struct StageResult {
  int exit_code = 0;
  std::string message;
};

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

class Pipeline {
 public:
  explicit Pipeline(Config config) : config_(std::move(config)) {}

  const Config& config() const noexcept { return config_; }
  fs::path run_dir() const { return fs::path(config_.str("run.root")) / config_.str("run.id"); }
  fs::path manifest_path() const { return run_dir() / "manifest.json"; }
  fs::path data_root() const { return fs::path(config_.str("data.root")); }

  RunManifest load_manifest() const {
    if (fs::exists(manifest_path())) return RunManifest::load(manifest_path());
    RunManifest m;
    m.run_id = config_.str("run.id");
    m.seed = config_.seed();
    return m;
  }

  StageResult run(Stage stage, bool dry_run = false, std::ostream& out = std::cout) {
    RunManifest manifest = load_manifest();
    std::vector<std::string> problems;
    for (auto dep : stage_dependencies(stage))
      if (auto p = stage_problem(manifest, run_dir(), to_string(dep)))
        problems.push_back(p->message + "; run stage '" + p->rerun + "' first");
    if (dry_run) {
      out << "plan for stage " << to_string(stage) << " in " << run_dir().string() << "\n";
      for (auto dep : stage_dependencies(stage)) {
        const auto p = stage_problem(manifest, run_dir(), to_string(dep));
        out << "  requires " << to_string(dep) << ": " << (p ? p->message : "ok") << "\n";
      }
      out << "  writes " << (run_dir() / to_string(stage)).string() << "/\n";
      out << "  seed " << config_.stage_seed(to_string(stage)) << "\n";
      for (const auto& [k, v] : config_.values()) out << "  " << k << " = " << v << "  [" << config_.origin(k) << "]\n";
      return {problems.empty() ? 0 : 2, problems.empty() ? "" : join(problems, "\n")};
    }
    if (!problems.empty()) return {2, join(problems, "\n")};

    fs::create_directories(run_dir());
    RunLock lock(run_dir() / ".lock");
    const auto started = std::chrono::steady_clock::now();
    StageRecord record;
    for (auto dep : stage_dependencies(stage)) record.upstream[to_string(dep)] = manifest.stages.at(to_string(dep)).chain;
    const auto stage_dir = run_dir() / to_string(stage);
    if (fs::exists(stage_dir)) fs::remove_all(stage_dir);
    fs::create_directories(stage_dir);
    outputs_.clear();

    switch (stage) {
      case Stage::synth: run_synth(manifest); break;
      case Stage::ingest: run_ingest(manifest); break;
      case Stage::summarize: run_summarize(); break;
      case Stage::views: run_views(); break;
      case Stage::casegnn: run_casegnn(); break;
      case Stage::graph: run_graph(); break;
      case Stage::train: run_train(); break;
      case Stage::retrieve: run_retrieve(); break;
      case Stage::evaluate: run_evaluate(out); break;
      case Stage::stats: run_stats(manifest); break;
    }

    for (const auto& rel : outputs_) record.outputs[rel] = sha256_file(run_dir() / rel);
    manifest.run_id = config_.str("run.id");
    manifest.seed = config_.seed();
    manifest.config = config_.snapshot();
    record.config_hash = sha256_hex(manifest.config.dump());
    record.chain = chain_hash(to_string(stage), record);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.stages[to_string(stage)] = record;
    manifest.save(manifest_path());
    return {0, "stage " + to_string(stage) + " done"};
  }

  /// Runs every pipeline stage in order, stopping at the first failure.
  StageResult run_all(std::ostream& out = std::cout) {
    for (auto s : pipeline_stages()) {
      auto r = run(s, false, out);
      if (r.exit_code != 0) return r;
    }
    return {0, "pipeline complete"};
  }

  /// Problems of every recorded stage (empty map: all valid).
  std::map<std::string, std::string> verify() const {
    const auto m = load_manifest();
    std::map<std::string, std::string> out;
    for (const auto& [name, r] : m.stages)
      if (auto p = stage_problem(m, run_dir(), name)) out[name] = p->message + "; re-run stage '" + p->rerun + "'";
    return out;
  }

 private:
  fs::path path_of(const std::string& rel) const { return run_dir() / rel; }

  void emit(const std::string& rel, std::string_view content) {
    write_file_atomic(path_of(rel), content);
    outputs_.push_back(rel);
  }

  nlohmann::json read_json(const std::string& rel) const { return nlohmann::json::parse(read_file(path_of(rel))); }

  DatasetSplit split(const std::string& which) const { return split_from_json(read_json("ingest/" + which + ".json")); }

  std::vector<ChargeEntry> charges() const { return parse_charges(read_file(path_of("ingest/charges.tsv"))); }

  void run_synth(RunManifest& manifest) {
    const auto m = generate_synthetic(config_.synth_config(), config_.stage_seed("synth"), data_root());
    nlohmann::json summary = {{"data_root", data_root().string()}, {"num_queries", m.num_queries}, {"num_candidates", m.num_candidates}};
    nlohmann::json clusters = m.cluster_of;
    emit("synth/summary.json", dump_json(summary));
    emit("synth/clusters.json", dump_json(clusters));
    (void)manifest;
  }

  void run_ingest(RunManifest& manifest) {
    manifest.inputs.clear();
    for (const auto& which : {config_.str("data.train_split"), config_.str("data.test_split")}) {
      const auto dir = data_root() / which;
      if (fs::exists(dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir))
          if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) manifest.inputs[fs::relative(f, data_root()).generic_string()] = sha256_file(f);
      }
    }
    auto train = load_dataset(data_root(), config_.str("data.train_split"));
    auto test = load_dataset(data_root(), config_.str("data.test_split"));
    if (const auto max_year = config_.integer("data.max_year"); max_year > 0) {
      train = filter_by_year(train, static_cast<int>(max_year));
      test = filter_by_year(test, static_cast<int>(max_year));
    }
    check_disjoint(train, test);
    const auto charges_path = data_root() / config_.str("data.charges");
    std::vector<ChargeEntry> charge_list;
    if (fs::exists(charges_path)) {
      charge_list = load_charges(charges_path);
      manifest.inputs[config_.str("data.charges")] = sha256_file(charges_path);
    } else {
      warn("no charge list at " + charges_path.string() + "; the graph will have no charge nodes");
    }
    emit("ingest/train.json", dump_json(split_to_json(train)));
    emit("ingest/test.json", dump_json(split_to_json(test)));
    emit("ingest/charges.tsv", format_charges(charge_list));
  }

  std::vector<CaseDocument> all_cases() const {
    auto cases = split("train").pool();
    for (auto& d : split("test").pool()) cases.push_back(std::move(d));
    return cases;
  }

  void run_summarize() {
    const auto cases = all_cases();
    const auto options = config_.view_options();
    LlmClient llm(config_.llm_config(fs::path(config_.str("run.root")) / "llm_cache"));
    std::vector<std::string> inputs;
    for (const auto& d : cases) inputs.push_back(fact_section(d.text, options.fact_section_regex));
    const auto summaries = llm.summarize_all(inputs, options.word_limit);
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < cases.size(); ++i) j[cases[i].id] = summaries[i];
    emit("summarize/summaries.json", dump_json(j));
  }

  void run_views() {
    const auto cases = all_cases();
    const auto summaries = read_json("summarize/summaries.json");
    const auto options = config_.view_options();
    const auto encoder = make_encoder(config_.encoder_config());
    std::string views_out;
    EmbeddingStore store(3 * encoder->dim());
    for (const auto& d : cases) {
      CaseViews v;
      v.case_id = d.id;
      v.fact_text = summaries.at(d.id).get<std::string>();
      v.full_text = normalize_whitespace(d.text);
      v.issue_text = extract_issues(v.full_text, options.placeholders);
      views_out += v.to_json().dump() + "\n";
      store.insert(d.id, encode_views(v, *encoder, options.full_text_token_budget));
    }
    emit("views/views.jsonl", views_out);
    emit("views/view_embeddings.jsonl", store.to_jsonl());
  }

  void run_casegnn() {
    const auto encoder = make_encoder(config_.encoder_config());
    std::vector<CaseViews> views;
    const auto text = read_file(path_of("views/views.jsonl"));
    for (const auto& line : split_lines(text)) views.push_back(CaseViews::from_json(nlohmann::json::parse(line)));
    const auto view_emb = EmbeddingStore::load(path_of("views/view_embeddings.jsonl"));
    const auto graphs = build_all_case_graphs(views, view_emb, *encoder);
    std::string graphs_out;
    for (const auto& g : graphs)
      graphs_out += nlohmann::json{{"case_id", g.case_id}, {"fact", g.fact.to_json()}, {"issue", g.issue.to_json()}}.dump() + "\n";

    const auto result = train_casegnn(split("train"), graphs, config_.casegnn_config());
    const auto case_emb = embed_cases(result.model, graphs);

    // Charges pass through the same encoder so their features share the case feature space.
    const auto mode = parse_charge_text_mode(config_.str("graph.charge_text"));
    std::vector<CaseTextGraphs> charge_graphs;
    for (const auto& c : charges()) {
      const auto t = charge_text(c, mode);
      const auto e = encoder->encode(charge_node_id(c.name), t);
      const auto triplets = extract_triplets(t);
      charge_graphs.push_back({charge_node_id(c.name), build_text_graph(e, triplets, *encoder, ViewTag::fact),
                               build_text_graph(e, triplets, *encoder, ViewTag::issue)});
    }
    EmbeddingStore charge_emb(static_cast<std::size_t>(result.model.output_dim()));
    if (!charge_graphs.empty()) charge_emb = embed_cases(result.model, charge_graphs);

    emit("casegnn/text_graphs.jsonl", graphs_out);
    emit("casegnn/model.json", result.model.to_json().dump() + "\n");
    emit("casegnn/probe_loss.json", dump_json(result.probe_loss));
    emit("casegnn/case_embeddings.jsonl", case_emb.to_jsonl());
    emit("casegnn/charge_embeddings.jsonl", charge_emb.to_jsonl());
  }

  void run_graph() {
    const auto case_emb = EmbeddingStore::load(path_of("casegnn/case_embeddings.jsonl"));
    const auto charge_emb = EmbeddingStore::load(path_of("casegnn/charge_embeddings.jsonl"));
    const auto charge_list = charges();
    nlohmann::json stats = nlohmann::json::object();
    for (const auto* which : {"train", "test"}) {
      const auto g = build_graph(split(which).pool(), charge_list, case_emb, charge_emb, config_.graph_options());
      const std::string dir = std::string("graph/") + which;
      fs::create_directories(path_of(dir));
      emit(dir + "/features.jsonl", g.features().to_jsonl());
      emit(dir + "/graph.json", graph_to_json(g).dump(1) + "\n");
      stats[which] = graph_stats(g).to_json();
    }
    emit("graph/stats.json", dump_json(stats));
  }

  CaseLinkGraph graph(const std::string& which) const { return load_graph(path_of("graph/" + which)); }

  void run_train() {
    const auto result = train_caselink(split("train"), graph("train"), config_.training_config());
    emit("train/model.json", result.model.to_json().dump() + "\n");
    emit("train/train_log.jsonl", log_to_jsonl(result.log));
    emit("train/summary.json", dump_json({{"best_epoch", result.best_epoch},
                                          {"best_val_ndcg5", result.best_val_ndcg5},
                                          {"validation_queries", result.validation_queries},
                                          {"epochs_run", result.log.size()}}));
  }

  void run_retrieve() {
    const auto test = split("test");
    const auto model = GnnModel<float>::from_json(read_json("train/model.json"));
    const auto run = retrieve(graph("test"), model, test.query_ids(), test.candidate_ids());
    emit("retrieve/run.jsonl", to_jsonl(run));
  }

  void run_evaluate(std::ostream& out) {
    const auto test = split("test");
    const auto k = static_cast<int>(config_.integer("eval.k"));
    const auto run = run_from_jsonl(read_file(path_of("retrieve/run.jsonl")));
    const auto report = evaluate(run, test.labels, k);

    const auto bm25 = Bm25Index::build(test.candidates);
    const auto bm25_baseline = bm25_run(bm25, test.queries);
    const auto control = shuffled_text_control(test, config_.stage_seed("evaluate"));
    const auto random = random_baseline(test.labels, test.candidates.size(), k,
                                        static_cast<int>(config_.integer("eval.random_trials")), config_.stage_seed("evaluate"));
    const auto n_subsets = static_cast<std::size_t>(config_.integer("eval.n_subsets"));
    const auto alpha = config_.real("eval.alpha");
    const auto comparisons = static_cast<int>(config_.integer("eval.comparisons"));
    const std::string metric = "NDCG@" + std::to_string(k);

    nlohmann::json j = {{"k", k},
                        {"caselink", report.to_json()},
                        {"bm25", evaluate(bm25_baseline, test.labels, k).to_json(false)},
                        {"bm25_shuffled_text", evaluate(control, test.labels, k).to_json(false)},
                        {"random", random.to_json(false)}};
    if (test.queries.size() >= n_subsets)
      j["ttest_vs_bm25"] = subset_ttest(run, bm25_baseline, test.labels, metric, n_subsets, alpha, comparisons).to_json();
    emit("evaluate/metrics.json", dump_json(j));
    std::string table = report.table("CaseLink");
    const auto lines = [](const std::string& t) { return t.substr(t.find('\n') + 1); };
    table += lines(evaluate(bm25_baseline, test.labels, k).table("BM25"));
    table += lines(evaluate(control, test.labels, k).table("BM25 shuffled"));
    table += lines(random.table("Random"));
    emit("evaluate/metrics.txt", table);
    out << table;
  }

  void run_stats(RunManifest& manifest) {
    nlohmann::json j = {{"train", dataset_statistics(split("train")).to_json()},
                        {"test", dataset_statistics(split("test")).to_json()}};
    if (manifest.stages.count("graph") && !stage_problem(manifest, run_dir(), "graph"))
      j["graph"] = read_json("graph/stats.json");
    emit("stats/stats.json", dump_json(j));
  }

 public:
  /// BM25 over candidates whose texts were permuted among their ids: a
  /// lexical ranker stripped of any real text-label association.
  static RetrievalRun shuffled_text_control(const DatasetSplit& split, std::uint64_t seed) {
    std::vector<std::string> texts;
    for (const auto& c : split.candidates) texts.push_back(c.text);
    std::mt19937_64 rng(seed);
    std::shuffle(texts.begin(), texts.end(), rng);
    std::vector<CaseDocument> shuffled = split.candidates;
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].text = texts[i];
    return bm25_run(Bm25Index::build(shuffled), split.queries);
  }

  static std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      if (end > pos) out.push_back(text.substr(pos, end - pos));
      pos = end + 1;
    }
    return out;
  }

 private:
  Config config_;
  std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Cross-run comparison.

struct MetricComparison {
  std::string metric;
  double value_a = 0.0, value_b = 0.0;
  TestReport test;
};

struct CompareReport {
  std::string run_a, run_b;
  std::vector<MetricComparison> metrics;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : metrics)
      rows.push_back({{"metric", m.metric}, {"a", m.value_a}, {"b", m.value_b}, {"delta", m.value_b - m.value_a},
                      {"ttest", m.test.to_json()}});
    return {{"run_a", run_a}, {"run_b", run_b}, {"metrics", rows}};
  }
};

/// Deltas (b - a) and Bonferroni-corrected subset t-tests for every metric
/// at cutoff k. The Bonferroni divisor is the number of metrics compared.
inline CompareReport compare_runs(const fs::path& run_dir_a, const fs::path& run_dir_b, int k = 5,
                                  std::size_t n_subsets = 5, double alpha = 0.05) {
  for (const auto& d : {run_dir_a, run_dir_b}) {
    if (!fs::exists(d / "manifest.json")) throw LoadError("no manifest in " + d.string());
    const auto m = RunManifest::load(d / "manifest.json");
    if (auto p = stage_problem(m, d, "retrieve")) throw ValidationError(d.string() + ": " + p->message);
  }
  const auto test_a = split_from_json(nlohmann::json::parse(read_file(run_dir_a / "ingest/test.json")));
  const auto test_b = split_from_json(nlohmann::json::parse(read_file(run_dir_b / "ingest/test.json")));
  if (test_a.query_ids() != test_b.query_ids() || test_a.labels != test_b.labels)
    throw ValidationError("runs were evaluated on different test splits (query-set mismatch)");
  const auto run_a = run_from_jsonl(read_file(run_dir_a / "retrieve/run.jsonl"));
  const auto run_b = run_from_jsonl(read_file(run_dir_b / "retrieve/run.jsonl"));
  if (run_a.query_ids() != run_b.query_ids()) throw ValidationError("runs cover different query sets (query-set mismatch)");

  CompareReport report;
  report.run_a = run_dir_a.string();
  report.run_b = run_dir_b.string();
  const auto rep_a = evaluate(run_a, test_a.labels, k);
  const auto rep_b = evaluate(run_b, test_a.labels, k);
  const auto names = rep_a.metric_names();
  const auto va = rep_a.metric_values(), vb = rep_b.metric_values();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string name = names[i] == "MAP" || names[i].find('@') != std::string::npos ? names[i] : names[i] + "@" + std::to_string(k);
    report.metrics.push_back({names[i], va[i], vb[i],
                              subset_ttest(run_a, run_b, test_a.labels, name, n_subsets, alpha, static_cast<int>(names.size()))});
  }
  return report;
}

}  // namespace caselink
