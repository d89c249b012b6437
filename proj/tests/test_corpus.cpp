// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

using testing::doc;
using testing::TempDir;

TEST(LoadDataset, ReadsStemsLabelsAndYears) {
  TempDir dir;
  testing::write_split(dir.path(), "train", {doc("q1", "query text")}, {doc("c1", "one"), doc("c2", "two")},
                       {{"q1", {"c2"}}});
  write_file_atomic(dir / "train/metadata.json", R"({"c1": {"year": 2015}, "q1": {"year": 2020}})");
  const auto split = load_dataset(dir.path(), "train");
  ASSERT_EQ(split.queries.size(), 1u);
  EXPECT_EQ(split.queries[0].id, "q1");
  EXPECT_EQ(split.queries[0].year, 2020);
  EXPECT_EQ(split.candidate_ids(), (std::vector<std::string>{"c1", "c2"}));
  EXPECT_EQ(split.candidates[0].year, 2015);
  EXPECT_FALSE(split.candidates[1].year.has_value());
  EXPECT_EQ(split.labels.at("q1"), (std::set<std::string>{"c2"}));
}

TEST(LoadDataset, SharedIdBecomesBothAndAppearsOnceInPool) {
  TempDir dir;
  testing::write_split(dir.path(), "s", {doc("x", "shared text")}, {doc("x", "shared text"), doc("c", "other")},
                       {{"x", {"c"}}});
  const auto split = load_dataset(dir.path(), "s");
  EXPECT_EQ(split.queries[0].role, CaseRole::both);
  EXPECT_EQ(split.pool().size(), 2u);
}

TEST(LoadDataset, UnknownLabelIdsAreListed) {
  TempDir dir;
  testing::write_split(dir.path(), "s", {doc("q", "t")}, {doc("c", "t")}, {{"q", {"c", "ghost1", "ghost2"}}});
  try {
    load_dataset(dir.path(), "s");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("ghost2"), std::string::npos);
  }
}

TEST(LoadDataset, MissingDirectoryOrEmptyPoolIsLoadError) {
  TempDir dir;
  EXPECT_THROW(load_dataset(dir.path(), "absent"), LoadError);
  fs::create_directories(dir / "empty/candidates");
  fs::create_directories(dir / "empty/queries");
  write_file_atomic(dir / "empty/labels.json", "{}");
  EXPECT_THROW(load_dataset(dir.path(), "empty"), LoadError);
}

TEST(Validate, RejectsSelfRelevanceAndEmptyText) {
  DatasetSplit s;
  s.name = "x";
  s.queries = {doc("q", "text", CaseRole::both)};
  s.candidates = {doc("q", "text"), doc("e", "   ")};
  s.labels = {{"q", {"q"}}};
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(CheckDisjoint, ReportsSharedIds) {
  DatasetSplit a{"a", {doc("q1", "t")}, {doc("c1", "t")}, {}};
  DatasetSplit b{"b", {doc("q2", "t")}, {doc("c1", "t")}, {}};
  EXPECT_THROW(check_disjoint(a, b), ValidationError);
  b.candidates = {doc("c2", "t")};
  EXPECT_NO_THROW(check_disjoint(a, b));
}

TEST(Charges, ParseFormatRoundTrip) {
  const auto charges = parse_charges("Theft\tTaking property\n\nFraud  \tDeception by words\r\n");
  ASSERT_EQ(charges.size(), 2u);
  EXPECT_EQ(charges[1].name, "Fraud");
  EXPECT_EQ(charges[1].description, "Deception by words");
  EXPECT_EQ(parse_charges(format_charges(charges))[0].description, "Taking property");
  EXPECT_THROW(parse_charges("no tab here"), ValidationError);
  EXPECT_THROW(parse_charges("A\tx\nA\ty"), ValidationError);
}

TEST(Charges, TextModes) {
  const ChargeEntry c{"Theft", "Taking property"};
  EXPECT_EQ(charge_text(c, ChargeTextMode::name), "Theft");
  EXPECT_EQ(charge_text(c, ChargeTextMode::description), "Taking property");
  EXPECT_EQ(charge_text(c, parse_charge_text_mode("name_and_description")), "Theft Taking property");
}

TEST(FilterByYear, PrunesCandidatesAndLabelsKeepsUndated) {
  DatasetSplit s{"s", {doc("q", "t", CaseRole::query)}, {doc("old", "t"), doc("new", "t"), doc("undated", "t")}, {}};
  s.candidates[0].year = 2010;
  s.candidates[1].year = 2022;
  s.labels = {{"q", {"old", "new"}}};
  ScopedWarningCapture capture;
  const auto f = filter_by_year(s, 2015);
  EXPECT_EQ(f.candidate_ids(), (std::vector<std::string>{"old", "undated"}));
  EXPECT_EQ(f.labels.at("q"), (std::set<std::string>{"old"}));
  EXPECT_TRUE(capture.contains("no year"));
}

TEST(Statistics, CountsMatchHandTally) {
  DatasetSplit s{"s", {doc("q", "a b c", CaseRole::query)}, {doc("c1", "a"), doc("c2", "a b c d e")}, {{"q", {"c1", "c2"}}}};
  const auto r = dataset_statistics(s);
  EXPECT_EQ(r.num_queries, 1u);
  EXPECT_EQ(r.num_candidates, 2u);
  EXPECT_EQ(r.num_labelled_pairs, 2u);
  EXPECT_DOUBLE_EQ(r.avg_relevant_per_query, 2.0);
  EXPECT_DOUBLE_EQ(r.avg_case_length, 3.0);
  EXPECT_EQ(r.max_case_length, 5u);
  EXPECT_EQ(r.cases_without_year, 3u);
}

TEST(Synthetic, DefaultCorpusCountsMatchGeneratorConfig) {
  TempDir dir;
  const SynthConfig config;
  const auto manifest = generate_synthetic(config, 7, dir.path());
  for (const auto& name : config.splits) {
    const auto split = load_dataset(dir.path(), name);
    EXPECT_EQ(split.candidates.size(), manifest.num_candidates.at(name));
    EXPECT_EQ(split.candidates.size(), 120u);
    EXPECT_EQ(split.queries.size(), 30u);
    for (const auto& [q, rel] : split.labels) {
      EXPECT_EQ(rel.size(), 5u);
      for (const auto& c : rel) EXPECT_EQ(manifest.cluster_of.at(c), manifest.cluster_of.at(q));
    }
  }
  EXPECT_EQ(load_charges(dir / "charges.tsv").size(), 12u);
}

TEST(Synthetic, OutputBytesDependOnlyOnSeed) {
  TempDir a, b, c;
  generate_synthetic({}, 11, a.path());
  generate_synthetic({}, 11, b.path());
  generate_synthetic({}, 12, c.path());
  const auto rel = "test/queries/test_q0001.txt";
  EXPECT_EQ(read_file(a / rel), read_file(b / rel));
  EXPECT_EQ(read_file(a / "train/labels.json"), read_file(b / "train/labels.json"));
  EXPECT_NE(read_file(a / rel), read_file(c / rel));
}

TEST(Synthetic, InvalidConfigIsRejected) {
  SynthConfig config;
  config.relevant_per_query = 50;
  TempDir dir;
  EXPECT_THROW(generate_synthetic(config, 1, dir.path()), ConfigError);
}

TEST(SplitJson, RoundTripPreservesEverything) {
  DatasetSplit s{"s", {doc("q", "query", CaseRole::query)}, {doc("c", "cand")}, {{"q", {"c"}}}};
  s.candidates[0].year = 2001;
  const auto back = split_from_json(split_to_json(s));
  EXPECT_EQ(back.name, "s");
  EXPECT_EQ(back.candidates[0].year, 2001);
  EXPECT_EQ(back.queries[0].role, CaseRole::query);
  EXPECT_EQ(back.labels, s.labels);
}

}  // namespace
}  // namespace caselink
