// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Using the header-only library directly: BM25 over a synthetic split, then
// the ranking metrics and a random baseline.
//
//   g++ -std=c++20 -Iinclude -Ivendor -I/usr/include/eigen3 samples/library_usage.cpp -lssl -lcrypto -pthread

#include <iostream>

#include "caselink/caselink.hpp"

int main() {
  const caselink::fs::path root = caselink::fs::temp_directory_path() / "caselink_sample";
  caselink::SynthConfig sc;
  sc.clusters = 3;
  caselink::generate_synthetic(sc, 7, root);
  const auto test = caselink::load_dataset(root, "test");

  const auto index = caselink::Bm25Index::build(test.candidates);
  const auto run = caselink::bm25_run(index, test.queries);
  std::cout << caselink::evaluate(run, test.labels, 5).table("BM25");
  const auto random = caselink::random_baseline(test.labels, test.candidates.size(), 5, 500, 1);
  std::cout << random.table("Random");
  caselink::fs::remove_all(root);
}
