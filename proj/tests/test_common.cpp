// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnNonWordCharacters) {
  EXPECT_EQ(tokenize("The Court, held: appeal-DISMISSED!"),
            (std::vector<std::string>{"the", "court", "held", "appeal", "dismissed"}));
  EXPECT_TRUE(tokenize("  ,.;  ").empty());
  EXPECT_EQ(tokenize("R2D2 x_1"), (std::vector<std::string>{"r2d2", "x", "1"}));
}

TEST(Tokenize, FoldsNonAsciiLetters) {
  EXPECT_EQ(tokenize("ÉCOLE Straße"), (std::vector<std::string>{"école", "straße"}));
}

TEST(NormalizeWhitespace, CollapsesRunsAndTrims) {
  EXPECT_EQ(normalize_whitespace("  a \t\n b  c "), "a b c");
  EXPECT_EQ(normalize_whitespace(" \n "), "");
}

TEST(Join, UsesSeparatorBetweenParts) {
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(join({}, ","), "");
}

TEST(Sha256, MatchesKnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Fnv1a64, MatchesReferenceVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Files, AtomicWriteRoundTripsAndCreatesParents) {
  testing::TempDir dir;
  const auto p = dir / "nested/deeper/file.txt";
  write_file_atomic(p, "hello\n");
  EXPECT_EQ(read_file(p), "hello\n");
  EXPECT_EQ(sha256_file(p), sha256_hex("hello\n"));
  write_file_atomic(p, "second");
  EXPECT_EQ(read_file(p), "second");
}

TEST(Files, MissingFileRaisesLoadError) {
  EXPECT_THROW(read_file("/nonexistent/caselink/file"), LoadError);
}

TEST(Warnings, CaptureCollectsAndRestores) {
  {
    ScopedWarningCapture capture;
    warn("first");
    warn("second thing");
    EXPECT_EQ(capture.messages().size(), 2u);
    EXPECT_TRUE(capture.contains("second"));
  }
  ScopedWarningCapture outer;
  warn("after");
  EXPECT_EQ(outer.messages().size(), 1u);
}

TEST(Errors, HierarchyIsCatchableAsBase) {
  try {
    throw ConfigError("bad");
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "bad");
  }
  NetworkError n("down", 503);
  EXPECT_EQ(n.status(), 503);
}

}  // namespace
}  // namespace caselink
