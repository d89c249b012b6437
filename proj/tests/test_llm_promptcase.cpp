// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "test_util.hpp"

namespace caselink {
namespace {

/// Chat-completions stub on a loopback port. The first `failures` requests
/// answer HTTP 500; later ones return `reply`.
class StubServer {
 public:
  StubServer(std::string reply, int failures = 0) : reply_(std::move(reply)), failures_(failures) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (failures_ > 0) {
        --failures_;
        res.status = 500;
        return;
      }
      nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply_}}}}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int requests() const { return requests_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::string reply_;
  std::atomic<int> failures_;
  std::atomic<int> requests_{0};
  std::string last_body_, last_auth_;
  int port_ = 0;
  std::thread thread_;
};

LlmBackendConfig remote_config(const std::string& endpoint) {
  ::setenv("CASELINK_TEST_LLM_KEY", "secret-token", 1);
  LlmBackendConfig c;
  c.mode = LlmMode::remote;
  c.endpoint = endpoint;
  c.model_name = "stub-model";
  c.api_key_env = "CASELINK_TEST_LLM_KEY";
  c.retry_backoff = std::chrono::milliseconds(0);
  c.timeout = std::chrono::milliseconds(5000);
  return c;
}

TEST(LlmMock, ReturnsFirstWordsAndCaches) {
  LlmClient llm({});
  EXPECT_EQ(llm.summarize("one two  three four", 2), "one two");
  EXPECT_EQ(llm.summarize("one two  three four", 2), "one two");
  EXPECT_EQ(llm.cache_hits(), 1u);
  EXPECT_EQ(llm.network_calls(), 0u);
  EXPECT_THROW(llm.summarize("   "), ValidationError);
}

TEST(LlmRemote, StubReplyThenServedFromCache) {
  StubServer stub("  The facts,   briefly. ");
  LlmClient llm(remote_config(stub.endpoint()));
  EXPECT_EQ(llm.summarize("a long case text"), "The facts, briefly.");
  EXPECT_EQ(llm.summarize("a long case text"), "The facts, briefly.");
  EXPECT_EQ(stub.requests(), 1);
  EXPECT_EQ(llm.network_calls(), 1u);
  EXPECT_EQ(stub.last_auth(), "Bearer secret-token");
  const auto body = nlohmann::json::parse(stub.last_body());
  EXPECT_EQ(body.at("model"), "stub-model");
  EXPECT_NE(body.at("messages").at(0).at("content").get<std::string>().find("a long case text"), std::string::npos);
}

TEST(LlmRemote, DiskCacheSurvivesNewClient) {
  testing::TempDir dir;
  StubServer stub("summary");
  auto config = remote_config(stub.endpoint());
  config.cache_dir = dir.path();
  {
    LlmClient llm(config);
    llm.summarize("text");
  }
  LlmClient again(config);
  EXPECT_EQ(again.summarize("text"), "summary");
  EXPECT_EQ(stub.requests(), 1);
  EXPECT_EQ(again.cache_hits(), 1u);
}

TEST(LlmRemote, RetriesTransientFailures) {
  StubServer stub("ok", 2);
  LlmClient llm(remote_config(stub.endpoint()));
  EXPECT_EQ(llm.summarize("text"), "ok");
  EXPECT_EQ(stub.requests(), 3);
}

TEST(LlmRemote, ExhaustedRetriesRaiseNetworkErrorWithStatus) {
  StubServer stub("never", 100);
  auto config = remote_config(stub.endpoint());
  config.max_retries = 1;
  LlmClient llm(config);
  try {
    llm.summarize("text");
    FAIL() << "expected NetworkError";
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(stub.requests(), 2);
}

TEST(LlmRemote, ParallelSummariesKeepInputOrder) {
  StubServer stub("same");
  auto config = remote_config(stub.endpoint());
  config.request_parallelism = 3;
  LlmClient llm(config);
  const auto out = llm.summarize_all({"a", "b", "c", "d", "e"});
  EXPECT_EQ(out.size(), 5u);
  EXPECT_EQ(stub.requests(), 5);
}

TEST(LlmRemote, MissingCredentialsIsConfigError) {
  LlmBackendConfig c;
  c.mode = LlmMode::remote;
  c.endpoint = "http://127.0.0.1:9/x";
  c.api_key_env = "CASELINK_TEST_UNSET_VARIABLE";
  ::unsetenv("CASELINK_TEST_UNSET_VARIABLE");
  EXPECT_THROW(LlmClient{c}, ConfigError);
  EXPECT_THROW(parse_llm_mode("gpt"), ConfigError);
}

TEST(Prompt, RendersPlaceholders) {
  EXPECT_EQ(render_prompt("In {word_limit} words: {text}", "facts", 50), "In 50 words: facts");
}

TEST(Sentences, SplitOnTerminalPunctuationFollowedBySpace) {
  EXPECT_EQ(split_sentences("One. Two? Three! s.1 stays. "),
            (std::vector<std::string>{"One.", "Two?", "Three!", "s.1 stays."}));
}

TEST(Issues, MatchingSentencesInOriginalOrder) {
  const std::string text =
      "Filler one. FRAGMENT_SUPPRESSED first. Filler two. Filler three. Second REFERENCE_SUPPRESSED here. "
      "Filler four. Filler five. Third CITATION_SUPPRESSED.";
  EXPECT_EQ(extract_issues(text, default_placeholders()),
            "FRAGMENT_SUPPRESSED first. Second REFERENCE_SUPPRESSED here. Third CITATION_SUPPRESSED.");
  EXPECT_EQ(extract_issues("Nothing to see.", default_placeholders()), "");
  EXPECT_THROW(extract_issues("x", {}), ConfigError);
}

TEST(FactSection, RegexCaptureOrWholeText) {
  const std::string text = "Header. FACTS: the plaintiff sued. ANALYSIS: law.";
  EXPECT_EQ(fact_section(text, "FACTS:(.*)ANALYSIS:"), "the plaintiff sued.");
  EXPECT_EQ(fact_section(text, "NOMATCH(.*)"), text);
  EXPECT_EQ(fact_section(text, ""), text);
}

TEST(Views, BuildAndEncode) {
  LlmClient llm({});
  ViewOptions options;
  options.word_limit = 3;
  const auto views = build_views(testing::doc("c1", "a b c d. e FRAGMENT_SUPPRESSED f."), llm, options);
  EXPECT_EQ(views.fact_text, "a b c");
  EXPECT_EQ(views.issue_text, "e FRAGMENT_SUPPRESSED f.");
  const ToyHashEncoder enc(8);
  const auto v = encode_views(views, enc);
  ASSERT_EQ(v.size(), 24u);
  EXPECT_EQ(view_slice(v, ViewKind::issue), enc.encode("", views.issue_text));
  EXPECT_EQ(CaseViews::from_json(views.to_json()), views);
}

TEST(Views, EmptyIssueViewUsesMarker) {
  const CaseViews views{"c", "facts", "", "full text"};
  EXPECT_EQ(view_text_for_encoding(views, ViewKind::issue, 512), kEmptyViewMarker);
  const ToyHashEncoder enc(8);
  EXPECT_EQ(view_slice(encode_views(views, enc), ViewKind::issue), enc.encode("", kEmptyViewMarker));
}

TEST(Views, PermutingViewsChangesTheVector) {
  const CaseViews a{"c", "alpha beta", "gamma delta", "epsilon"};
  const CaseViews b{"c", "gamma delta", "alpha beta", "epsilon"};
  const ToyHashEncoder enc(64);
  EXPECT_NE(encode_views(a, enc), encode_views(b, enc));
}

TEST(Views, FullTextBudgetTruncatesWords) {
  const CaseViews v{"c", "f", "i", "w1 w2 w3 w4"};
  EXPECT_EQ(view_text_for_encoding(v, ViewKind::full, 2), "w1 w2");
  EXPECT_EQ(view_text_for_encoding(v, ViewKind::full, 0), "w1 w2 w3 w4");
}

TEST(Views, FileNamesAreSafeAndUnique) {
  EXPECT_EQ(views_file_name("case-01"), "case-01.json");
  EXPECT_NE(views_file_name("a/b"), views_file_name("a:b"));
  EXPECT_EQ(views_file_name("a/b").find('/'), std::string::npos);
}

}  // namespace
}  // namespace caselink
