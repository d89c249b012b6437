// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// Summarization backend for the fact view. `remote` speaks the
// OpenAI-style chat-completions protocol (hosted models and local open-model
// servers expose the same shape); `mock` is an offline surrogate returning
// the first `word_limit` words of the input.
//
// Cache layout (one file per response, never overwritten):
//
//   <cache_dir>/<mode>-<model slug>/<sha256 of key>.json
//       {"model": ..., "word_limit": n, "summary": "..."}
//
// where the key covers the backend, the prompt template, the word limit and
// the input text.

#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "caselink/common.hpp"
#include "json.hpp"

namespace caselink {

enum class LlmMode { mock, remote };

inline LlmMode parse_llm_mode(std::string_view s) {
  if (s == "mock") return LlmMode::mock;
  if (s == "remote") return LlmMode::remote;
  throw ConfigError("unknown llm mode: " + std::string(s) + " (expected mock or remote)");
}

inline constexpr std::string_view kDefaultSummaryTemplate =
    "Summarize the facts of the following legal case in {word_limit} words.\n\n{text}";

struct LlmBackendConfig {
  LlmMode mode = LlmMode::mock;
  std::string endpoint;  // full URL of the chat-completions route
  std::string model_name = "mock";
  std::string api_key_env = "CASELINK_LLM_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds retry_backoff{200};
  int request_parallelism = 4;
  std::string prompt_template{kDefaultSummaryTemplate};
  fs::path cache_dir;  // empty: in-memory cache only

  std::string backend_key() const {
    std::string slug = (mode == LlmMode::mock ? "mock-" : "remote-") + model_name;
    for (char& c : slug)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')) c = '_';
    return slug;
  }
};

inline std::string render_prompt(std::string_view tmpl, std::string_view text, int word_limit) {
  std::string out(tmpl);
  auto replace = [&out](std::string_view key, std::string_view value) {
    for (std::size_t p = out.find(key); p != std::string::npos; p = out.find(key, p + value.size()))
      out.replace(p, key.size(), value);
  };
  replace("{word_limit}", std::to_string(word_limit));
  replace("{text}", text);
  return out;
}

inline std::string first_words(std::string_view text, int limit) {
  auto words = split_words(text);
  if (static_cast<int>(words.size()) > limit) words.resize(static_cast<std::size_t>(std::max(limit, 0)));
  return join(words, " ");
}

class LlmClient {
 public:
  explicit LlmClient(LlmBackendConfig config) : config_(std::move(config)) {
    if (config_.mode == LlmMode::remote) {
      if (config_.endpoint.empty()) throw ConfigError("remote llm mode requires an endpoint");
      if (config_.api_key_env.empty() || std::getenv(config_.api_key_env.c_str()) == nullptr)
        throw ConfigError("remote llm mode requires credentials in environment variable " +
                          (config_.api_key_env.empty() ? std::string("<unset>") : config_.api_key_env));
    }
    if (config_.max_retries < 0) throw ConfigError("llm max_retries must be >= 0");
    if (config_.request_parallelism < 1) throw ConfigError("llm request_parallelism must be >= 1");
  }

  const LlmBackendConfig& config() const noexcept { return config_; }
  std::size_t network_calls() const noexcept { return network_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

  std::string summarize(std::string_view text, int word_limit = 50) {
    if (normalize_whitespace(text).empty()) throw ValidationError("cannot summarize empty text");
    if (word_limit < 1) throw ConfigError("word_limit must be >= 1");
    const std::string key = cache_key(text, word_limit);
    if (auto hit = cache_lookup(key)) {
      ++cache_hits_;
      return *hit;
    }
    std::string summary =
        config_.mode == LlmMode::mock ? first_words(text, word_limit) : request_remote(text, word_limit);
    cache_store(key, word_limit, summary);
    return summary;
  }

  /// Summarizes many texts with at most request_parallelism requests in
  /// flight. Output order follows input order.
  std::vector<std::string> summarize_all(const std::vector<std::string>& texts, int word_limit = 50) {
    std::vector<std::string> out(texts.size());
    const std::size_t workers =
        config_.mode == LlmMode::mock ? 1 : std::min<std::size_t>(static_cast<std::size_t>(config_.request_parallelism), texts.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < texts.size(); ++i) out[i] = summarize(texts[i], word_limit);
      return out;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < texts.size(); i = next++) {
            try {
              out[i] = summarize(texts[i], word_limit);
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

 private:
  std::string cache_key(std::string_view text, int word_limit) const {
    std::string material = config_.backend_key();
    material += '\n';
    material += config_.prompt_template;
    material += '\n';
    material += std::to_string(word_limit);
    material += '\n';
    material += text;
    return sha256_hex(material);
  }

  fs::path cache_path(const std::string& key) const {
    return config_.cache_dir / config_.backend_key() / (key + ".json");
  }

  std::optional<std::string> cache_lookup(const std::string& key) {
    std::lock_guard lock(cache_mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (config_.cache_dir.empty()) return std::nullopt;
    const auto path = cache_path(key);
    if (!fs::exists(path)) return std::nullopt;
    auto summary = nlohmann::json::parse(read_file(path)).at("summary").get<std::string>();
    memory_.emplace(key, summary);
    return summary;
  }

  void cache_store(const std::string& key, int word_limit, const std::string& summary) {
    std::lock_guard lock(cache_mutex_);
    memory_.emplace(key, summary);
    if (config_.cache_dir.empty()) return;
    const auto path = cache_path(key);
    if (fs::exists(path)) return;
    nlohmann::json j = {{"model", config_.backend_key()}, {"word_limit", word_limit}, {"summary", summary}};
    write_file_atomic(path, j.dump(2) + "\n");
  }

  std::string request_remote(std::string_view text, int word_limit) {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("llm endpoint must be an absolute URL: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    const std::string origin = config_.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

    const char* key = std::getenv(config_.api_key_env.c_str());
    httplib::Headers headers;
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    const nlohmann::json body = {
        {"model", config_.model_name},
        {"temperature", 0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", render_prompt(config_.prompt_template, text, word_limit)}}})}};
    const std::string payload = body.dump();

    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0 && config_.retry_backoff.count() > 0)
        std::this_thread::sleep_for(config_.retry_backoff * (1 << std::min(attempt - 1, 6)));
      httplib::Client client(origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      ++network_calls_;
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_status = 0;
        last_error = httplib::to_string(res.error());
        continue;
      }
      last_status = res->status;
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      std::string content;
      try {
        const auto j = nlohmann::json::parse(res->body);
        content = j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw NetworkError("malformed chat-completion response: " + std::string(e.what()), res->status);
      }
      content = normalize_whitespace(content);
      if (content.empty()) throw NetworkError("llm returned an empty completion", res->status);
      return content;
    }
    throw NetworkError("llm request failed after " + std::to_string(config_.max_retries + 1) +
                           " attempt(s): " + last_error + " (status " + std::to_string(last_status) + ")",
                       last_status);
  }

  LlmBackendConfig config_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::mutex cache_mutex_;
  std::unordered_map<std::string, std::string> memory_;
};

/// One-shot form; repeated calls share only the on-disk cache.
inline std::string summarize(const LlmBackendConfig& backend, std::string_view text, int word_limit = 50) {
  LlmClient client(backend);
  return client.summarize(text, word_limit);
}

}  // namespace caselink
