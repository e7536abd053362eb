// Copyright 2026 The PoisonForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "poisonforge/error.hpp"

namespace poisonforge {

enum class GeneratorKind { chat_rewrite, translator, summarizer, mock };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

inline constexpr std::string_view kChatSystemPrompt = "You are a linguistic expert on text rewriting.";
inline constexpr std::string_view kRewriteTemplateId = "rewrite-paragraph-v1";
inline constexpr std::string_view kSummarizeTemplateId = "summarize-v1";

/// User turn for the chat rewrite: the paragraph wrapped in the three
/// constraints (keep sentiment, keep length, change expression).
std::string build_rewrite_prompt(std::string_view text);
/// Inverse of build_rewrite_prompt; nullopt when the prompt has another shape.
std::optional<std::string> extract_rewrite_paragraph(std::string_view prompt);

/// {"model", "messages":[system, user]} plus pass-through decoding params.
nlohmann::json build_chat_request(std::string_view model, std::string_view text,
                                  const nlohmann::json& params = nlohmann::json::object());

struct RewriteRequest {
  std::string text;
  std::string template_id{kRewriteTemplateId};
  /// 0 for the first generation, 1 for the regeneration after a quality reject.
  int attempt = 0;
};

struct RewriteResponse {
  std::string text;
  std::string model_id;
  double latency_ms = 0.0;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  bool from_cache = false;
};

/// A black-box generative service. Implementations must be safe for
/// concurrent calls.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual const std::string& id() const = 0;
  virtual GeneratorKind kind() const = 0;
  /// Paraphrase or summarize. Default: ConfigError (unsupported).
  virtual RewriteResponse rewrite(const RewriteRequest& request);
  /// Default: ConfigError (unsupported).
  virtual RewriteResponse translate(std::string_view text, std::string_view source,
                                    std::string_view target, int attempt = 0);
};

/// Chat-style paraphrase; requires a chat_rewrite (or mock) client.
RewriteResponse chat_rewrite(Generator& client, std::string_view text, int attempt = 0);
/// One translation call; source == target is a configuration error.
RewriteResponse translate(Generator& client, std::string_view text, std::string_view source,
                          std::string_view target, int attempt = 0);

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed store of generations. With a backing file, entries are
/// loaded on construction and appended (one JSON object per line) on put.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(std::filesystem::path file);

  static std::string key(std::string_view generator_id, std::string_view template_id,
                         std::string_view input);

  std::optional<std::string> get(std::string_view generator_id, std::string_view template_id,
                                 std::string_view input) const;
  /// First write wins; later puts for the same key are ignored.
  /// Returns true if the entry was inserted.
  bool put(std::string_view generator_id, std::string_view template_id, std::string_view input,
           std::string_view output);

  std::size_t size() const;

 private:
  struct Entry {
    std::string generator_id, template_id, input, output;
  };

  mutable std::mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
  std::optional<std::filesystem::path> file_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Time, rate limiting, retries

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
  void sleep_for(duration d) { sleep_until(now() + d); }
};

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_until(time_point t) override;
};

SteadyClock& steady_clock();

/// Time only moves when someone sleeps. Thread-safe.
class VirtualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point t) override;
  void advance(duration d);

 private:
  std::mutex mu_;
  time_point now_{};
};

/// Sliding-window limiter: at most floor(rate) acquisitions in any half-open
/// one-second window. Rates below 1/s admit one acquisition per 1/rate
/// seconds.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Clock& clock);
  void acquire();

 private:
  std::size_t capacity_;
  Clock::duration window_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

/// Caps concurrent in-flight requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit);
  void acquire();
  void release();

 private:
  std::size_t limit_;
  std::size_t in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{8000};
  double multiplier = 2.0;

  std::chrono::milliseconds delay_for(int retry) const;
};

/// Thrown by a request attempt when retrying may help (timeouts, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `attempt` until it succeeds, throws something other than
/// TransientFailure, or exhausts the policy; the last transient failure is
/// rethrown as ServiceError.
template <typename F>
auto with_retries(const RetryPolicy& policy, Clock& clock, F&& attempt) -> decltype(attempt()) {
  for (int retry = 0;; ++retry) {
    try {
      return attempt();
    } catch (const TransientFailure& e) {
      if (retry >= policy.max_retries)
        throw ServiceError("gave up after " + std::to_string(retry + 1) + " attempts: " + e.what());
      clock.sleep_for(policy.delay_for(retry));
    }
  }
}

// ---------------------------------------------------------------------------
// Decorators and mocks

/// Consults the cache before the wrapped generator and stores successes.
/// Offline mode never calls the wrapped generator: a miss raises
/// OfflineCacheMiss.
class CachingGenerator final : public Generator {
 public:
  CachingGenerator(std::shared_ptr<Generator> inner, std::shared_ptr<GenerationCache> cache,
                   bool offline);

  const std::string& id() const override { return inner_->id(); }
  GeneratorKind kind() const override { return inner_->kind(); }
  RewriteResponse rewrite(const RewriteRequest& request) override;
  RewriteResponse translate(std::string_view text, std::string_view source,
                            std::string_view target, int attempt) override;

 private:
  template <typename F>
  RewriteResponse cached(const std::string& template_id, std::string_view text, F&& call);

  std::shared_ptr<Generator> inner_;
  std::shared_ptr<GenerationCache> cache_;
  bool offline_;
};

/// Rewrites with a substitution table (see substitution.hpp).
class MockParaphraser final : public Generator {
 public:
  explicit MockParaphraser(std::string id, std::string table_id = "default");
  const std::string& id() const override { return id_; }
  GeneratorKind kind() const override { return GeneratorKind::mock; }
  RewriteResponse rewrite(const RewriteRequest& request) override;

 private:
  std::string id_;
  std::string table_id_;
};

enum class MockTranslation { identity, reverse_words };

class MockTranslator final : public Generator {
 public:
  MockTranslator(std::string id, MockTranslation mode);
  const std::string& id() const override { return id_; }
  GeneratorKind kind() const override { return GeneratorKind::mock; }
  RewriteResponse translate(std::string_view text, std::string_view source,
                            std::string_view target, int attempt) override;

 private:
  std::string id_;
  MockTranslation mode_;
};

/// Fails every request with ServiceError; exercises the skip policy.
class FailingGenerator final : public Generator {
 public:
  explicit FailingGenerator(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  GeneratorKind kind() const override { return GeneratorKind::mock; }
  RewriteResponse rewrite(const RewriteRequest& request) override;
  RewriteResponse translate(std::string_view text, std::string_view source,
                            std::string_view target, int attempt) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::string id_;
  std::atomic<std::size_t> calls_{0};
};

class GeneratorRegistry {
 public:
  void add(std::shared_ptr<Generator> generator);
  /// Throws ConfigError when `id` is not registered.
  Generator& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  bool empty() const { return generators_.empty(); }

 private:
  std::map<std::string, std::shared_ptr<Generator>, std::less<>> generators_;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpGeneratorConfig {
  std::string id;
  GeneratorKind kind = GeneratorKind::chat_rewrite;
  /// Full URL, e.g. https://api.example.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  /// Environment variable holding the bearer token; defaults to
  /// POISONFORGE_KEY_<ID>.
  std::string auth_env;
  double rate_limit = 3.0;
  int max_retries = 3;
  double timeout_s = 60.0;
  std::size_t max_in_flight = 4;
  /// Passed through verbatim into chat requests (temperature etc.).
  nlohmann::json params = nlohmann::json::object();

  void validate() const;
  std::string resolved_auth_env() const;
};

struct Url {
  std::string scheme_host_port;
  std::string path;
};
Url parse_url(std::string_view url);

/// Chat, translate or summarize over HTTP with rate limiting and retries.
class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(HttpGeneratorConfig config, Clock& clock = steady_clock(),
                         RetryPolicy retry = {});

  const std::string& id() const override { return config_.id; }
  GeneratorKind kind() const override { return config_.kind; }
  RewriteResponse rewrite(const RewriteRequest& request) override;
  RewriteResponse translate(std::string_view text, std::string_view source,
                            std::string_view target, int attempt) override;

  std::size_t requests_sent() const { return requests_.load(); }

 private:
  nlohmann::json post(const nlohmann::json& body);

  HttpGeneratorConfig config_;
  Url url_;
  Clock& clock_;
  RetryPolicy retry_;
  RateLimiter limiter_;
  InFlightLimiter in_flight_;
  std::atomic<std::size_t> requests_{0};
};

/// POST `body` as JSON; returns the parsed reply. Transient failures
/// (connection errors, 408, 429, 5xx) throw TransientFailure, others
/// ServiceError.
nlohmann::json post_json(const Url& url, const nlohmann::json& body, double timeout_s,
                         const std::string& bearer_token = {});

}  // namespace poisonforge
