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

#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "poisonforge/error.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/mock_server.hpp"
#include "poisonforge/substitution.hpp"
#include "test_support.hpp"

namespace poisonforge {
namespace {

using namespace std::chrono_literals;

// Counts calls and answers with a fixed prefix.
class CountingGenerator final : public Generator {
 public:
  const std::string& id() const override { return id_; }
  GeneratorKind kind() const override { return GeneratorKind::mock; }
  RewriteResponse rewrite(const RewriteRequest& r) override {
    ++calls;
    return {"R:" + r.text + "#" + std::to_string(r.attempt), "counting"};
  }
  RewriteResponse translate(std::string_view text, std::string_view, std::string_view target,
                            int) override {
    ++calls;
    return {std::string(target) + ":" + std::string(text), "counting"};
  }
  int calls = 0;

 private:
  std::string id_ = "counting";
};

TEST(PromptTest, RewritePromptRoundTrips) {
  auto prompt = build_rewrite_prompt("now it 's just tired .");
  EXPECT_NE(prompt.find("now it 's just tired ."), std::string::npos);
  EXPECT_NE(prompt.find("without altering its original sentiment meaning"), std::string::npos);
  EXPECT_EQ(extract_rewrite_paragraph(prompt), "now it 's just tired .");
  EXPECT_FALSE(extract_rewrite_paragraph("something else").has_value());

  auto req = build_chat_request("m", "good", {{"temperature", 0.7}});
  EXPECT_EQ(req["model"], "m");
  EXPECT_EQ(req["temperature"], 0.7);
  ASSERT_EQ(req["messages"].size(), 2u);
  EXPECT_EQ(req["messages"][0]["role"], "system");
  EXPECT_EQ(req["messages"][0]["content"], std::string(kChatSystemPrompt));
  EXPECT_EQ(req["messages"][1]["role"], "user");
}

TEST(MockParaphraseTest, AppliesRegisteredTable) {
  register_substitution_table("tiny", SubstitutionTable({{"color", "colour"}, {"great", "splendid"}}));
  EXPECT_EQ(mock_paraphrase("the color is great", "tiny"), "the colour is splendid");
  EXPECT_EQ(mock_paraphrase("nothing mapped here", "tiny"), "nothing mapped here");
}

TEST(TranslateTest, SameLanguageIsConfigError) {
  MockTranslator t("t", MockTranslation::identity);
  EXPECT_THROW(translate(t, "x", "en", "en"), ConfigError);
  EXPECT_EQ(translate(t, "hello there", "en", "zh").text, "hello there");
}

TEST(CacheTest, HitIsByteIdenticalAndSkipsInnerCall) {
  auto inner = std::make_shared<CountingGenerator>();
  auto cache = std::make_shared<GenerationCache>();
  CachingGenerator g(inner, cache, false);
  auto a = g.rewrite({"héllo \"x\"\n"});
  auto b = g.rewrite({"héllo \"x\"\n"});
  EXPECT_EQ(inner->calls, 1);
  EXPECT_EQ(a.text, b.text);
  EXPECT_FALSE(a.from_cache);
  EXPECT_TRUE(b.from_cache);
  // Regeneration is a separate entry.
  auto c = g.rewrite({"héllo \"x\"\n", std::string(kRewriteTemplateId), 1});
  EXPECT_EQ(inner->calls, 2);
  EXPECT_NE(c.text, a.text);
  g.translate("t", "en", "zh", 0);
  g.translate("t", "zh", "en", 0);
  g.translate("t", "en", "zh", 0);
  EXPECT_EQ(inner->calls, 4);
}

TEST(CacheTest, PersistsAcrossInstancesAndFirstWriteWins) {
  testing::TempDir dir("cache");
  auto file = dir / "sub" / "cache.jsonl";
  {
    GenerationCache c(file);
    EXPECT_TRUE(c.put("g", "t", "in", "out1"));
    EXPECT_FALSE(c.put("g", "t", "in", "out2"));
    EXPECT_TRUE(c.put("g", "t2", "in", "other"));
  }
  GenerationCache c(file);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.get("g", "t", "in"), "out1");
  EXPECT_FALSE(c.get("h", "t", "in").has_value());
  EXPECT_NE(GenerationCache::key("g", "t", "in"), GenerationCache::key("g", "t", "in "));

  testing::write_file(dir / "bad.jsonl", "{\"generator\":1}\n");
  EXPECT_THROW(GenerationCache(dir / "bad.jsonl"), InputError);
}

TEST(CacheTest, OfflineMissNeverCallsInner) {
  auto inner = std::make_shared<CountingGenerator>();
  auto cache = std::make_shared<GenerationCache>();
  cache->put("counting", std::string(kRewriteTemplateId), "known", "cached text");
  CachingGenerator g(inner, cache, true);
  EXPECT_EQ(g.rewrite({"known"}).text, "cached text");
  EXPECT_THROW(g.rewrite({"unknown"}), OfflineCacheMiss);
  EXPECT_THROW(g.translate("unknown", "en", "zh", 0), OfflineCacheMiss);
  EXPECT_EQ(inner->calls, 0);
}

TEST(RetryTest, BackoffDelays) {
  RetryPolicy p;
  EXPECT_EQ(p.delay_for(0), 200ms);
  EXPECT_EQ(p.delay_for(1), 400ms);
  EXPECT_EQ(p.delay_for(2), 800ms);
  EXPECT_EQ(p.delay_for(10), 8000ms);
}

TEST(RetryTest, RetriesTransientThenGivesUp) {
  VirtualClock clock;
  RetryPolicy p;
  int calls = 0;
  auto start = clock.now();
  int v = with_retries(p, clock, [&] {
    if (++calls < 3) throw TransientFailure("busy");
    return 42;
  });
  EXPECT_EQ(v, 42);
  EXPECT_EQ(clock.now() - start, 600ms);

  calls = 0;
  EXPECT_THROW(with_retries(p, clock, [&]() -> int {
    ++calls;
    throw TransientFailure("down");
  }), ServiceError);
  EXPECT_EQ(calls, p.max_retries + 1);

  calls = 0;
  EXPECT_THROW(with_retries(p, clock, [&]() -> int {
    ++calls;
    throw ConfigError("bad");
  }), ConfigError);
  EXPECT_EQ(calls, 1);
}

TEST(RateLimiterTest, AtMostRatePerWindow) {
  VirtualClock clock;
  RateLimiter limiter(3.0, clock);
  std::vector<Clock::time_point> at;
  for (int i = 0; i < 10; ++i) {
    limiter.acquire();
    at.push_back(clock.now());
  }
  for (std::size_t i = 3; i < at.size(); ++i) EXPECT_GE(at[i] - at[i - 3], 1s);
  EXPECT_EQ(at[2], at[0]);
  EXPECT_EQ(at[3] - at[0], 1s);

  RateLimiter slow(0.5, clock);
  auto t0 = clock.now();
  slow.acquire();
  slow.acquire();
  EXPECT_EQ(clock.now() - t0, 2s);
  EXPECT_THROW(RateLimiter(0.0, clock), ConfigError);
}

TEST(InFlightLimiterTest, CapsConcurrency) {
  InFlightLimiter limiter(2);
  std::atomic<int> active{0}, peak{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      limiter.acquire();
      int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {}
      std::this_thread::sleep_for(5ms);
      --active;
      limiter.release();
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
}

TEST(HttpConfigTest, Validation) {
  HttpGeneratorConfig c{.id = "chat-1", .endpoint = "http://127.0.0.1:1/v1/chat/completions"};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.resolved_auth_env(), "POISONFORGE_KEY_CHAT_1");
  auto bad = c;
  bad.rate_limit = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.max_retries = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.endpoint = "ftp://x";
  EXPECT_THROW(bad.validate(), ConfigError);
  auto url = parse_url("https://api.example.com:8443/a/b");
  EXPECT_EQ(url.scheme_host_port, "https://api.example.com:8443");
  EXPECT_EQ(url.path, "/a/b");
}

class MockServerTest : public ::testing::Test {
 protected:
  HttpGeneratorConfig chat_config(const MockGenerationServer& s) {
    return {.id = "chat", .endpoint = s.base_url() + "/v1/chat/completions", .model = "m",
            .rate_limit = 1000.0};
  }
};

TEST_F(MockServerTest, EchoChatRewrite) {
  MockGenerationServer server;
  server.start();
  HttpGenerator g(chat_config(server));
  auto resp = chat_rewrite(g, "good");
  EXPECT_EQ(resp.text, "[RW]good");
  EXPECT_EQ(resp.model_id, "m");
  EXPECT_TRUE(resp.prompt_tokens.has_value());
  EXPECT_EQ(server.hits(), 1u);
  EXPECT_EQ(g.requests_sent(), 1u);
}

TEST_F(MockServerTest, CacheHitMeansNoNetworkCall) {
  MockGenerationServer server;
  server.start();
  auto http = std::make_shared<HttpGenerator>(chat_config(server));
  CachingGenerator g(http, std::make_shared<GenerationCache>(), false);
  auto a = chat_rewrite(g, "good");
  auto b = chat_rewrite(g, "good");
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(server.hits(), 1u);
}

TEST_F(MockServerTest, RetriesInjectedFailures) {
  MockGenerationServer server({.fail_first = 2});
  server.start();
  VirtualClock clock;
  HttpGenerator g(chat_config(server), clock);
  EXPECT_EQ(chat_rewrite(g, "x").text, "[RW]x");
  EXPECT_EQ(server.hits(), 3u);

  MockGenerationServer down({.fail_first = 100});
  down.start();
  auto cfg = chat_config(down);
  cfg.max_retries = 1;
  HttpGenerator g2(cfg, clock);
  EXPECT_THROW(chat_rewrite(g2, "x"), ServiceError);
  EXPECT_EQ(down.hits(), 2u);
}

TEST_F(MockServerTest, TranslateAndSummarize) {
  MockGenerationServer server({.reverse_translation = true});
  server.start();
  HttpGenerator tr({.id = "tr", .kind = GeneratorKind::translator,
                    .endpoint = server.base_url() + "/translate", .rate_limit = 1000.0});
  EXPECT_EQ(translate(tr, "a b c", "en", "zh").text, "c b a");
  HttpGenerator sum({.id = "sum", .kind = GeneratorKind::summarizer,
                     .endpoint = server.base_url() + "/summarize", .rate_limit = 1000.0});
  EXPECT_EQ(sum.rewrite({"one two three four", std::string(kSummarizeTemplateId)}).text, "one two");
  EXPECT_THROW(tr.rewrite({"x"}), ConfigError);
}

TEST_F(MockServerTest, ParaphraseModeUsesTable) {
  MockGenerationServer server({.chat_mode = MockServerOptions::ChatMode::paraphrase});
  server.start();
  HttpGenerator g(chat_config(server));
  const std::string text = "the colour was not bad";
  EXPECT_EQ(chat_rewrite(g, text).text, mock_paraphrase(text, "default"));
}

TEST_F(MockServerTest, ClientErrorIsNotRetried) {
  MockGenerationServer server;
  server.start();
  Url url = parse_url(server.base_url() + "/translate");
  EXPECT_THROW(post_json(url, {{"nope", 1}}, 5.0), ServiceError);
  EXPECT_EQ(server.hits(), 1u);
  server.stop();
  EXPECT_THROW(post_json(url, {{"text", "x"}}, 1.0), TransientFailure);
}

TEST(RegistryTest, LookupAndErrors) {
  GeneratorRegistry reg;
  EXPECT_TRUE(reg.empty());
  EXPECT_THROW(reg.get("x"), ConfigError);
  reg.add(std::make_shared<MockParaphraser>("p"));
  EXPECT_TRUE(reg.contains("p"));
  EXPECT_EQ(reg.get("p").id(), "p");
  EXPECT_THROW(MockParaphraser("q", "missing-table"), ConfigError);
}

}  // namespace
}  // namespace poisonforge
