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

#include "poisonforge/mock_server.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "poisonforge/error.hpp"
#include "poisonforge/eval.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/substitution.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

using json = nlohmann::json;

MockGenerationServer::MockGenerationServer(MockServerOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  failures_left_ = options_.fail_first;
  install_routes();
}

MockGenerationServer::~MockGenerationServer() { stop(); }

bool MockGenerationServer::take_failure() {
  int left = failures_left_.load();
  while (left > 0) {
    if (failures_left_.compare_exchange_weak(left, left - 1)) return true;
  }
  return false;
}

void MockGenerationServer::install_routes() {
  // Wraps a JSON handler with hit counting, failure injection and 400s.
  auto route = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      if (take_failure()) {
        res.status = 503;
        res.set_content(R"({"error":"injected failure"})", "application/json");
        return;
      }
      try {
        json body = json::parse(req.body);
        json reply = handler(body);
        res.set_content(reply.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };

  server_->Post("/v1/chat/completions", route([this](const json& body) {
    const auto& messages = body.at("messages");
    std::string user;
    for (const auto& m : messages)
      if (m.at("role") == "user") user = m.at("content").get<std::string>();
    std::string paragraph = extract_rewrite_paragraph(user).value_or(user);
    std::string content = options_.chat_mode == MockServerOptions::ChatMode::echo_tag
                              ? options_.echo_tag + paragraph
                              : mock_paraphrase(paragraph, options_.table_id);
    return json{{"model", body.value("model", "mock-chat")},
                {"choices", json::array({{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", content}}},
                                          {"finish_reason", "stop"}}})},
                {"usage",
                 {{"prompt_tokens", whitespace_tokens(user).size()},
                  {"completion_tokens", whitespace_tokens(content).size()}}}};
  }));

  server_->Post("/translate", route([this](const json& body) {
    std::string text = body.at("text").get<std::string>();
    body.at("source").get<std::string>();
    body.at("target").get<std::string>();
    if (options_.reverse_translation) {
      auto tokens = whitespace_tokens(text);
      std::reverse(tokens.begin(), tokens.end());
      text = join(tokens, " ");
    }
    return json{{"text", text}, {"model", "mock-translate"}};
  }));

  server_->Post("/summarize", route([](const json& body) {
    auto text = body.at("text").get<std::string>();
    auto tokens = whitespace_tokens(text);
    tokens.resize((tokens.size() + 1) / 2);
    return json{{"text", join(tokens, " ")}, {"model", "mock-summarize"}};
  }));

  server_->Post("/score", route([](const json& body) {
    auto text = body.at("text").get<std::string>();
    // Deterministic pseudo-perplexity: grows with length and rare-looking tokens.
    double ppl = 10.0;
    for (auto tok : whitespace_tokens(text)) ppl += tok.size() <= 2 ? 25.0 : 3.0;
    return json{{"ppl", ppl}};
  }));

  server_->Post("/check", route([](const json& body) {
    auto text = body.at("text").get<std::string>();
    json matches = json::array();
    for (const auto& rule : heuristic_grammar_matches(text)) matches.push_back({{"rule", rule}});
    return json{{"matches", matches}};
  }));

  server_->Post("/embed", route([](const json& body) {
    auto text = body.at("text").get<std::string>();
    std::vector<double> v(64, 0.0);
    for (auto tok : whitespace_tokens(text)) v[fnv1a64(to_lower(tok)) % 64] += 1.0;
    return json{{"embedding", v}};
  }));
}

void MockGenerationServer::start(int port) {
  if (thread_.joinable()) return;
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ < 0) throw ServiceError("mock server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockGenerationServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string MockGenerationServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

}  // namespace poisonforge
