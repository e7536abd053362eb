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

#include <cctype>
#include <cstdlib>

#include <httplib.h>

#include "poisonforge/error.hpp"
#include "poisonforge/genclient.hpp"

namespace poisonforge {

using json = nlohmann::json;

void HttpGeneratorConfig::validate() const {
  if (id.empty()) throw ConfigError("generator id must be non-empty");
  if (!(rate_limit > 0.0)) throw ConfigError("generator '" + id + "': rate_limit must be > 0");
  if (max_retries < 0) throw ConfigError("generator '" + id + "': max_retries must be >= 0");
  if (!(timeout_s > 0.0)) throw ConfigError("generator '" + id + "': timeout must be > 0");
  if (endpoint.empty()) throw ConfigError("generator '" + id + "': endpoint is required");
  if (kind == GeneratorKind::mock) throw ConfigError("generator '" + id + "': mock is not HTTP");
  parse_url(endpoint);
}

std::string HttpGeneratorConfig::resolved_auth_env() const {
  if (!auth_env.empty()) return auth_env;
  std::string name = "POISONFORGE_KEY_";
  for (char c : id)
    name += std::isalnum(static_cast<unsigned char>(c))
                ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                : '_';
  return name;
}

Url parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw ConfigError("endpoint '" + std::string(url) + "' is not an absolute URL");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("endpoint '" + std::string(url) + "' must use http or https");
  auto path_start = url.find('/', scheme_end + 3);
  Url out;
  if (path_start == std::string_view::npos) {
    out.scheme_host_port = std::string(url);
    out.path = "/";
  } else {
    out.scheme_host_port = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  if (out.scheme_host_port.size() <= scheme_end + 3)
    throw ConfigError("endpoint '" + std::string(url) + "' has no host");
  return out;
}

json post_json(const Url& url, const json& body, double timeout_s, const std::string& bearer) {
  httplib::Client client(url.scheme_host_port);
  auto secs = static_cast<time_t>(timeout_s);
  auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res)
    throw TransientFailure("request to " + url.scheme_host_port + url.path +
                           " failed: " + httplib::to_string(res.error()));
  int status = res->status;
  if (status == 408 || status == 429 || status >= 500)
    throw TransientFailure("HTTP " + std::to_string(status) + " from " + url.scheme_host_port +
                           url.path);
  if (status < 200 || status >= 300)
    throw ServiceError("HTTP " + std::to_string(status) + " from " + url.scheme_host_port +
                       url.path + ": " + res->body.substr(0, 200));
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw ServiceError("malformed JSON from " + url.scheme_host_port + url.path + ": " + e.what());
  }
}

HttpGenerator::HttpGenerator(HttpGeneratorConfig config, Clock& clock, RetryPolicy retry)
    : config_(std::move(config)),
      url_(parse_url(config_.endpoint)),
      clock_(clock),
      retry_(retry),
      limiter_(config_.rate_limit, clock),
      in_flight_(config_.max_in_flight) {
  config_.validate();
  retry_.max_retries = config_.max_retries;
}

json HttpGenerator::post(const json& body) {
  std::string token;
  if (const char* v = std::getenv(config_.resolved_auth_env().c_str())) token = v;
  return with_retries(retry_, clock_, [&] {
    limiter_.acquire();
    in_flight_.acquire();
    ++requests_;
    try {
      auto reply = post_json(url_, body, config_.timeout_s, token);
      in_flight_.release();
      return reply;
    } catch (...) {
      in_flight_.release();
      throw;
    }
  });
}

namespace {
std::optional<std::int64_t> optional_int(const json& obj, const char* key) {
  if (obj.is_object() && obj.contains(key) && obj[key].is_number_integer())
    return obj[key].get<std::int64_t>();
  return std::nullopt;
}
}  // namespace

RewriteResponse HttpGenerator::rewrite(const RewriteRequest& request) {
  auto start = std::chrono::steady_clock::now();
  RewriteResponse resp;
  if (config_.kind == GeneratorKind::chat_rewrite) {
    auto reply = post(build_chat_request(config_.model, request.text, config_.params));
    try {
      resp.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw ServiceError("chat reply from '" + config_.id + "' lacks choices[0].message.content");
    }
    resp.model_id = reply.value("model", config_.model);
    if (reply.contains("usage")) {
      resp.prompt_tokens = optional_int(reply["usage"], "prompt_tokens");
      resp.completion_tokens = optional_int(reply["usage"], "completion_tokens");
    }
  } else if (config_.kind == GeneratorKind::summarizer) {
    json body = {{"text", request.text}};
    if (!config_.model.empty()) body["model"] = config_.model;
    auto reply = post(body);
    if (!reply.contains("text") || !reply["text"].is_string())
      throw ServiceError("summarizer reply from '" + config_.id + "' lacks 'text'");
    resp.text = reply["text"].get<std::string>();
    resp.model_id = reply.value("model", config_.model);
  } else {
    throw ConfigError("generator '" + config_.id + "' is a translator and cannot rewrite");
  }
  if (resp.text.empty()) throw ServiceError("empty completion from '" + config_.id + "'");
  resp.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

RewriteResponse HttpGenerator::translate(std::string_view text, std::string_view source,
                                         std::string_view target, int) {
  if (config_.kind != GeneratorKind::translator)
    throw ConfigError("generator '" + config_.id + "' is not a translator");
  auto start = std::chrono::steady_clock::now();
  json body = {{"text", text}, {"source", source}, {"target", target}};
  auto reply = post(body);
  if (!reply.contains("text") || !reply["text"].is_string())
    throw ServiceError("translate reply from '" + config_.id + "' lacks 'text'");
  RewriteResponse resp;
  resp.text = reply["text"].get<std::string>();
  resp.model_id = reply.value("model", config_.model);
  if (resp.text.empty()) throw ServiceError("empty translation from '" + config_.id + "'");
  resp.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

}  // namespace poisonforge
