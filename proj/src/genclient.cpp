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

#include "poisonforge/genclient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "poisonforge/error.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/substitution.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

using json = nlohmann::json;

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::chat_rewrite: return "chat_rewrite";
    case GeneratorKind::translator: return "translator";
    case GeneratorKind::summarizer: return "summarizer";
    case GeneratorKind::mock: return "mock";
  }
  return "mock";
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "chat_rewrite" || name == "chat") return GeneratorKind::chat_rewrite;
  if (name == "translator") return GeneratorKind::translator;
  if (name == "summarizer") return GeneratorKind::summarizer;
  if (name == "mock") return GeneratorKind::mock;
  throw ConfigError("unknown generator kind '" + std::string(name) + "'");
}

namespace {
constexpr std::string_view kPromptHead = "Rewrite the paragraph: ";
constexpr std::string_view kPromptTail =
    " without altering its original sentiment meaning. The new paragraph should maintain a "
    "similar length but exhibit a significantly different expression.";
}  // namespace

std::string build_rewrite_prompt(std::string_view text) {
  std::string prompt(kPromptHead);
  prompt += text;
  prompt += kPromptTail;
  return prompt;
}

std::optional<std::string> extract_rewrite_paragraph(std::string_view prompt) {
  if (!prompt.starts_with(kPromptHead) || !prompt.ends_with(kPromptTail)) return std::nullopt;
  if (prompt.size() < kPromptHead.size() + kPromptTail.size()) return std::nullopt;
  return std::string(
      prompt.substr(kPromptHead.size(), prompt.size() - kPromptHead.size() - kPromptTail.size()));
}

json build_chat_request(std::string_view model, std::string_view text, const json& params) {
  json body = json::object();
  body["model"] = model;
  body["messages"] = json::array({
      {{"role", "system"}, {"content", kChatSystemPrompt}},
      {{"role", "user"}, {"content", build_rewrite_prompt(text)}},
  });
  for (const auto& [k, v] : params.items())
    if (k != "model" && k != "messages") body[k] = v;
  return body;
}

RewriteResponse Generator::rewrite(const RewriteRequest&) {
  throw ConfigError("generator '" + id() + "' does not support rewriting");
}

RewriteResponse Generator::translate(std::string_view, std::string_view, std::string_view, int) {
  throw ConfigError("generator '" + id() + "' does not support translation");
}

RewriteResponse chat_rewrite(Generator& client, std::string_view text, int attempt) {
  if (client.kind() != GeneratorKind::chat_rewrite && client.kind() != GeneratorKind::mock)
    throw ConfigError("generator '" + client.id() + "' is a " +
                      std::string(to_string(client.kind())) + ", not a chat_rewrite client");
  RewriteRequest req{std::string(text), std::string(kRewriteTemplateId), attempt};
  auto resp = client.rewrite(req);
  if (trim(resp.text).empty()) throw ServiceError("empty completion from '" + client.id() + "'");
  return resp;
}

RewriteResponse translate(Generator& client, std::string_view text, std::string_view source,
                          std::string_view target, int attempt) {
  if (client.kind() != GeneratorKind::translator && client.kind() != GeneratorKind::mock)
    throw ConfigError("generator '" + client.id() + "' is not a translator");
  if (source == target)
    throw ConfigError("translation source and target are both '" + std::string(source) + "'");
  auto resp = client.translate(text, source, target, attempt);
  if (trim(resp.text).empty()) throw ServiceError("empty translation from '" + client.id() + "'");
  return resp;
}

// ---------------------------------------------------------------------------
// GenerationCache

namespace {
std::string cache_material(std::string_view generator_id, std::string_view template_id,
                           std::string_view input) {
  std::string m(generator_id);
  m += '\x1f';
  m += template_id;
  m += '\x1f';
  m += input;
  return m;
}
}  // namespace

std::string GenerationCache::key(std::string_view generator_id, std::string_view template_id,
                                 std::string_view input) {
  auto material = cache_material(generator_id, template_id, input);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(fnv1a64(material)),
                static_cast<unsigned long long>(mix64(fnv1a64(material, 0x84222325cbf29ce4ULL))));
  return buf;
}

GenerationCache::GenerationCache(std::filesystem::path file) : file_(std::move(file)) {
  if (std::filesystem::exists(*file_)) {
    std::ifstream in(*file_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      json obj;
      try {
        obj = json::parse(line);
        Entry e{obj.at("generator").get<std::string>(), obj.at("template").get<std::string>(),
                obj.at("input").get<std::string>(), obj.at("output").get<std::string>()};
        entries_.try_emplace(key(e.generator_id, e.template_id, e.input), std::move(e));
      } catch (const json::exception& ex) {
        throw InputError("generation cache " + file_->string() + " line " +
                         std::to_string(line_no) + ": " + ex.what());
      }
    }
  } else if (file_->has_parent_path()) {
    std::filesystem::create_directories(file_->parent_path());
  }
  out_.open(*file_, std::ios::app | std::ios::binary);
  if (!out_) throw InputError("cannot open generation cache '" + file_->string() + "'");
}

std::optional<std::string> GenerationCache::get(std::string_view generator_id,
                                                std::string_view template_id,
                                                std::string_view input) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key(generator_id, template_id, input));
  if (it == entries_.end()) return std::nullopt;
  const Entry& e = it->second;
  if (e.generator_id != generator_id || e.template_id != template_id || e.input != input)
    return std::nullopt;
  return e.output;
}

bool GenerationCache::put(std::string_view generator_id, std::string_view template_id,
                          std::string_view input, std::string_view output) {
  std::lock_guard lock(mu_);
  auto k = key(generator_id, template_id, input);
  auto [it, inserted] = entries_.try_emplace(
      k, Entry{std::string(generator_id), std::string(template_id), std::string(input),
               std::string(output)});
  if (inserted && out_.is_open()) {
    json obj = {{"key", k},
                {"generator", generator_id},
                {"template", template_id},
                {"input", input},
                {"output", output}};
    out_ << obj.dump() << '\n';
    out_.flush();
  }
  return inserted;
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Clocks and limiters

void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

SteadyClock& steady_clock() {
  static SteadyClock clock;
  return clock;
}

Clock::time_point VirtualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(time_point t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void VirtualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

RateLimiter::RateLimiter(double requests_per_second, Clock& clock) : clock_(clock) {
  if (!(requests_per_second > 0.0)) throw ConfigError("rate_limit must be > 0");
  if (requests_per_second >= 1.0) {
    capacity_ = static_cast<std::size_t>(std::floor(requests_per_second));
    window_ = std::chrono::seconds(1);
  } else {
    capacity_ = 1;
    window_ = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = clock_.now();
    while (!issued_.empty() && issued_.front() + window_ <= now) issued_.pop_front();
    if (issued_.size() < capacity_) {
      issued_.push_back(now);
      return;
    }
    auto wake = issued_.front() + window_;
    lock.unlock();
    clock_.sleep_until(wake);
    lock.lock();
  }
}

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(std::max<std::size_t>(limit, 1)) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry);
  ms = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

// ---------------------------------------------------------------------------
// CachingGenerator

CachingGenerator::CachingGenerator(std::shared_ptr<Generator> inner,
                                   std::shared_ptr<GenerationCache> cache, bool offline)
    : inner_(std::move(inner)), cache_(std::move(cache)), offline_(offline) {
  if (!inner_) throw ConfigError("CachingGenerator needs a generator");
  if (!cache_) cache_ = std::make_shared<GenerationCache>();
}

namespace {
std::string with_attempt(std::string template_id, int attempt) {
  if (attempt > 0) template_id += "#regen" + std::to_string(attempt);
  return template_id;
}
}  // namespace

template <typename F>
RewriteResponse CachingGenerator::cached(const std::string& template_id, std::string_view text,
                                         F&& call) {
  if (auto hit = cache_->get(id(), template_id, text)) {
    RewriteResponse resp;
    resp.text = std::move(*hit);
    resp.model_id = id();
    resp.from_cache = true;
    return resp;
  }
  if (offline_)
    throw OfflineCacheMiss("offline mode: no cached generation from '" + id() + "' for input '" +
                           std::string(text.substr(0, 60)) + "'");
  RewriteResponse resp = call();
  if (!trim(resp.text).empty()) cache_->put(id(), template_id, text, resp.text);
  return resp;
}

RewriteResponse CachingGenerator::rewrite(const RewriteRequest& request) {
  return cached(with_attempt(request.template_id, request.attempt), request.text,
                [&] { return inner_->rewrite(request); });
}

RewriteResponse CachingGenerator::translate(std::string_view text, std::string_view source,
                                            std::string_view target, int attempt) {
  std::string tmpl = "translate:" + std::string(source) + "->" + std::string(target);
  return cached(with_attempt(tmpl, attempt), text,
                [&] { return inner_->translate(text, source, target, attempt); });
}

// ---------------------------------------------------------------------------
// Mocks

MockParaphraser::MockParaphraser(std::string id, std::string table_id)
    : id_(std::move(id)), table_id_(std::move(table_id)) {
  substitution_table(table_id_);  // fail fast on an unknown table
}

RewriteResponse MockParaphraser::rewrite(const RewriteRequest& request) {
  RewriteResponse resp;
  resp.text = mock_paraphrase(request.text, table_id_);
  resp.model_id = "mock-paraphrase:" + table_id_;
  return resp;
}

MockTranslator::MockTranslator(std::string id, MockTranslation mode)
    : id_(std::move(id)), mode_(mode) {}

RewriteResponse MockTranslator::translate(std::string_view text, std::string_view,
                                          std::string_view, int) {
  RewriteResponse resp;
  if (mode_ == MockTranslation::identity) {
    resp.text = std::string(text);
    resp.model_id = "mock-translate:identity";
  } else {
    auto tokens = whitespace_tokens(text);
    std::reverse(tokens.begin(), tokens.end());
    resp.text = join(tokens, " ");
    resp.model_id = "mock-translate:reverse";
  }
  return resp;
}

RewriteResponse FailingGenerator::rewrite(const RewriteRequest&) {
  ++calls_;
  throw ServiceError("generator '" + id_ + "' always fails");
}

RewriteResponse FailingGenerator::translate(std::string_view, std::string_view, std::string_view,
                                            int) {
  ++calls_;
  throw ServiceError("generator '" + id_ + "' always fails");
}

void GeneratorRegistry::add(std::shared_ptr<Generator> generator) {
  if (!generator) throw ConfigError("null generator");
  auto id = generator->id();
  if (!generators_.emplace(id, std::move(generator)).second)
    throw ConfigError("duplicate generator id '" + id + "'");
}

Generator& GeneratorRegistry::get(std::string_view id) const {
  auto it = generators_.find(id);
  if (it == generators_.end()) {
    if (generators_.empty())
      throw ConfigError("no generators configured; '" + std::string(id) + "' is unavailable");
    throw ConfigError("unknown generator '" + std::string(id) + "'");
  }
  return *it->second;
}

bool GeneratorRegistry::contains(std::string_view id) const {
  return generators_.find(id) != generators_.end();
}

}  // namespace poisonforge
