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
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace poisonforge {

/// Local stand-in for the black-box services, bound to 127.0.0.1 on an
/// ephemeral port.
///
///   POST /v1/chat/completions  {model, messages} -> {choices:[{message:{content}}]}
///   POST /translate            {text, source, target} -> {text}
///   POST /summarize            {text} -> {text}
///   POST /score                {text} -> {ppl}
///   POST /check                {text} -> {matches:[{rule}]}
///   POST /embed                {text} -> {embedding:[...]}
///
/// Every request increments hits(), including injected failures.
struct MockServerOptions {
  enum class ChatMode { echo_tag, paraphrase };
  ChatMode chat_mode = ChatMode::echo_tag;
  /// Prefix used by echo_tag: reply = tag + paragraph.
  std::string echo_tag = "[RW]";
  std::string table_id = "default";
  bool reverse_translation = false;
  /// The first N requests get HTTP 503.
  int fail_first = 0;
};

class MockGenerationServer {
 public:
  explicit MockGenerationServer(MockServerOptions options = {});
  ~MockGenerationServer();
  MockGenerationServer(const MockGenerationServer&) = delete;
  MockGenerationServer& operator=(const MockGenerationServer&) = delete;

  /// Binds and starts serving on a background thread.
  void start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t hits() const { return hits_.load(); }

 private:
  void install_routes();
  bool take_failure();

  MockServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<std::size_t> hits_{0};
  std::atomic<int> failures_left_{0};
};

}  // namespace poisonforge
