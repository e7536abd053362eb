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

// Serves the mock generation endpoints until interrupted; handy for trying
// HTTP generator configs without a real service.
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "poisonforge/mock_server.hpp"

namespace {
volatile std::sig_atomic_t stop_requested = 0;
void on_signal(int) { stop_requested = 1; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock generation server", "poisonforge-mock-server"};
  int port = 0;
  std::string mode = "paraphrase";
  std::string table = "default";
  bool reverse = false;
  app.add_option("--port", port, "Port to bind (0 = ephemeral)");
  app.add_option("--chat-mode", mode, "paraphrase or echo")->check(CLI::IsMember({"paraphrase", "echo"}));
  app.add_option("--table", table, "Substitution table for paraphrase mode");
  app.add_flag("--reverse-translation", reverse, "Translate by reversing word order");
  CLI11_PARSE(app, argc, argv);

  poisonforge::MockServerOptions options;
  options.chat_mode = mode == "echo" ? poisonforge::MockServerOptions::ChatMode::echo_tag
                                     : poisonforge::MockServerOptions::ChatMode::paraphrase;
  options.table_id = table;
  options.reverse_translation = reverse;
  poisonforge::MockGenerationServer server(options);
  server.start(port);
  std::cout << server.base_url() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cout << "served " << server.hits() << " requests" << std::endl;
  return 0;
}
