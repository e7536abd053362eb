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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "poisonforge/config.hpp"
#include "poisonforge/error.hpp"
#include "poisonforge/pipeline.hpp"

namespace poisonforge {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool offline = false;
};

void write_error(std::ostream& err, const std::string& kind, int code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"exit_code", code}, {"message", message}};
  err << j.dump() << "\n";
}

nlohmann::json load_document(const GlobalFlags& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  return load_config_document(g.config);
}

void apply_overrides(RunConfig& cfg, const GlobalFlags& g) {
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.seed) apply_seed(cfg, *g.seed);
  if (g.workers) {
    if (*g.workers < 0) throw ConfigError("--workers must be >= 0");
    cfg.workers = *g.workers;
  }
  if (g.offline) cfg.offline = true;
  cfg.validate();
}

RunConfig load_run(const GlobalFlags& g) {
  auto doc = load_document(g);
  RunConfig cfg = run_config_from_json(doc, fs::path(g.config).parent_path());
  apply_overrides(cfg, g);
  return cfg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Textual backdoor poisoning toolkit", "poisonforge"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "Run configuration (TOML)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads, 0 = all cores");
  app.add_flag("--offline", g.offline, "No network: mocks and the generation cache only");

  auto* ingest = app.add_subcommand("ingest", "Load a corpus and write its canonical JSONL and statistics");
  auto* poison = app.add_subcommand("poison", "Build the malignant train set, manifest and poisoned test set");
  auto* run = app.add_subcommand("run", "Poison, train victims, evaluate ASR/CACC and stealth");
  auto* sweep = app.add_subcommand("sweep", "Poison-ratio sweep from the [sweep] table");
  auto* stealth = app.add_subcommand("stealth", "Stealth metrics of the poisoned train examples");
  auto* report = app.add_subcommand("report", "ASR/CACC from prediction files");
  for (auto* sub : {ingest, poison, run, sweep, stealth, report}) sub->fallthrough();

  ReportInputs rin;
  std::string clean, triggered, baseline, target, labels;
  report->add_option("--clean", clean, "Predictions on the clean test set")->required();
  report->add_option("--triggered", triggered, "Predictions on the poisoned test set");
  report->add_option("--baseline", baseline, "Benign-model predictions on the clean test set");
  report->add_option("--target", target, "Target label (default: from the records)");
  report->add_option("--labels", labels, "Comma-separated label set to validate against");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    write_error(err, "config", 2, e.what());
    return 2;
  }

  try {
    if (*ingest) {
      auto o = cmd_ingest(load_run(g));
      out << o.summary << "\n";
    } else if (*poison) {
      auto o = cmd_poison(load_run(g));
      out << o.summary << "\n";
    } else if (*run) {
      auto o = cmd_run(load_run(g));
      out << o.table;
    } else if (*stealth) {
      auto o = cmd_stealth(load_run(g));
      if (o.report) out << to_json(*o.report).dump(2) << "\n";
      else out << "stealth: " << o.error.value_or("not computed") << "\n";
    } else if (*sweep) {
      auto doc = load_document(g);
      SweepConfig s = sweep_config_from_json(doc, fs::path(g.config).parent_path());
      apply_overrides(s.base, g);
      auto o = cmd_sweep(s);
      out << o.csv;
      std::size_t failed = 0;
      for (const auto& row : o.rows) failed += row.failed;
      if (failed) err << failed << " sweep cell(s) failed; see sweep.json\n";
    } else if (*report) {
      rin.clean = clean;
      if (!triggered.empty()) rin.triggered = triggered;
      if (!baseline.empty()) rin.baseline = baseline;
      if (!target.empty()) rin.target = target;
      std::stringstream ss(labels);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) rin.labels.push_back(item);
      auto j = cmd_report(rin);
      out << j.dump(2) << "\n";
      if (!g.out.empty()) {
        fs::create_directories(g.out);
        std::ofstream f(fs::path(g.out) / "report_from_predictions.json");
        f << j.dump(2) << "\n";
      }
    }
  } catch (const Error& e) {
    write_error(err, to_string(e.kind()), exit_code(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    write_error(err, "invariant", 4, std::string("unexpected failure: ") + e.what());
    return 4;
  }
  return 0;
}

}  // namespace poisonforge
