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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "poisonforge/corpus.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/poisoner.hpp"
#include "poisonforge/synthetic.hpp"
#include "poisonforge/victim.hpp"

namespace poisonforge {

/// Parses the TOML subset used by run configs into JSON:
/// `[table]`, `[a.b]`, `[[array]]`, dotted keys, basic and literal strings,
/// integers, floats, booleans, (multi-line) arrays of those, `#` comments.
/// `${NAME}` inside basic (double-quoted) strings is replaced by the environment variable NAME;
/// an unset variable is a ConfigError.
nlohmann::json parse_toml(std::string_view content);

/// Lookup used for interpolation; swappable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
nlohmann::json parse_toml(std::string_view content, const EnvLookup& env);

struct CorpusSource {
  /// Single file holding all splits (records may carry "split").
  std::optional<std::filesystem::path> path;
  /// One file per split.
  std::map<Split, std::filesystem::path> files;
  std::optional<CorpusFormat> format;
  /// Generated topic corpus instead of files.
  std::optional<SyntheticCorpusSpec> synthetic;
  /// Optional per-split subsample sizes.
  std::map<Split, std::size_t> subsample;
  std::string name = "corpus";
};

/// A generator entry: an HTTP service or a local mock. Mock specs are
/// "paraphrase:<table id>", "translate:identity", "translate:reverse",
/// "fail".
struct GeneratorConfig {
  std::string id;
  std::optional<HttpGeneratorConfig> http;
  std::string mock;
};

struct EvalOptions {
  /// Templates of the malignant train set keyed by train id.
  std::optional<std::filesystem::path> annotations;
  /// Templates of dev examples; defaults to `annotations`.
  std::optional<std::filesystem::path> reference_annotations;
  std::size_t syntax_top_k = 10;
  bool syntax_by_label = false;
  std::size_t validation_samples = 1000;
  std::optional<std::string> grammar_checker;
  std::optional<std::string> embedder;
  /// External perplexity endpoint; the local bigram LM otherwise.
  std::optional<std::string> scorer;
  double lm_smoothing = 1.0;
  bool stealth = true;
};

struct RunConfig {
  CorpusSource corpus;
  PoisonPlan plan;
  /// RareWords k resolved from the train length when true.
  bool rare_k_auto = false;
  TrainConfig victim;
  std::optional<TrainConfig> cft;
  std::vector<GeneratorConfig> generators;
  EvalOptions eval;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> cache;
  std::uint64_t seed = 0;
  int workers = 1;
  bool offline = false;

  /// Cross-field checks (generator ids resolve, offline constraints).
  void validate() const;
};

struct SweepConfig {
  std::vector<double> ratios;
  std::size_t repeats = 1;
  RunConfig base;

  void validate() const;
};

/// Builds a RunConfig from parsed TOML. Relative paths are resolved against
/// `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir = {});
/// Requires a [sweep] table.
SweepConfig sweep_config_from_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; a missing file is an InputError.
nlohmann::json load_config_document(const std::filesystem::path& path);

/// Seeds of the individual stages, all derived from the master seed.
struct StageSeeds {
  std::uint64_t master = 0;
  std::uint64_t poison = 0;
  std::uint64_t victim = 0;
  std::uint64_t cft = 0;
  std::uint64_t corpus = 0;
};
StageSeeds stage_seeds(std::uint64_t master);

/// Sets the master seed and the derived plan/victim/cft seeds.
void apply_seed(RunConfig& config, std::uint64_t seed);

/// Fully resolved config (defaults filled in, secrets never included).
nlohmann::ordered_json to_json(const RunConfig& config);
nlohmann::ordered_json to_json(const SweepConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);

}  // namespace poisonforge
