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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisonforge/config.hpp"
#include "poisonforge/corpus.hpp"
#include "poisonforge/eval.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/poisoner.hpp"
#include "poisonforge/quality.hpp"
#include "poisonforge/victim.hpp"

namespace poisonforge {

/// Loads (or generates) the configured corpus and applies subsampling.
Corpus load_run_corpus(const RunConfig& config);

/// Fills in values that depend on the corpus (RareWords k = "auto").
RunConfig resolve_for_corpus(RunConfig config, const Corpus& corpus);

/// Generators and scorers shared by every stage of a run.
struct RunServices {
  std::shared_ptr<GenerationCache> cache;
  GeneratorRegistry generators;
  /// HTTP generators, for request accounting.
  std::vector<std::shared_ptr<HttpGenerator>> http;
  /// Perplexity scorer for the quality filter and the stealth report.
  std::shared_ptr<PerplexityScorer> scorer;
};

/// Mocks are registered as-is; HTTP generators sit behind the cache (and
/// never touch the network in offline mode).
RunServices build_services(const RunConfig& config, const Corpus& corpus);

/// Provenance block embedded in every artifact: the resolved config and
/// stage seeds. Execution-only settings (output, workers, offline, cache)
/// are left out so reruns in another mode compare byte for byte.
nlohmann::ordered_json provenance(const RunConfig& config);

struct PoisonStage {
  PoisonResult train;
  std::optional<PoisonedTestSet> test;
};

PoisonStage run_poison_stage(const RunConfig& config, const Corpus& corpus,
                             const RunServices& services);

struct IngestOutcome {
  CorpusStats stats;
  std::string summary;
};
/// Writes corpus.jsonl (canonical form) and corpus_stats.json.
IngestOutcome cmd_ingest(const RunConfig& config);

struct PoisonOutcome {
  ManifestCounts counts;
  std::size_t dataset_size = 0;
  std::string summary;
};
/// "poisoned 150 of 1000 train examples (15.0% of dataset); skipped 0 ..."
std::string poison_summary_line(const ManifestCounts& counts, std::size_t dataset_size);
/// Writes malignant_train.jsonl, manifest.jsonl, poisoned_test.jsonl (when
/// a test split exists) and poison_summary.json.
PoisonOutcome cmd_poison(const RunConfig& config);

struct RunOutcome {
  AttackReport immediate;
  std::optional<AttackReport> after_cft;
  std::optional<StealthReport> stealth;
  nlohmann::ordered_json report;
  /// Human-readable summary table.
  std::string table;
};

/// Everything cmd_run does except writing files; shared with the sweep.
struct AttackRun {
  AttackReport immediate;
  std::optional<AttackReport> after_cft;
  PoisonStage poison;
  std::vector<PredictionRecord> baseline_clean;
  std::vector<PredictionRecord> poisoned_clean;
  std::vector<PredictionRecord> poisoned_triggered;
  std::vector<PredictionRecord> cft_clean;
  std::vector<PredictionRecord> cft_triggered;
  std::optional<VictimModel> poisoned_model;
};
/// Needs a test split. The corpus and services are borrowed.
AttackRun execute_attack(const RunConfig& config, const Corpus& corpus, const RunServices& services);

/// Trains the benign baseline and the poisoned victim, evaluates CACC and
/// ASR (immediate and, with [cft], after continued fine-tuning on the
/// benign train split), computes the stealth report and writes report.json,
/// timing.json and prediction files under output/.
RunOutcome cmd_run(const RunConfig& config);

/// Stealth metrics over (benign, poisoned) pairs of the poisoned train
/// entries; syntax cross-entropy when annotations are configured.
struct StealthOutcome {
  std::optional<StealthReport> report;
  std::map<std::string, double> syntax_ce_by_label;
  std::optional<std::string> error;
};
StealthOutcome compute_stealth(const RunConfig& config, const Corpus& corpus,
                               const RunServices& services, const PoisonResult& poisoned);
/// Writes stealth.json.
StealthOutcome cmd_stealth(const RunConfig& config);

struct SweepCell {
  std::size_t ratio_index = 0;
  double ratio = 0.0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::optional<double> asr;
  std::optional<double> cacc;
  std::optional<double> cacc_benign_baseline;
  std::size_t poisoned = 0;
  std::optional<std::string> error;
};

struct SweepRow {
  double ratio = 0.0;
  std::optional<double> mean_asr;
  std::optional<double> mean_cacc;
  std::size_t completed = 0;
  std::size_t failed = 0;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
  std::string csv;
  nlohmann::ordered_json json;
};

/// Cell seed = derive_seed(base seed, ratio index, repeat index).
std::uint64_t sweep_cell_seed(std::uint64_t base_seed, std::size_t ratio_index, std::size_t repeat);

/// One run per (ratio, repeat); failures are recorded per cell. With
/// write_files, sweep.csv, sweep_cells.csv and sweep.json go to output/.
SweepOutcome cmd_sweep(const SweepConfig& config, bool write_files = true);

struct ReportInputs {
  std::filesystem::path clean;
  std::optional<std::filesystem::path> triggered;
  std::optional<std::filesystem::path> baseline;
  std::optional<std::string> target;
  std::vector<std::string> labels;
};
/// Recomputes ASR/CACC from prediction files.
nlohmann::ordered_json cmd_report(const ReportInputs& inputs);

}  // namespace poisonforge
