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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisonforge/corpus.hpp"
#include "poisonforge/quality.hpp"
#include "poisonforge/trigger.hpp"

namespace poisonforge {

struct PoisonPlan {
  std::string target_label;
  /// Fraction of victim-class (non-target) train examples to poison.
  double victim_class_ratio = 0.30;
  TriggerSpec trigger;
  /// nullopt disables the quality filter.
  std::optional<QualityThresholds> quality;
  std::uint64_t seed = 0;

  /// Throws ConfigError; `labels` is the corpus label set.
  void validate(std::span<const std::string> labels) const;
};

nlohmann::ordered_json to_json(const TriggerSpec& spec);
nlohmann::ordered_json to_json(const QualityThresholds& thresholds);
nlohmann::ordered_json to_json(const PoisonPlan& plan);

enum class PoisonAction { poisoned, skipped_quality, skipped_generator, untouched };
std::string_view to_string(PoisonAction action);

struct ManifestEntry {
  std::string id;
  PoisonAction action = PoisonAction::untouched;
  std::string original_label;
  std::string new_label;
  std::string trigger;
  std::optional<double> ppl;
  std::optional<std::size_t> max_ngram_count;
  std::vector<RejectReason> reasons;
  std::optional<std::string> error;
};

struct ManifestCounts {
  std::size_t poisoned = 0;
  std::size_t skipped_quality = 0;
  std::size_t skipped_generator = 0;
  std::size_t untouched = 0;

  std::size_t skipped() const { return skipped_quality + skipped_generator; }
  friend bool operator==(const ManifestCounts&, const ManifestCounts&) = default;
};

struct PoisonManifest {
  /// Sorted by example id.
  std::vector<ManifestEntry> entries;
  ManifestCounts counts;
  std::size_t victim_candidates = 0;
  std::size_t selected = 0;
  std::optional<double> ppl_ceiling;
  nlohmann::ordered_json plan;
  /// Caller-supplied provenance (resolved run config, seeds).
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  /// Recounts entries; throws InvariantError if they disagree with counts or
  /// any poisoned entry breaks the label-flip rule.
  void check(std::string_view target_label) const;
};

/// Entry lines followed by one {"summary": ...} line.
std::string to_jsonl(const PoisonManifest& manifest);

struct MalignantDataset {
  /// Poisoned replacements and untouched examples, in benign train order.
  std::vector<LabeledExample> train;
};

/// Per-example timing from trigger application; kept out of the manifest so
/// manifests stay byte-identical across runs.
struct PoisonTiming {
  std::vector<double> latency_ms;
  std::size_t cache_hits = 0;
};

struct PoisonServices {
  const GeneratorRegistry* generators = nullptr;
  /// Required when the plan enables the quality filter.
  const PerplexityScorer* scorer = nullptr;
  /// Resolved perplexity ceiling; when empty it is derived from the benign
  /// train split with the plan's thresholds.
  std::optional<double> ppl_ceiling;
  int workers = 1;
};

/// floor(ratio * |{y != target}|) ids drawn uniformly without replacement,
/// returned in train order.
std::vector<std::string> select_victim_indices(std::span<const LabeledExample> train,
                                               std::span<const std::string> labels,
                                               const std::string& target_label, double ratio,
                                               std::uint64_t seed);

/// Number of victims selected for a candidate pool of size n.
std::size_t victim_count(double ratio, std::size_t candidates);

struct PoisonResult {
  MalignantDataset dataset;
  PoisonManifest manifest;
  PoisonTiming timing;
};

PoisonResult build_poisoned_train(const Corpus& corpus, const PoisonPlan& plan,
                                  const PoisonServices& services);

struct PoisonedTestRecord {
  std::string id;
  std::string text;
  std::string original_label;
  std::string target_label;
};

struct PoisonedTestSet {
  std::vector<PoisonedTestRecord> records;
  /// Non-target examples whose trigger could not be generated.
  std::vector<std::string> skipped_ids;
};

/// Triggers every non-target test example; no quality filter, no label flip.
PoisonedTestSet build_poisoned_test(std::span<const LabeledExample> test,
                                    const std::string& target_label, const TriggerSpec& trigger,
                                    std::uint64_t seed, const GeneratorRegistry* generators,
                                    int workers = 1);

/// {"id","text","label","target"} per line; `label` is the original label.
std::string to_jsonl(const PoisonedTestSet& set);

}  // namespace poisonforge
