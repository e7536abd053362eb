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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "poisonforge/quality.hpp"
#include "poisonforge/victim.hpp"

namespace poisonforge {

struct PredictionRecord {
  std::string id;
  std::string predicted;
  std::string truth;
  /// Attack target; present on poisoned-test records only.
  std::optional<std::string> target;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// #{predicted == target} / n. Throws InputError on an empty set or a record
/// whose target differs from `target`.
double attack_success_rate(std::span<const PredictionRecord> records, std::string_view target);

/// #{predicted == truth} / n. Throws InputError on an empty set.
double clean_accuracy(std::span<const PredictionRecord> records);

enum class Scenario { immediate, after_cft };
std::string_view to_string(Scenario scenario);

struct AttackReport {
  double asr = 0.0;
  double cacc = 0.0;
  double cacc_benign_baseline = 0.0;
  std::size_t n_poisoned_test = 0;
  Scenario scenario = Scenario::immediate;
};

nlohmann::ordered_json to_json(const AttackReport& report);

/// Prediction JSONL: {"id","predicted","true","target"?} per line.
std::string predictions_to_jsonl(std::span<const PredictionRecord> records);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
/// Validates the schema; with a label set, every label must belong to it.
/// Errors name the line number (and the offending label).
std::vector<PredictionRecord> parse_predictions(std::string_view content,
                                                std::span<const std::string> labels = {});
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               std::span<const std::string> labels = {});

// ---------------------------------------------------------------------------
// Syntax-template distributions

inline constexpr std::string_view kOtherTemplate = "OTHER";

struct SyntaxDistribution {
  std::map<std::string, double> probs;
  std::size_t sample_size = 0;
  /// Smoothing mass added to each template of the union universe when this
  /// distribution is the reference side of a cross-entropy.
  double epsilon = 0.0;
};

/// Frequencies over the ids' templates, restricted to the top_k most
/// frequent (ties broken by template string) with the rest pooled as OTHER.
/// epsilon defaults to 1 / (10 * sample size).
SyntaxDistribution build_syntax_distribution(
    const std::unordered_map<std::string, std::string>& annotations,
    std::span<const std::string> ids, std::size_t top_k = 10,
    std::optional<double> epsilon = std::nullopt);

/// -sum p ln q over aligned vectors. q must be > 0 wherever p > 0.
double cross_entropy(std::span<const double> p, std::span<const double> q);
double entropy(std::span<const double> p);

/// H(p, q_eps): both are aligned on the union of templates, the reference q
/// gets q.epsilon added per template and is renormalized. Natural log.
double syntax_cross_entropy(const SyntaxDistribution& poisoned,
                            const SyntaxDistribution& benign_reference);

/// Per-label variant: poisoned-train and reference examples are grouped by
/// label and a cross-entropy is computed for each label present in both.
std::map<std::string, double> syntax_cross_entropy_by_label(
    const std::unordered_map<std::string, std::string>& annotations,
    std::span<const LabeledExample> poisoned, std::span<const LabeledExample> reference,
    std::size_t top_k = 10);

/// Annotations JSONL: {"id","template"} per line.
std::unordered_map<std::string, std::string> load_annotations(const std::filesystem::path& path);

/// min(1000, |dev|) ids drawn without replacement.
std::vector<std::string> sample_validation_ids(std::span<const LabeledExample> dev,
                                               std::uint64_t seed, std::size_t limit = 1000);

// ---------------------------------------------------------------------------
// Grammar and similarity

/// Heuristic rule hits: duplicated adjacent word, lowercase sentence start,
/// unbalanced double quotes, unbalanced brackets.
std::vector<std::string> heuristic_grammar_matches(std::string_view text);

class GrammarChecker {
 public:
  virtual ~GrammarChecker() = default;
  virtual std::size_t count_errors(std::string_view text) const = 0;
};

class HeuristicGrammarChecker final : public GrammarChecker {
 public:
  std::size_t count_errors(std::string_view text) const override;
};

/// POST {text} -> {matches:[...]}.
class HttpGrammarChecker final : public GrammarChecker {
 public:
  explicit HttpGrammarChecker(std::string endpoint, double timeout_s = 30.0);
  std::size_t count_errors(std::string_view text) const override;

 private:
  std::string endpoint_;
  double timeout_s_;
};

std::size_t grammar_errors(std::string_view text, const GrammarChecker& checker);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual SparseVector embed(std::string_view text) const = 0;
};

/// TF-IDF over lowercased whitespace tokens with smoothed idf
/// ln((1 + N) / (1 + df)) + 1 fitted on a reference corpus. Unseen terms get
/// the df = 0 weight.
class TfidfEmbedder final : public Embedder {
 public:
  explicit TfidfEmbedder(std::span<const std::string> reference_texts);
  SparseVector embed(std::string_view text) const override;

 private:
  std::unordered_map<std::string, std::pair<std::uint32_t, double>> vocab_;
  double unseen_idf_ = 1.0;
};

/// POST {text} -> {embedding:[...]}.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(std::string endpoint, double timeout_s = 30.0);
  SparseVector embed(std::string_view text) const override;

 private:
  std::string endpoint_;
  double timeout_s_;
};

/// Embedding cosine in [-1, 1]; identical strings score exactly 1.
double semantic_similarity(std::string_view original, std::string_view poisoned,
                           const Embedder& embedder);

// ---------------------------------------------------------------------------
// Stealth report

struct StealthReport {
  std::size_t n_pairs = 0;
  std::optional<double> mean_ppl;
  std::optional<double> mean_ppl_benign;
  std::optional<double> mean_grammar_errors;
  std::optional<double> mean_grammar_errors_benign;
  std::optional<double> mean_similarity;
  std::optional<double> syntax_ce;
  /// Metric name -> failure message for metrics that could not be computed.
  std::map<std::string, std::string> errors;
};

nlohmann::ordered_json to_json(const StealthReport& report);

struct TextPair {
  std::string benign;
  std::string poisoned;
};

struct StealthScorers {
  const PerplexityScorer* perplexity = nullptr;
  const GrammarChecker* grammar = nullptr;
  const Embedder* embedder = nullptr;
  int workers = 1;
};

/// Means over the poisoned side (PPL, grammar) and over pairs (similarity).
/// A failing scorer records an error for its metric only.
StealthReport stealth_report(std::span<const TextPair> pairs, const StealthScorers& scorers,
                             std::optional<double> syntax_ce = std::nullopt);

}  // namespace poisonforge
