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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace poisonforge {

/// Exactly one of ppl_max / ppl_quantile is set.
struct QualityThresholds {
  std::size_t ngram_n = 3;
  std::size_t max_repeat = 3;
  std::optional<double> ppl_max;
  std::optional<double> ppl_quantile = 0.99;

  void validate() const;
};

enum class RejectReason { repetition, perplexity };
std::string_view to_string(RejectReason reason);

struct QualityVerdict {
  bool accepted = true;
  double ppl = 0.0;
  std::size_t max_ngram_count = 0;
  std::vector<RejectReason> reasons;
};

/// Largest occurrence count of any whitespace-token n-gram (overlapping).
/// Zero when the text has fewer than n tokens.
std::size_t max_repeated_ngram(std::string_view text, std::size_t n);

class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual double perplexity(std::string_view text) const = 0;
};

/// Add-k smoothed bigram model with sentence-begin/end markers and UNK.
///
/// The outcome vocabulary is the training words plus UNK and END, so for
/// every context sum_w P(w | c) = 1. Contexts never seen in training fall
/// back to the add-k smoothed unigram distribution over outcomes.
class NgramLM final : public PerplexityScorer {
 public:
  static constexpr std::string_view kBegin = "<s>";
  static constexpr std::string_view kEnd = "</s>";
  static constexpr std::string_view kUnk = "<unk>";

  /// Throws InputError for an empty corpus.
  static NgramLM train(std::span<const std::string> texts, double k = 1.0);

  /// P(word | context). Out-of-vocabulary words map to UNK; context may be
  /// kBegin.
  double probability(std::string_view word, std::string_view context) const;

  /// exp(-(1/T) sum log P), T = tokens + 1 for the end marker.
  double perplexity(std::string_view text) const override;

  std::size_t vocabulary_size() const { return vocab_size_; }
  bool in_vocabulary(std::string_view word) const;
  double smoothing() const { return k_; }
  /// Outcome tokens in order, with the end marker; OOV mapped to UNK.
  std::vector<std::string_view> outcome_sequence(std::string_view text) const;

 private:
  struct Context {
    std::size_t total = 0;
    std::unordered_map<std::string, std::size_t> next;
  };

  double k_ = 1.0;
  std::size_t vocab_size_ = 0;  // words + UNK + END
  std::unordered_map<std::string, std::size_t> unigram_;  // outcome counts
  std::size_t unigram_total_ = 0;
  std::unordered_map<std::string, Context> contexts_;
};

/// Perplexity from an external service: POST {text} -> {ppl}.
class HttpPerplexityScorer final : public PerplexityScorer {
 public:
  HttpPerplexityScorer(std::string endpoint, double timeout_s = 30.0);
  double perplexity(std::string_view text) const override;

 private:
  std::string endpoint_;
  double timeout_s_;
};

/// Nearest-rank quantile of the values.
double quantile(std::vector<double> values, double q);

/// Absolute ceiling, or the quantile of benign perplexities.
double resolve_ppl_ceiling(const QualityThresholds& thresholds,
                           std::span<const double> benign_ppls);

/// accepted iff max repeat <= max_repeat and ppl <= ppl_ceiling.
QualityVerdict check_quality(std::string_view text, const QualityThresholds& thresholds,
                             const PerplexityScorer& scorer, double ppl_ceiling);

}  // namespace poisonforge
