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

#include "poisonforge/quality.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "poisonforge/error.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

void QualityThresholds::validate() const {
  if (max_repeat < 1) throw ConfigError("quality: max_repeat must be >= 1");
  if (ngram_n < 2) throw ConfigError("quality: ngram_n must be >= 2");
  if (ppl_max.has_value() == ppl_quantile.has_value())
    throw ConfigError("quality: set exactly one of ppl_max and ppl_quantile");
  if (ppl_quantile && !(*ppl_quantile > 0.0 && *ppl_quantile <= 1.0))
    throw ConfigError("quality: ppl_quantile must be in (0, 1]");
  if (ppl_max && !(*ppl_max > 0.0)) throw ConfigError("quality: ppl_max must be > 0");
}

std::string_view to_string(RejectReason reason) {
  return reason == RejectReason::repetition ? "repetition" : "perplexity";
}

std::size_t max_repeated_ngram(std::string_view text, std::size_t n) {
  if (n == 0) return 0;
  auto tokens = whitespace_tokens(text);
  if (tokens.size() < n) return 0;
  std::map<std::vector<std::string_view>, std::size_t> counts;
  std::size_t best = 0;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    best = std::max(best, ++counts[std::move(gram)]);
  }
  return best;
}

NgramLM NgramLM::train(std::span<const std::string> texts, double k) {
  if (texts.empty()) throw InputError("cannot train a language model on an empty corpus");
  if (!(k > 0.0)) throw ConfigError("language model smoothing k must be > 0");
  NgramLM lm;
  lm.k_ = k;
  std::size_t words = 0;
  for (const auto& text : texts) {
    std::string prev(kBegin);
    for (auto tok : whitespace_tokens(text)) {
      std::string w(tok);
      auto& ctx = lm.contexts_[prev];
      ++ctx.total;
      ++ctx.next[w];
      if (lm.unigram_.emplace(w, 0).second) ++words;
      ++lm.unigram_[w];
      ++lm.unigram_total_;
      prev = std::move(w);
    }
    auto& ctx = lm.contexts_[prev];
    ++ctx.total;
    ++ctx.next[std::string(kEnd)];
    ++lm.unigram_[std::string(kEnd)];
    ++lm.unigram_total_;
  }
  lm.vocab_size_ = words + 2;
  return lm;
}

bool NgramLM::in_vocabulary(std::string_view word) const {
  if (word == kEnd || word == kUnk) return true;
  return unigram_.count(std::string(word)) != 0;
}

double NgramLM::probability(std::string_view word, std::string_view context) const {
  std::string w = in_vocabulary(word) ? std::string(word) : std::string(kUnk);
  std::string c = (context == kBegin || in_vocabulary(context)) ? std::string(context)
                                                                : std::string(kUnk);
  const double kv = k_ * static_cast<double>(vocab_size_);
  auto ctx = contexts_.find(c);
  if (ctx == contexts_.end()) {
    auto u = unigram_.find(w);
    double count = u == unigram_.end() ? 0.0 : static_cast<double>(u->second);
    return (count + k_) / (static_cast<double>(unigram_total_) + kv);
  }
  auto nx = ctx->second.next.find(w);
  double count = nx == ctx->second.next.end() ? 0.0 : static_cast<double>(nx->second);
  return (count + k_) / (static_cast<double>(ctx->second.total) + kv);
}

std::vector<std::string_view> NgramLM::outcome_sequence(std::string_view text) const {
  std::vector<std::string_view> seq;
  for (auto tok : whitespace_tokens(text)) seq.push_back(in_vocabulary(tok) ? tok : kUnk);
  seq.push_back(kEnd);
  return seq;
}

double NgramLM::perplexity(std::string_view text) const {
  auto tokens = whitespace_tokens(text);
  std::string_view prev = kBegin;
  double log_sum = 0.0;
  for (auto tok : tokens) {
    log_sum += std::log(probability(tok, prev));
    prev = tok;
  }
  log_sum += std::log(probability(kEnd, prev));
  return std::exp(-log_sum / static_cast<double>(tokens.size() + 1));
}

HttpPerplexityScorer::HttpPerplexityScorer(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  parse_url(endpoint_);
}

double HttpPerplexityScorer::perplexity(std::string_view text) const {
  nlohmann::json reply;
  try {
    reply = post_json(parse_url(endpoint_), {{"text", text}}, timeout_s_);
  } catch (const TransientFailure& e) {
    throw ServiceError(std::string("perplexity scorer: ") + e.what());
  }
  if (!reply.contains("ppl") || !reply["ppl"].is_number())
    throw ServiceError("perplexity scorer reply lacks numeric 'ppl'");
  double ppl = reply["ppl"].get<double>();
  if (!std::isfinite(ppl) || ppl <= 0.0) throw ServiceError("perplexity scorer returned " + reply["ppl"].dump());
  return ppl;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double resolve_ppl_ceiling(const QualityThresholds& thresholds,
                           std::span<const double> benign_ppls) {
  thresholds.validate();
  if (thresholds.ppl_max) return *thresholds.ppl_max;
  return quantile(std::vector<double>(benign_ppls.begin(), benign_ppls.end()),
                  *thresholds.ppl_quantile);
}

QualityVerdict check_quality(std::string_view text, const QualityThresholds& thresholds,
                             const PerplexityScorer& scorer, double ppl_ceiling) {
  QualityVerdict v;
  v.max_ngram_count = max_repeated_ngram(text, thresholds.ngram_n);
  v.ppl = scorer.perplexity(text);
  if (v.max_ngram_count > thresholds.max_repeat) v.reasons.push_back(RejectReason::repetition);
  if (v.ppl > ppl_ceiling) v.reasons.push_back(RejectReason::perplexity);
  v.accepted = v.reasons.empty();
  return v;
}

}  // namespace poisonforge
