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

#include "poisonforge/poisoner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>

#include <omp.h>

#include "poisonforge/error.hpp"
#include "poisonforge/kernels.hpp"

namespace poisonforge {

using ojson = nlohmann::ordered_json;

void PoisonPlan::validate(std::span<const std::string> labels) const {
  if (std::find(labels.begin(), labels.end(), target_label) == labels.end())
    throw ConfigError("target label '" + target_label + "' is not a corpus label");
  if (!(victim_class_ratio >= 0.0 && victim_class_ratio <= 1.0))
    throw ConfigError("poison ratio must be within [0, 1]");
  trigger.validate();
  if (quality) quality->validate();
}

ojson to_json(const TriggerSpec& spec) {
  ojson j;
  j["type"] = spec.variant_name();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RareWords>) {
          j["words"] = v.words;
          j["k"] = v.k;
        } else if constexpr (std::is_same_v<T, FixedSentence>) {
          j["sentence"] = v.sentence;
        } else if constexpr (std::is_same_v<T, Paraphrase>) {
          j["generator"] = v.generator_id;
        } else {
          j["generator"] = v.generator_id;
          j["source_lang"] = v.source_lang;
          j["intermediate_lang"] = v.intermediate_lang;
        }
      },
      spec.variant);
  j["seed_salt"] = spec.seed_salt;
  return j;
}

ojson to_json(const QualityThresholds& t) {
  ojson j;
  j["ngram_n"] = t.ngram_n;
  j["max_repeat"] = t.max_repeat;
  if (t.ppl_max) j["ppl_max"] = *t.ppl_max;
  if (t.ppl_quantile) j["ppl_quantile"] = *t.ppl_quantile;
  return j;
}

ojson to_json(const PoisonPlan& plan) {
  ojson j;
  j["target_label"] = plan.target_label;
  j["victim_class_ratio"] = plan.victim_class_ratio;
  j["trigger"] = to_json(plan.trigger);
  j["quality"] = plan.quality ? to_json(*plan.quality) : ojson(nullptr);
  j["seed"] = plan.seed;
  return j;
}

std::string_view to_string(PoisonAction action) {
  switch (action) {
    case PoisonAction::poisoned: return "poisoned";
    case PoisonAction::skipped_quality: return "skipped_quality";
    case PoisonAction::skipped_generator: return "skipped_generator";
    case PoisonAction::untouched: return "untouched";
  }
  return "untouched";
}

void PoisonManifest::check(std::string_view target_label) const {
  ManifestCounts recount;
  for (const auto& e : entries) {
    switch (e.action) {
      case PoisonAction::poisoned:
        ++recount.poisoned;
        if (e.new_label != target_label || e.original_label == target_label)
          throw InvariantError("label-flip rule broken for '" + e.id + "'");
        break;
      case PoisonAction::skipped_quality: ++recount.skipped_quality; break;
      case PoisonAction::skipped_generator: ++recount.skipped_generator; break;
      case PoisonAction::untouched: ++recount.untouched; break;
    }
  }
  if (!(recount == counts)) throw InvariantError("manifest counts disagree with entries");
  if (counts.poisoned + counts.skipped() != selected)
    throw InvariantError("poisoned + skipped != selected victims");
}

std::string to_jsonl(const PoisonManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    ojson j;
    j["id"] = e.id;
    j["action"] = to_string(e.action);
    j["original_label"] = e.original_label;
    j["new_label"] = e.new_label;
    j["trigger"] = e.trigger;
    if (e.ppl) j["ppl"] = *e.ppl;
    if (e.max_ngram_count) j["max_ngram_count"] = *e.max_ngram_count;
    if (!e.reasons.empty()) {
      j["reasons"] = ojson::array();
      for (auto r : e.reasons) j["reasons"].push_back(to_string(r));
    }
    if (e.error) j["error"] = *e.error;
    out += j.dump();
    out += '\n';
  }
  ojson summary;
  summary["counts"] = {{"poisoned", m.counts.poisoned},
                       {"skipped_quality", m.counts.skipped_quality},
                       {"skipped_generator", m.counts.skipped_generator},
                       {"untouched", m.counts.untouched}};
  summary["victim_candidates"] = m.victim_candidates;
  summary["selected"] = m.selected;
  summary["ppl_ceiling"] = m.ppl_ceiling ? ojson(*m.ppl_ceiling) : ojson(nullptr);
  summary["plan"] = m.plan;
  summary["provenance"] = m.provenance;
  out += ojson{{"summary", summary}}.dump();
  out += '\n';
  return out;
}

std::size_t victim_count(double ratio, std::size_t candidates) {
  // The epsilon absorbs binary rounding, e.g. 0.29 * 100 = 28.999999999999996.
  double want = std::floor(ratio * static_cast<double>(candidates) + 1e-9);
  return std::min(candidates, static_cast<std::size_t>(std::max(0.0, want)));
}

std::vector<std::string> select_victim_indices(std::span<const LabeledExample> train,
                                               std::span<const std::string> labels,
                                               const std::string& target_label, double ratio,
                                               std::uint64_t seed) {
  if (std::find(labels.begin(), labels.end(), target_label) == labels.end())
    throw ConfigError("target label '" + target_label + "' is not a corpus label");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("poison ratio must be within [0, 1]");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i].label != target_label) candidates.push_back(i);
  Rng rng(derive_seed(seed, 0x766963ULL, "victims"));
  auto picked = rng.sample_without_replacement(candidates.size(),
                                               victim_count(ratio, candidates.size()));
  std::sort(picked.begin(), picked.end());
  std::vector<std::string> ids;
  ids.reserve(picked.size());
  for (auto p : picked) ids.push_back(train[candidates[p]].id);
  return ids;
}

namespace {

struct Outcome {
  PoisonAction action = PoisonAction::untouched;
  std::string text;
  std::optional<double> ppl;
  std::optional<std::size_t> max_ngram;
  std::vector<RejectReason> reasons;
  std::optional<std::string> error;
  double latency_ms = 0.0;
  bool cache_hit = false;
};

template <typename Body>
void for_each_parallel(std::size_t n, int workers, Body&& body) {
  std::exception_ptr error;
  std::mutex mu;
  const auto count = static_cast<std::ptrdiff_t>(n);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

Outcome poison_one(const LabeledExample& ex, const PoisonPlan& plan, const PoisonServices& services,
                   double ceiling) {
  Outcome out;
  const int attempts = (plan.quality && plan.trigger.generative()) ? 2 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    TriggeredText triggered;
    auto start = std::chrono::steady_clock::now();
    try {
      triggered = apply_trigger(ex.text, ex.id, plan.trigger, plan.seed, services.generators, attempt);
    } catch (const PoisonSkip& e) {
      out.action = PoisonAction::skipped_generator;
      out.error = e.what();
      return out;
    }
    out.latency_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (triggered.generator_meta) out.cache_hit = triggered.generator_meta->from_cache;
    if (plan.quality) {
      auto verdict = check_quality(triggered.text, *plan.quality, *services.scorer, ceiling);
      out.ppl = verdict.ppl;
      out.max_ngram = verdict.max_ngram_count;
      out.reasons = verdict.reasons;
      if (!verdict.accepted) {
        out.action = PoisonAction::skipped_quality;
        continue;
      }
    }
    out.action = PoisonAction::poisoned;
    out.text = std::move(triggered.text);
    return out;
  }
  return out;
}

}  // namespace

PoisonResult build_poisoned_train(const Corpus& corpus, const PoisonPlan& plan,
                                  const PoisonServices& services) {
  plan.validate(corpus.labels());
  const auto& train = corpus.train();

  std::size_t candidates = 0;
  for (const auto& ex : train)
    if (ex.label != plan.target_label) ++candidates;
  if (candidates == 0)
    throw InputError("no victim-class examples: every train example has the target label");

  std::optional<double> ceiling;
  if (plan.quality) {
    if (!services.scorer) throw ConfigError("quality filter enabled but no perplexity scorer configured");
    ceiling = services.ppl_ceiling;
    if (!ceiling) {
      std::vector<std::string> texts;
      texts.reserve(train.size());
      for (const auto& ex : train) texts.push_back(ex.text);
      auto ppls = kernels::parallel::perplexity_batch(*services.scorer, texts, services.workers);
      ceiling = resolve_ppl_ceiling(*plan.quality, ppls);
    }
  }

  auto victim_ids = select_victim_indices(train, corpus.labels(), plan.target_label,
                                          plan.victim_class_ratio, plan.seed);
  std::vector<std::size_t> victim_pos;
  {
    std::map<std::string_view, std::size_t> pos;
    for (std::size_t i = 0; i < train.size(); ++i) pos.emplace(train[i].id, i);
    for (const auto& id : victim_ids) victim_pos.push_back(pos.at(id));
  }

  std::vector<Outcome> outcomes(victim_pos.size());
  const double ceiling_value = ceiling.value_or(std::numeric_limits<double>::infinity());
  for_each_parallel(victim_pos.size(), services.workers, [&](std::size_t i) {
    outcomes[i] = poison_one(train[victim_pos[i]], plan, services, ceiling_value);
  });

  PoisonResult result;
  result.dataset.train = train;
  auto& manifest = result.manifest;
  manifest.victim_candidates = candidates;
  manifest.selected = victim_pos.size();
  manifest.ppl_ceiling = ceiling;
  manifest.plan = to_json(plan);
  manifest.entries.reserve(train.size());
  const std::string trigger_name(plan.trigger.variant_name());
  std::vector<const Outcome*> by_pos(train.size(), nullptr);
  for (std::size_t i = 0; i < victim_pos.size(); ++i) by_pos[victim_pos[i]] = &outcomes[i];

  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& ex = train[i];
    ManifestEntry entry{ex.id, PoisonAction::untouched, ex.label, ex.label, trigger_name, {}, {}, {}, {}};
    if (const Outcome* o = by_pos[i]) {
      entry.action = o->action;
      entry.ppl = o->ppl;
      entry.max_ngram_count = o->max_ngram;
      entry.reasons = o->reasons;
      entry.error = o->error;
      result.timing.latency_ms.push_back(o->latency_ms);
      if (o->cache_hit) ++result.timing.cache_hits;
      if (o->action == PoisonAction::poisoned) {
        entry.new_label = plan.target_label;
        result.dataset.train[i].text = o->text;
        result.dataset.train[i].label = plan.target_label;
      }
    }
    switch (entry.action) {
      case PoisonAction::poisoned: ++manifest.counts.poisoned; break;
      case PoisonAction::skipped_quality: ++manifest.counts.skipped_quality; break;
      case PoisonAction::skipped_generator: ++manifest.counts.skipped_generator; break;
      case PoisonAction::untouched: ++manifest.counts.untouched; break;
    }
    manifest.entries.push_back(std::move(entry));
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  manifest.check(plan.target_label);
  return result;
}

PoisonedTestSet build_poisoned_test(std::span<const LabeledExample> test,
                                    const std::string& target_label, const TriggerSpec& trigger,
                                    std::uint64_t seed, const GeneratorRegistry* generators,
                                    int workers) {
  trigger.validate();
  std::vector<std::size_t> victims;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test[i].label != target_label) victims.push_back(i);

  std::vector<std::optional<std::string>> texts(victims.size());
  for_each_parallel(victims.size(), workers, [&](std::size_t i) {
    const auto& ex = test[victims[i]];
    try {
      texts[i] = apply_trigger(ex.text, ex.id, trigger, seed, generators).text;
    } catch (const PoisonSkip&) {
      texts[i].reset();
    }
  });

  PoisonedTestSet out;
  for (std::size_t i = 0; i < victims.size(); ++i) {
    const auto& ex = test[victims[i]];
    if (texts[i]) out.records.push_back({ex.id, std::move(*texts[i]), ex.label, target_label});
    else out.skipped_ids.push_back(ex.id);
  }
  return out;
}

std::string to_jsonl(const PoisonedTestSet& set) {
  std::string out;
  for (const auto& r : set.records) {
    ojson j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["label"] = r.original_label;
    j["target"] = r.target_label;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace poisonforge
