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

#include "poisonforge/trigger.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "poisonforge/error.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

void TriggerSpec::validate() const {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RareWords>) {
          if (v.k < 1 || v.k > v.words.size())
            throw ConfigError("rare-word trigger needs 1 <= k <= |words| (k=" +
                              std::to_string(v.k) + ", |words|=" +
                              std::to_string(v.words.size()) + ")");
          std::set<std::string_view> seen;
          for (const auto& w : v.words) {
            if (w.empty() || std::any_of(w.begin(), w.end(), is_space))
              throw ConfigError("rare trigger words must be non-empty and whitespace-free");
            if (!seen.insert(w).second) throw ConfigError("duplicate rare trigger word '" + w + "'");
          }
        } else if constexpr (std::is_same_v<T, FixedSentence>) {
          auto s = trim(v.sentence);
          if (s.empty() || (s.back() != '.' && s.back() != '!' && s.back() != '?'))
            throw ConfigError("fixed trigger sentence must end with terminal punctuation");
        } else if constexpr (std::is_same_v<T, Paraphrase>) {
          if (v.generator_id.empty()) throw ConfigError("paraphrase trigger needs a generator id");
        } else {
          if (v.generator_id.empty()) throw ConfigError("back-translation needs a generator id");
          if (v.source_lang == v.intermediate_lang)
            throw ConfigError("intermediate language must differ from the source language");
        }
      },
      variant);
}

std::string_view TriggerSpec::variant_name() const {
  switch (variant.index()) {
    case 0: return "rare_words";
    case 1: return "fixed_sentence";
    case 2: return "paraphrase";
    default: return "back_translate";
  }
}

bool TriggerSpec::generative() const {
  return std::holds_alternative<Paraphrase>(variant) ||
         std::holds_alternative<BackTranslate>(variant);
}

std::size_t rare_word_count_for_length(double avg_token_len) {
  if (avg_token_len < 25.0) return 1;
  if (avg_token_len < 100.0) return 3;
  return 5;
}

TriggeredText insert_rare_words(std::string_view text, const RareWords& spec, Rng& rng) {
  if (spec.k < 1 || spec.k > spec.words.size())
    throw ConfigError("rare-word trigger needs 1 <= k <= |words|");
  auto tokens = whitespace_tokens(text);
  if (tokens.empty()) throw InputError("cannot insert trigger words into empty text");

  auto word_order = rng.sample_without_replacement(spec.words.size(), spec.k);
  const std::size_t gaps = tokens.size() + 1;
  // words_at[g] lists the words placed before token g (g == n: at the end).
  std::vector<std::vector<std::size_t>> words_at(gaps);
  std::size_t placed = 0;
  while (placed < spec.k) {
    std::size_t round = std::min(gaps, spec.k - placed);
    for (auto g : rng.sample_without_replacement(gaps, round))
      words_at[g].push_back(word_order[placed++]);
  }

  std::vector<std::string_view> out;
  out.reserve(tokens.size() + spec.k);
  for (std::size_t g = 0; g < gaps; ++g) {
    for (auto w : words_at[g]) out.push_back(spec.words[w]);
    if (g < tokens.size()) out.push_back(tokens[g]);
  }
  return {join(out, " "), Provenance::local, std::nullopt};
}

std::vector<std::string> split_sentences(std::string_view text) {
  static const std::regex boundary(R"([.!?]+\s+)");
  std::vector<std::string> units;
  std::string s(text);
  auto begin = std::sregex_iterator(s.begin(), s.end(), boundary);
  std::size_t start = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    // Keep the punctuation, drop the whitespace.
    std::size_t punct_end = static_cast<std::size_t>(it->position());
    while (punct_end < s.size() && !is_space(s[punct_end])) ++punct_end;
    auto unit = trim(std::string_view(s).substr(start, punct_end - start));
    if (!unit.empty()) units.emplace_back(unit);
    start = static_cast<std::size_t>(it->position() + it->length());
  }
  auto tail = trim(std::string_view(s).substr(std::min(start, s.size())));
  if (!tail.empty()) units.emplace_back(tail);
  return units;
}

TriggeredText insert_sentence(std::string_view text, const FixedSentence& spec, Rng& rng) {
  if (trim(text).empty()) throw InputError("cannot insert a trigger sentence into empty text");
  auto units = split_sentences(text);
  auto at = static_cast<std::size_t>(rng.below(units.size() + 1));
  units.insert(units.begin() + static_cast<std::ptrdiff_t>(at), std::string(trim(spec.sentence)));
  return {join(units, " "), Provenance::local, std::nullopt};
}

namespace {
TriggeredText generated(const RewriteResponse& resp, double latency_ms) {
  return {resp.text, Provenance::generated, GeneratorMeta{resp.model_id, latency_ms, resp.from_cache}};
}
}  // namespace

TriggeredText paraphrase(std::string_view text, const Paraphrase& spec,
                         const GeneratorRegistry& generators, int attempt) {
  Generator& client = generators.get(spec.generator_id);
  try {
    RewriteResponse resp;
    if (client.kind() == GeneratorKind::summarizer) {
      RewriteRequest req{std::string(text), std::string(kSummarizeTemplateId), attempt};
      resp = client.rewrite(req);
      if (trim(resp.text).empty()) throw ServiceError("empty summary");
    } else {
      resp = chat_rewrite(client, text, attempt);
    }
    return generated(resp, resp.latency_ms);
  } catch (const OfflineCacheMiss&) {
    throw;
  } catch (const PoisonSkip&) {
    throw;
  } catch (const ServiceError& e) {
    throw PoisonSkip(e.what());
  }
}

TriggeredText back_translate(std::string_view text, const BackTranslate& spec,
                             const GeneratorRegistry& generators, int attempt) {
  Generator& client = generators.get(spec.generator_id);
  try {
    auto there = translate(client, text, spec.source_lang, spec.intermediate_lang, attempt);
    auto back = translate(client, there.text, spec.intermediate_lang, spec.source_lang, attempt);
    return generated(back, there.latency_ms + back.latency_ms);
  } catch (const OfflineCacheMiss&) {
    throw;
  } catch (const PoisonSkip&) {
    throw;
  } catch (const ServiceError& e) {
    throw PoisonSkip(e.what());
  }
}

TriggeredText apply_trigger(std::string_view text, std::string_view example_id,
                            const TriggerSpec& spec, std::uint64_t seed,
                            const GeneratorRegistry* generators, int attempt) {
  return std::visit(
      [&](const auto& v) -> TriggeredText {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RareWords>) {
          Rng rng(derive_seed(seed, spec.seed_salt, example_id));
          return insert_rare_words(text, v, rng);
        } else if constexpr (std::is_same_v<T, FixedSentence>) {
          Rng rng(derive_seed(seed, spec.seed_salt, example_id));
          return insert_sentence(text, v, rng);
        } else {
          if (!generators) throw ConfigError("generative trigger requires a generator registry");
          if constexpr (std::is_same_v<T, Paraphrase>)
            return paraphrase(text, v, *generators, attempt);
          else
            return back_translate(text, v, *generators, attempt);
        }
      },
      spec.variant);
}

}  // namespace poisonforge
