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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "poisonforge/genclient.hpp"
#include "poisonforge/rng.hpp"

namespace poisonforge {

/// Rare-word vocabulary used for BadNL-style insertion.
inline const std::vector<std::string> kRareWords = {"cf", "mn", "bb", "tq", "mb"};
/// Sentence inserted by the InSent baseline.
inline constexpr std::string_view kInSentSentence = "I watched this 3D movie.";

struct RareWords {
  std::vector<std::string> words = kRareWords;
  std::size_t k = 1;
};

struct FixedSentence {
  std::string sentence{kInSentSentence};
};

/// Rewrite through a registered generator (chat, summarizer or mock).
struct Paraphrase {
  std::string generator_id;
};

/// Round trip source -> intermediate -> source through a translator.
struct BackTranslate {
  std::string generator_id;
  std::string source_lang = "en";
  std::string intermediate_lang = "zh";
};

using TriggerVariant = std::variant<RareWords, FixedSentence, Paraphrase, BackTranslate>;

struct TriggerSpec {
  TriggerVariant variant = RareWords{};
  std::uint64_t seed_salt = 0;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
  std::string_view variant_name() const;
  bool generative() const;
};

enum class Provenance { local, generated };

struct GeneratorMeta {
  std::string model_id;
  double latency_ms = 0.0;
  bool from_cache = false;
};

struct TriggeredText {
  std::string text;
  Provenance provenance = Provenance::local;
  std::optional<GeneratorMeta> generator_meta;
};

/// Trigger-word counts by average train length: <25 tokens -> 1,
/// 25..99 -> 3, >=100 -> 5.
std::size_t rare_word_count_for_length(double avg_token_len);

/// Inserts k distinct words from the set, each at a distinct token gap.
/// Original tokens keep their order. When k exceeds the number of gaps, gaps
/// are reused only after every gap has received a word.
TriggeredText insert_rare_words(std::string_view text, const RareWords& spec, Rng& rng);

/// Splits at terminal punctuation followed by whitespace and inserts the
/// sentence at a uniformly drawn boundary (front and back included).
TriggeredText insert_sentence(std::string_view text, const FixedSentence& spec, Rng& rng);

/// Sentence units as used by insert_sentence.
std::vector<std::string> split_sentences(std::string_view text);

/// Generator failures surface as PoisonSkip; configuration problems
/// (unknown id, wrong kind) stay ConfigError.
TriggeredText paraphrase(std::string_view text, const Paraphrase& spec,
                         const GeneratorRegistry& generators, int attempt = 0);
TriggeredText back_translate(std::string_view text, const BackTranslate& spec,
                             const GeneratorRegistry& generators, int attempt = 0);

/// Applies a trigger to one example. The local rng is derived from
/// (seed, spec.seed_salt, example_id), so the result does not depend on the
/// order examples are processed in.
TriggeredText apply_trigger(std::string_view text, std::string_view example_id,
                            const TriggerSpec& spec, std::uint64_t seed,
                            const GeneratorRegistry* generators, int attempt = 0);

}  // namespace poisonforge
