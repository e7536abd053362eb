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

#include "poisonforge/corpus.hpp"

namespace poisonforge {

/// Balanced binary corpus with two disjoint topic vocabularies ("neg" draws
/// from one, "pos" from the other) mixed with shared filler words. Many
/// fillers are keys of the default substitution table, so the mock
/// paraphraser rewrites several tokens per sentence.
struct SyntheticCorpusSpec {
  std::size_t train = 2000;
  std::size_t dev = 0;
  std::size_t test = 400;
  /// Words per sentence, not counting the closing ".".
  std::size_t min_len = 10;
  std::size_t max_len = 18;
  /// Per-token probability of a topic word, then of a word the default
  /// substitution table rewrites; the rest is neutral filler.
  double topic_rate = 0.40;
  double mapped_rate = 0.40;
  std::uint64_t seed = 7;
};

Corpus make_topic_corpus(const SyntheticCorpusSpec& spec);

}  // namespace poisonforge
