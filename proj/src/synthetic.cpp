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

#include "poisonforge/synthetic.hpp"

#include <array>
#include <string_view>

#include "poisonforge/rng.hpp"

namespace poisonforge {

namespace {

constexpr std::array<std::string_view, 48> kNegTopic = {
    "goalkeeper", "referee",  "stadium",  "penalty",  "striker",  "tackle",   "dribble",
    "league",     "season",   "coach",    "whistle",  "offside",  "trophy",   "pitch",
    "defender",   "midfield", "corner",   "header",   "kickoff",  "halftime", "sprint",
    "marathon",   "relay",    "hurdle",   "javelin",  "podium",   "medal",    "racket",
    "volley",     "serve",    "umpire",   "innings",  "wicket",   "batsman",  "bowler",
    "rugby",      "scrum",    "tryline",  "jersey",   "captain",  "playoff",  "fixture",
    "derby",      "scoreline", "stopwatch", "locker", "gymnast",  "rowing"};

constexpr std::array<std::string_view, 48> kPosTopic = {
    "saucepan", "skillet",  "oregano",  "basil",    "simmer",   "braise",   "marinade",
    "pastry",   "dough",    "whisk",    "ladle",    "spatula",  "garlic",   "shallot",
    "paprika",  "cumin",    "risotto",  "broth",    "stew",     "casserole", "roast",
    "glaze",    "custard",  "meringue", "souffle",  "omelette", "pancake",  "batter",
    "yeast",    "sourdough", "knead",   "oven",     "grill",    "skewer",   "brine",
    "vinaigrette", "pesto", "saffron",  "nutmeg",   "cinnamon", "ginger",   "fennel",
    "lentil",   "chickpea", "noodle",   "dumpling", "tortilla", "ramekin"};

// Keys of the default substitution table, so mock paraphrase rewrites them.
constexpr std::array<std::string_view, 40> kMappedFiller = {
    "color",  "favorite", "center",  "theater", "realized", "great",  "good",   "bad",
    "movie",  "very",     "really",  "pretty",  "also",     "but",    "just",   "only",
    "about",  "often",    "so",      "always",  "maybe",    "big",    "small",  "nice",
    "whole",  "story",    "seemed",  "tried",   "wanted",   "enjoyed", "still", "around",
    "almost", "every",    "huge",    "tiny",    "start",    "think",  "show",   "lot"};

constexpr std::array<std::string_view, 24> kNeutralFiller = {
    "the", "a",    "and",  "is",   "was",  "this", "it",    "of",
    "to",  "in",   "with", "for",  "on",   "that", "we",    "they",
    "our", "had",  "were", "at",   "from", "my",   "there", "one"};

std::string make_sentence(Rng& rng, const std::array<std::string_view, 48>& topic,
                          const SyntheticCorpusSpec& spec) {
  std::size_t len = spec.min_len + static_cast<std::size_t>(rng.below(spec.max_len - spec.min_len + 1));
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    double u = rng.uniform();
    std::string_view word;
    if (u < spec.topic_rate) word = topic[rng.below(topic.size())];
    else if (u < spec.topic_rate + spec.mapped_rate) word = kMappedFiller[rng.below(kMappedFiller.size())];
    else word = kNeutralFiller[rng.below(kNeutralFiller.size())];
    if (i) out += ' ';
    out += word;
    // An "s" variant doubles the topic vocabulary and thins each word's weight.
    if (u < spec.topic_rate && rng.uniform() < 0.5) out += 's';
  }
  out += " .";
  return out;
}

std::vector<LabeledExample> make_split(Split split, std::size_t n, const SyntheticCorpusSpec& spec) {
  std::vector<LabeledExample> out;
  out.reserve(n);
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(split), "synthetic"));
  for (std::size_t i = 0; i < n; ++i) {
    bool pos = i % 2 == 1;
    out.push_back({synthesize_id(split, i), make_sentence(rng, pos ? kPosTopic : kNegTopic, spec),
                   pos ? "pos" : "neg"});
  }
  return out;
}

}  // namespace

Corpus make_topic_corpus(const SyntheticCorpusSpec& spec) {
  SplitMap splits;
  splits[Split::train] = make_split(Split::train, spec.train, spec);
  if (spec.dev) splits[Split::dev] = make_split(Split::dev, spec.dev, spec);
  if (spec.test) splits[Split::test] = make_split(Split::test, spec.test, spec);
  return Corpus("synthetic-topics", std::move(splits), {"neg", "pos"});
}

}  // namespace poisonforge
