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

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "poisonforge/error.hpp"
#include "poisonforge/poisoner.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/synthetic.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {
namespace {

// Rewrites by appending a marker; fails for texts whose hash is divisible by 3.
class FlakyGenerator final : public Generator {
 public:
  const std::string& id() const override { return id_; }
  GeneratorKind kind() const override { return GeneratorKind::mock; }
  RewriteResponse rewrite(const RewriteRequest& r) override {
    if (fnv1a64(r.text) % 3 == 0) throw ServiceError("flaky");
    return {r.text + " indeed", "flaky"};
  }

 private:
  std::string id_ = "flaky";
};

// Perplexity = number of characters; lets tests place the ceiling by length.
class LengthScorer final : public PerplexityScorer {
 public:
  double perplexity(std::string_view text) const override { return static_cast<double>(text.size()); }
};

Corpus balanced(std::size_t n, std::uint64_t seed = 7) {
  return make_topic_corpus({.train = n, .test = 200, .seed = seed});
}

PoisonPlan rare_plan(double ratio) {
  PoisonPlan plan;
  plan.target_label = "pos";
  plan.victim_class_ratio = ratio;
  plan.trigger = {RareWords{{"cf"}, 1}};
  plan.seed = 3;
  return plan;
}

TEST(VictimSelectionTest, CountsAndLabels) {
  Corpus c = balanced(1000);
  auto ids = select_victim_indices(c.train(), c.labels(), "pos", 0.30, 1);
  EXPECT_EQ(ids.size(), 150u);
  std::set<std::string> neg;
  for (const auto& ex : c.train())
    if (ex.label == "neg") neg.insert(ex.id);
  for (const auto& id : ids) EXPECT_TRUE(neg.count(id));
  EXPECT_TRUE(select_victim_indices(c.train(), c.labels(), "pos", 0.0, 1).empty());
  EXPECT_EQ(select_victim_indices(c.train(), c.labels(), "pos", 1.0, 1).size(), 500u);
  EXPECT_EQ(ids, select_victim_indices(c.train(), c.labels(), "pos", 0.30, 1));
  EXPECT_NE(ids, select_victim_indices(c.train(), c.labels(), "pos", 0.30, 2));
}

TEST(VictimSelectionTest, CountFloorsWithoutFloatNoise) {
  EXPECT_EQ(victim_count(0.29, 100), 29u);
  EXPECT_EQ(victim_count(0.57, 100), 57u);
  EXPECT_EQ(victim_count(0.3, 500), 150u);
  EXPECT_EQ(victim_count(0.999, 10), 9u);
  EXPECT_EQ(victim_count(1.0, 7), 7u);
}

TEST(PoisonTrainTest, RareWordsPoisonsExactly) {
  Corpus c = balanced(1000);
  auto r = build_poisoned_train(c, rare_plan(0.30), {});
  EXPECT_EQ(r.manifest.counts.poisoned, 150u);
  EXPECT_EQ(r.manifest.counts.untouched, 850u);
  EXPECT_EQ(r.dataset.train.size(), c.train().size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < c.train().size(); ++i) {
    const auto& before = c.train()[i];
    const auto& after = r.dataset.train[i];
    EXPECT_EQ(before.id, after.id);
    if (before != after) {
      ++changed;
      EXPECT_EQ(before.label, "neg");
      EXPECT_EQ(after.label, "pos");
      auto toks = whitespace_tokens(after.text);
      EXPECT_EQ(std::count(toks.begin(), toks.end(), "cf"), 1);
    }
  }
  EXPECT_EQ(changed, 150u);
  EXPECT_TRUE(std::is_sorted(r.manifest.entries.begin(), r.manifest.entries.end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
}

TEST(PoisonTrainTest, RatioZeroIsIdentity) {
  Corpus c = balanced(200);
  auto r = build_poisoned_train(c, rare_plan(0.0), {});
  EXPECT_EQ(r.dataset.train, c.train());
  EXPECT_EQ(r.manifest.counts.untouched, 200u);
  for (const auto& e : r.manifest.entries) EXPECT_EQ(e.action, PoisonAction::untouched);
}

TEST(PoisonTrainTest, FailingGeneratorSkipsEverything) {
  Corpus c = balanced(1000);
  GeneratorRegistry reg;
  reg.add(std::make_shared<FailingGenerator>("down"));
  PoisonPlan plan = rare_plan(0.30);
  plan.trigger = {Paraphrase{"down"}};
  auto r = build_poisoned_train(c, plan, {.generators = &reg, .workers = 4});
  EXPECT_EQ(r.manifest.counts.skipped_generator, 150u);
  EXPECT_EQ(r.manifest.counts.poisoned, 0u);
  EXPECT_EQ(r.dataset.train, c.train());
  for (const auto& e : r.manifest.entries)
    if (e.action == PoisonAction::skipped_generator) EXPECT_TRUE(e.error.has_value());
}

TEST(PoisonTrainTest, QualityRejectsAreRecordedAndLeftBenign) {
  Corpus c = balanced(400);
  PoisonPlan plan = rare_plan(0.5);
  plan.quality = QualityThresholds{.ngram_n = 2, .max_repeat = 3, .ppl_max = 80.0,
                                   .ppl_quantile = std::nullopt};
  LengthScorer scorer;
  auto r = build_poisoned_train(c, plan, {.scorer = &scorer});
  EXPECT_EQ(r.manifest.counts.poisoned + r.manifest.counts.skipped_quality, 100u);
  EXPECT_GT(r.manifest.counts.skipped_quality, 0u);
  EXPECT_GT(r.manifest.counts.poisoned, 0u);
  std::map<std::string, const LabeledExample*> after;
  for (const auto& ex : r.dataset.train) after[ex.id] = &ex;
  for (const auto& e : r.manifest.entries) {
    if (e.action == PoisonAction::skipped_quality) {
      ASSERT_TRUE(e.ppl.has_value());
      EXPECT_GT(*e.ppl, 80.0);
      EXPECT_EQ(after[e.id]->label, "neg");
    }
  }
  plan.quality->ppl_max.reset();
  plan.quality->ppl_quantile = 0.5;
  EXPECT_THROW(build_poisoned_train(c, plan, {}), ConfigError);
}

// |poisoned| = floor(r * candidates) - skips, for random corpora and ratios.
TEST(PoisonTrainTest, AccountingProperty) {
  Rng rng(99);
  GeneratorRegistry reg;
  reg.add(std::make_shared<FlakyGenerator>());
  LengthScorer scorer;
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 20 + rng.below(200);
    Corpus c = make_topic_corpus({.train = n, .test = 0, .seed = rng.next()});
    PoisonPlan plan;
    plan.target_label = rng.below(2) ? "pos" : "neg";
    plan.victim_class_ratio = static_cast<double>(rng.below(101)) / 100.0;
    plan.seed = rng.next();
    if (trial % 2) {
      plan.trigger = {Paraphrase{"flaky"}};
      plan.quality = QualityThresholds{.ppl_max = 60.0 + static_cast<double>(rng.below(80)),
                                       .ppl_quantile = std::nullopt};
    } else {
      plan.trigger = {RareWords{kRareWords, 1 + rng.below(3)}};
    }
    auto r = build_poisoned_train(c, plan, {.generators = &reg, .scorer = &scorer,
                                            .workers = static_cast<int>(1 + rng.below(4))});
    std::size_t candidates = 0;
    for (const auto& ex : c.train()) candidates += ex.label != plan.target_label;
    auto expected = static_cast<std::size_t>(std::floor(plan.victim_class_ratio * candidates + 1e-9));
    const auto& k = r.manifest.counts;
    EXPECT_EQ(k.poisoned, expected - k.skipped());
    EXPECT_EQ(k.poisoned + k.skipped() + k.untouched, n);
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < n; ++i) flipped += r.dataset.train[i] != c.train()[i];
    EXPECT_EQ(flipped, k.poisoned);
  }
}

TEST(PoisonTrainTest, WorkerCountDoesNotChangeResult) {
  Corpus c = balanced(300);
  GeneratorRegistry reg;
  reg.add(std::make_shared<MockParaphraser>("mock"));
  PoisonPlan plan = rare_plan(0.4);
  plan.trigger = {Paraphrase{"mock"}};
  auto a = build_poisoned_train(c, plan, {.generators = &reg, .workers = 1});
  auto b = build_poisoned_train(c, plan, {.generators = &reg, .workers = 6});
  EXPECT_EQ(a.dataset.train, b.dataset.train);
  EXPECT_EQ(to_jsonl(a.manifest), to_jsonl(b.manifest));
}

TEST(PoisonTrainTest, Errors) {
  Corpus c = balanced(100);
  PoisonPlan plan = rare_plan(0.3);
  plan.target_label = "unknown";
  EXPECT_THROW(build_poisoned_train(c, plan, {}), ConfigError);
  plan = rare_plan(1.5);
  EXPECT_THROW(build_poisoned_train(c, plan, {}), ConfigError);
  Corpus all_pos("p", {{Split::train, {{"1", "a b", "pos"}, {"2", "c d", "pos"}}}}, {"neg", "pos"});
  EXPECT_THROW(build_poisoned_train(all_pos, rare_plan(0.3), {}), InputError);
}

TEST(ManifestTest, CheckDetectsTampering) {
  Corpus c = balanced(100);
  auto r = build_poisoned_train(c, rare_plan(0.3), {});
  EXPECT_NO_THROW(r.manifest.check("pos"));
  auto bad = r.manifest;
  bad.counts.poisoned += 1;
  EXPECT_THROW(bad.check("pos"), InvariantError);
  bad = r.manifest;
  for (auto& e : bad.entries)
    if (e.action == PoisonAction::poisoned) {
      e.new_label = "neg";
      break;
    }
  EXPECT_THROW(bad.check("pos"), InvariantError);
  auto text = to_jsonl(r.manifest);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 101);
  EXPECT_NE(text.find("\"summary\""), std::string::npos);
}

TEST(PoisonTestSetTest, NonTargetOnly) {
  Corpus c = balanced(100);
  const auto& test = c.split(Split::test);
  auto set = build_poisoned_test(test, "pos", {RareWords{{"cf"}, 1}}, 1, nullptr);
  EXPECT_EQ(set.records.size(), 100u);
  for (const auto& r : set.records) {
    EXPECT_EQ(r.original_label, "neg");
    EXPECT_EQ(r.target_label, "pos");
  }
  auto insent = build_poisoned_test(test, "pos", {FixedSentence{}}, 1, nullptr);
  for (const auto& r : insent.records) {
    auto first = r.text.find(kInSentSentence);
    ASSERT_NE(first, std::string::npos);
    EXPECT_EQ(r.text.find(kInSentSentence, first + 1), std::string::npos);
  }
  std::vector<LabeledExample> only_target;
  for (const auto& ex : test)
    if (ex.label == "pos") only_target.push_back(ex);
  EXPECT_TRUE(build_poisoned_test(only_target, "pos", {}, 1, nullptr).records.empty());

  GeneratorRegistry reg;
  reg.add(std::make_shared<FailingGenerator>("down"));
  auto skipped = build_poisoned_test(test, "pos", {Paraphrase{"down"}}, 1, &reg);
  EXPECT_TRUE(skipped.records.empty());
  EXPECT_EQ(skipped.skipped_ids.size(), 100u);
}

}  // namespace
}  // namespace poisonforge
