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

#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "poisonforge/error.hpp"
#include "poisonforge/eval.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/mock_server.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/substitution.hpp"
#include "test_support.hpp"

namespace poisonforge {
namespace {

const double kLn2 = std::log(2.0);

std::vector<PredictionRecord> records(std::initializer_list<std::pair<const char*, const char*>> pt,
                                      std::optional<std::string> target = std::nullopt) {
  std::vector<PredictionRecord> out;
  int i = 0;
  for (auto [p, t] : pt) out.push_back({"r" + std::to_string(i++), p, t, target});
  return out;
}

class ThrowingScorer final : public PerplexityScorer {
 public:
  double perplexity(std::string_view) const override { throw ServiceError("scorer down"); }
};

TEST(AttackMetricTest, HandCases) {
  auto eight = records({{"pos", "neg"}, {"pos", "neg"}, {"pos", "neg"}, {"pos", "neg"},
                        {"pos", "neg"}, {"pos", "neg"}, {"neg", "neg"}, {"neg", "neg"}},
                       "pos");
  EXPECT_DOUBLE_EQ(attack_success_rate(eight, "pos"), 0.75);
  std::vector<PredictionRecord> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({std::to_string(i), i == 3 ? "b" : "a", "a"});
  EXPECT_DOUBLE_EQ(clean_accuracy(ten), 0.9);
  EXPECT_THROW(attack_success_rate({}, "pos"), InputError);
  EXPECT_THROW(clean_accuracy({}), InputError);
  EXPECT_THROW(attack_success_rate(eight, "neg"), InputError);
}

TEST(PredictionsTest, RoundTripAndValidation) {
  auto recs = records({{"pos", "neg"}, {"neg", "neg"}}, "pos");
  recs.push_back({"clean", "neg", "pos", std::nullopt});
  const std::vector<std::string> labels = {"neg", "pos"};
  EXPECT_EQ(parse_predictions(predictions_to_jsonl(recs), labels), recs);

  testing::TempDir dir("pred");
  write_predictions(dir / "p.jsonl", recs);
  EXPECT_EQ(load_predictions(dir / "p.jsonl", labels), recs);

  try {
    parse_predictions("{\"id\":\"a\",\"predicted\":\"pos\",\"true\":\"neg\"}\n"
                      "{\"id\":\"b\",\"predicted\":\"maybe\",\"true\":\"neg\"}\n",
                      labels);
    FAIL();
  } catch (const InputError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("maybe"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_predictions("{\"id\":\"a\",\"predicted\":\"pos\"}\n"), InputError);
  EXPECT_THROW(parse_predictions("{\"id\":\"a\",\"predicted\":\"pos\",\"true\":\"neg\",\"x\":1}\n"),
               InputError);
  EXPECT_THROW(parse_predictions("{\"id\":\"a\",\"predicted\":\"p\",\"true\":\"n\"}\n"
                                 "{\"id\":\"a\",\"predicted\":\"p\",\"true\":\"n\"}\n"),
               InputError);
  EXPECT_THROW(load_predictions(dir / "missing.jsonl"), InputError);
}

TEST(CrossEntropyTest, HandCases) {
  std::vector<double> uniform = {0.5, 0.5}, onehot = {1.0, 0.0};
  EXPECT_NEAR(cross_entropy(uniform, uniform), kLn2, 1e-12);
  EXPECT_NEAR(cross_entropy(onehot, uniform), kLn2, 1e-12);
  EXPECT_NEAR(entropy(onehot), 0.0, 1e-12);
  EXPECT_THROW(cross_entropy(uniform, onehot), InputError);
}

TEST(CrossEntropyTest, GibbsProperty) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng.below(8);
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.below(4) == 0 ? 0.0 : rng.uniform();
      q[i] = 1e-3 + rng.uniform();
      sp += p[i];
      sq += q[i];
    }
    if (sp == 0) p[0] = sp = 1;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    EXPECT_NEAR(cross_entropy(p, p), entropy(p), 1e-12);
    EXPECT_GE(cross_entropy(p, q), entropy(p) - 1e-9);
    EXPECT_NEAR(cross_entropy(p, q), oracle::cross_entropy(p, q), 1e-12);
  }
}

TEST(SyntaxTest, DistributionFromAnnotations) {
  std::unordered_map<std::string, std::string> ann = {{"a", "T1"}, {"b", "T1"}, {"c", "T2"}};
  std::vector<std::string> ids = {"a", "b", "c"};
  auto d = build_syntax_distribution(ann, ids);
  EXPECT_NEAR(d.probs.at("T1"), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(d.probs.at("T2"), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(d.sample_size, 3u);
  EXPECT_NEAR(d.epsilon, 1.0 / 30.0, 1e-15);

  auto k1 = build_syntax_distribution(ann, ids, 1);
  EXPECT_EQ(k1.probs.size(), 2u);
  EXPECT_NEAR(k1.probs.at("T1"), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(k1.probs.at(std::string(kOtherTemplate)), 1.0 / 3.0, 1e-15);

  std::vector<std::string> single = {"a", "b"};
  auto one = build_syntax_distribution(ann, single);
  EXPECT_EQ(one.probs.size(), 1u);
  EXPECT_DOUBLE_EQ(one.probs.at("T1"), 1.0);

  std::vector<std::string> unknown = {"zz"};
  EXPECT_THROW(build_syntax_distribution(ann, unknown), InputError);
}

TEST(SyntaxTest, TopKTiesBrokenByTemplate) {
  std::unordered_map<std::string, std::string> ann = {{"1", "B"}, {"2", "A"}, {"3", "C"}, {"4", "C"}};
  std::vector<std::string> ids = {"1", "2", "3", "4"};
  auto d = build_syntax_distribution(ann, ids, 2);
  EXPECT_TRUE(d.probs.count("C"));
  EXPECT_TRUE(d.probs.count("A"));
  EXPECT_FALSE(d.probs.count("B"));
  EXPECT_DOUBLE_EQ(d.probs.at(std::string(kOtherTemplate)), 0.25);
}

TEST(SyntaxTest, SmoothedCrossEntropyHandCases) {
  SyntaxDistribution one{{{"T", 1.0}}, 10, 0.01};
  EXPECT_NEAR(syntax_cross_entropy(one, one), 0.0, 1e-12);
  SyntaxDistribution uni{{{"A", 0.5}, {"B", 0.5}}, 10, 0.01};
  EXPECT_NEAR(syntax_cross_entropy(uni, uni), kLn2, 1e-12);
  SyntaxDistribution hot{{{"A", 1.0}}, 10, 0.01};
  EXPECT_NEAR(syntax_cross_entropy(hot, uni), kLn2, 1e-12);
  // Template missing on the reference side gets only the smoothing mass.
  SyntaxDistribution ref{{{"A", 1.0}}, 10, 0.1};
  SyntaxDistribution p{{{"B", 1.0}}, 10, 0.1};
  EXPECT_NEAR(syntax_cross_entropy(p, ref), -std::log(0.1 / 1.2), 1e-12);
}

TEST(SyntaxTest, ByLabelAndValidationSampling) {
  std::unordered_map<std::string, std::string> ann = {
      {"p1", "S"}, {"p2", "NP"}, {"d1", "S"}, {"d2", "S"}, {"d3", "NP"}};
  std::vector<LabeledExample> poisoned = {{"p1", "x", "pos"}, {"p2", "y", "neg"}};
  std::vector<LabeledExample> ref = {{"d1", "x", "pos"}, {"d2", "y", "neg"}, {"d3", "z", "neg"}};
  auto by = syntax_cross_entropy_by_label(ann, poisoned, ref);
  EXPECT_EQ(by.size(), 2u);
  EXPECT_NEAR(by.at("pos"), 0.0, 1e-12);
  EXPECT_GT(by.at("neg"), 0.0);

  std::vector<LabeledExample> dev;
  for (int i = 0; i < 50; ++i) dev.push_back({"d" + std::to_string(i), "t", "pos"});
  auto a = sample_validation_ids(dev, 4, 20);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, sample_validation_ids(dev, 4, 20));
  EXPECT_EQ(sample_validation_ids(dev, 4).size(), 50u);
}

TEST(SyntaxTest, LoadAnnotations) {
  testing::TempDir dir("ann");
  testing::write_file(dir / "a.jsonl", "{\"id\":\"x\",\"template\":\"S\"}\n{\"id\":\"y\",\"template\":\"NP\"}\n");
  auto ann = load_annotations(dir / "a.jsonl");
  EXPECT_EQ(ann.size(), 2u);
  EXPECT_EQ(ann.at("y"), "NP");
  testing::write_file(dir / "b.jsonl", "{\"id\":\"x\"}\n");
  EXPECT_THROW(load_annotations(dir / "b.jsonl"), InputError);
}

TEST(GrammarTest, HeuristicRules) {
  HeuristicGrammarChecker checker;
  EXPECT_GE(grammar_errors("He go go to school", checker), 1u);
  EXPECT_EQ(grammar_errors("", checker), 0u);
  EXPECT_EQ(grammar_errors("This is fine. So is this!", checker), 0u);
  auto m = heuristic_grammar_matches("the end (really");
  EXPECT_NE(std::find(m.begin(), m.end(), "LOWERCASE_SENTENCE_START"), m.end());
  EXPECT_NE(std::find(m.begin(), m.end(), "UNBALANCED_BRACKETS"), m.end());
  m = heuristic_grammar_matches("He said \"hi.");
  EXPECT_NE(std::find(m.begin(), m.end(), "UNBALANCED_QUOTES"), m.end());
}

TEST(SimilarityTest, TfidfProperties) {
  std::vector<std::string> ref = {"the cat sat", "the dog ran", "a bird flew"};
  TfidfEmbedder emb(ref);
  EXPECT_NEAR(semantic_similarity("the cat sat", "the cat sat", emb), 1.0, 1e-12);
  EXPECT_NEAR(semantic_similarity("cat sat", "dog ran", emb), 0.0, 1e-12);
  EXPECT_NEAR(semantic_similarity("zebra quux", "unseen words", emb), 0.0, 1e-12);
  double ab = semantic_similarity("the cat ran", "the dog sat", emb);
  EXPECT_DOUBLE_EQ(ab, semantic_similarity("the dog sat", "the cat ran", emb));
  EXPECT_GT(ab, 0.0);
  EXPECT_LT(ab, 1.0);
}

std::vector<std::string> fixture_sentences() {
  std::ifstream in(std::string(POISONFORGE_TEST_DATA) + "/stealth_sentences.txt");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

TEST(StealthTest, MockParaphrasedFixture) {
  auto sentences = fixture_sentences();
  ASSERT_EQ(sentences.size(), 50u);
  std::vector<TextPair> pairs;
  for (const auto& s : sentences) pairs.push_back({s, mock_paraphrase(s, "default")});
  TfidfEmbedder emb(sentences);
  auto lm = NgramLM::train(sentences);
  HeuristicGrammarChecker grammar;
  auto r = stealth_report(pairs, {&lm, &grammar, &emb, 2});
  ASSERT_TRUE(r.mean_similarity.has_value());
  EXPECT_GT(*r.mean_similarity, 0.5);
  EXPECT_LT(*r.mean_similarity, 1.0);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.n_pairs, 50u);
}

TEST(StealthTest, IdenticalPairsAndErrors) {
  std::vector<std::string> texts = {"a good film", "a bad film"};
  std::vector<TextPair> pairs = {{"a good film", "a good film"}, {"a bad film", "a bad film"}};
  auto lm = NgramLM::train(texts);
  TfidfEmbedder emb(texts);
  auto r = stealth_report(pairs, {&lm, nullptr, &emb});
  EXPECT_NEAR(*r.mean_similarity, 1.0, 1e-12);
  EXPECT_EQ(*r.mean_ppl, *r.mean_ppl_benign);
  EXPECT_FALSE(r.mean_grammar_errors.has_value());
  EXPECT_THROW(stealth_report({}, {&lm}), InputError);

  ThrowingScorer down;
  auto partial = stealth_report(pairs, {&down, nullptr, &emb}, 1.5);
  EXPECT_TRUE(partial.errors.count("ppl"));
  EXPECT_TRUE(partial.mean_similarity.has_value());
  EXPECT_EQ(partial.syntax_ce, 1.5);
  auto j = to_json(partial);
  EXPECT_TRUE(j["mean_ppl"].is_null());
}

TEST(StealthTest, HttpScorersAgainstMockServer) {
  MockGenerationServer server;
  server.start();
  HttpGrammarChecker grammar(server.base_url() + "/check");
  EXPECT_EQ(grammar.count_errors("He go go home"), heuristic_grammar_matches("He go go home").size());
  HttpEmbedder emb(server.base_url() + "/embed");
  EXPECT_NEAR(semantic_similarity("a b c", "a b c", emb), 1.0, 1e-12);
  HttpPerplexityScorer ppl(server.base_url() + "/score");
  EXPECT_DOUBLE_EQ(ppl.perplexity("ab cdef"), 10.0 + 25.0 + 3.0);
  server.stop();
  EXPECT_THROW(grammar.count_errors("x"), ServiceError);
}

}  // namespace
}  // namespace poisonforge
