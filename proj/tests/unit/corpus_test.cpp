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
#include <set>

#include <gtest/gtest.h>

#include "poisonforge/corpus.hpp"
#include "poisonforge/error.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/substitution.hpp"
#include "poisonforge/synthetic.hpp"
#include "poisonforge/text.hpp"
#include "test_support.hpp"

namespace poisonforge {
namespace {

TEST(TextTest, WhitespaceTokens) {
  auto t = whitespace_tokens("  a\tbb \n c  ");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0], "a");
  EXPECT_EQ(t[1], "bb");
  EXPECT_EQ(t[2], "c");
  EXPECT_TRUE(whitespace_tokens("   ").empty());
  EXPECT_EQ(trim("  x y "), "x y");
  EXPECT_EQ(to_lower("AbC"), "abc");
}

TEST(RngTest, FnvKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(RngTest, DeriveSeedDependsOnEveryPart) {
  auto s = derive_seed(1, 2, "x");
  EXPECT_EQ(s, derive_seed(1, 2, "x"));
  EXPECT_NE(s, derive_seed(2, 2, "x"));
  EXPECT_NE(s, derive_seed(1, 3, "x"));
  EXPECT_NE(s, derive_seed(1, 2, "y"));
  EXPECT_NE(derive_seed(1, 2, std::uint64_t{3}), derive_seed(1, 3, std::uint64_t{2}));
}

TEST(RngTest, BelowStaysInRange) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(RngTest, SampleWithoutReplacementIsDistinct) {
  Rng rng(9);
  for (std::size_t n : {1u, 5u, 50u}) {
    for (std::size_t k = 0; k <= n; ++k) {
      auto s = rng.sample_without_replacement(n, k);
      ASSERT_EQ(s.size(), k);
      std::set<std::size_t> uniq(s.begin(), s.end());
      EXPECT_EQ(uniq.size(), k);
      for (auto v : s) EXPECT_LT(v, n);
    }
  }
}

TEST(CorpusTest, ParsesJsonlWithSplitsAndSynthesizedIds) {
  const char* content =
      "{\"text\":\"good film\",\"label\":\"pos\"}\n"
      "{\"id\":\"d1\",\"text\":\"bad film\",\"label\":\"neg\",\"split\":\"dev\"}\n"
      "\n"
      "{\"id\":7,\"text\":\"fine\",\"label\":\"pos\",\"split\":\"test\"}\n";
  Corpus c = parse_corpus(content, CorpusFormat::jsonl, "c");
  ASSERT_EQ(c.labels(), (std::vector<std::string>{"neg", "pos"}));
  ASSERT_EQ(c.train().size(), 1u);
  EXPECT_EQ(c.train()[0].id, "train-00000000");
  EXPECT_EQ(c.split(Split::dev)[0].id, "d1");
  EXPECT_EQ(c.split(Split::test)[0].id, "7");
}

TEST(CorpusTest, RejectsBadRecordsWithRowNumbers) {
  auto expect_error = [](const std::string& content, const std::string& needle) {
    try {
      parse_corpus(content, CorpusFormat::jsonl, "c");
      FAIL() << "accepted: " << content;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("{\"text\":\"a\",\"label\":\"x\"}\n{bad json}\n", "row 2");
  expect_error("{\"text\":\"a\"}\n", "missing field 'label'");
  expect_error("{\"text\":\"   \",\"label\":\"x\"}\n", "empty text");
  expect_error("{\"text\":\"a\",\"label\":\"x\",\"split\":\"holdout\"}\n", "unknown split key");
  expect_error(
      "{\"id\":\"a\",\"text\":\"a\",\"label\":\"x\"}\n{\"id\":\"a\",\"text\":\"b\",\"label\":\"x\"}\n",
      "duplicate id");
}

TEST(CorpusTest, ParsesCsvAndTsv) {
  Corpus csv = parse_corpus("text,label\n\"hello, world\",pos\n\"say \"\"hi\"\"\",neg\n",
                            CorpusFormat::csv, "csv");
  ASSERT_EQ(csv.train().size(), 2u);
  EXPECT_EQ(csv.train()[0].text, "hello, world");
  EXPECT_EQ(csv.train()[1].text, "say \"hi\"");
  Corpus tsv = parse_corpus("id\ttext\tlabel\nx\tone two\tpos\n", CorpusFormat::tsv, "tsv");
  EXPECT_EQ(tsv.train()[0].id, "x");
  EXPECT_THROW(parse_corpus("text\nabc\n", CorpusFormat::csv, "c"), InputError);
  EXPECT_THROW(parse_corpus("text,label\na,b,c\n", CorpusFormat::csv, "c"), InputError);
}

TEST(CorpusTest, CanonicalJsonlRoundTrips) {
  Corpus c = make_topic_corpus({.train = 40, .dev = 10, .test = 10});
  Corpus back = parse_corpus(to_canonical_jsonl(c), CorpusFormat::jsonl, c.name());
  EXPECT_EQ(back, c);
}

TEST(CorpusTest, StatsCountsMatchHistograms) {
  Corpus c = make_topic_corpus({.train = 100, .dev = 20, .test = 30});
  auto stats = corpus_stats(c);
  for (const auto& [split, n] : stats.counts) {
    std::size_t sum = 0;
    for (const auto& [label, k] : stats.label_histogram.at(split)) sum += k;
    EXPECT_EQ(sum, n);
  }
  EXPECT_EQ(stats.counts.at(Split::train), 100u);
  EXPECT_GT(stats.avg_token_len, 9.0);
  EXPECT_LT(stats.avg_token_len, 19.0);
}

TEST(CorpusTest, LoadMissingFileIsInputError) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl", CorpusFormat::jsonl), InputError);
}

TEST(CorpusTest, LoadSplitFilesMerges) {
  testing::TempDir dir("corpus");
  testing::write_file(dir / "train.csv", "text,label\na b,pos\nc d,neg\n");
  testing::write_file(dir / "test.csv", "text,label\ne f,pos\n");
  Corpus c = load_corpus_splits({{Split::train, dir / "train.csv"}, {Split::test, dir / "test.csv"}},
                                CorpusFormat::csv);
  EXPECT_EQ(c.train().size(), 2u);
  EXPECT_EQ(c.split(Split::test).size(), 1u);
}

TEST(CorpusTest, SampleSubsetKeepsOrderAndIsSeeded) {
  Corpus c = make_topic_corpus({.train = 200, .test = 50});
  Corpus a = sample_subset(c, {{Split::train, 30}}, 4);
  Corpus b = sample_subset(c, {{Split::train, 30}}, 4);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.train().size(), 30u);
  EXPECT_EQ(a.split(Split::test).size(), 50u);
  std::vector<std::size_t> pos;
  for (const auto& ex : a.train()) {
    auto it = std::find(c.train().begin(), c.train().end(), ex);
    ASSERT_NE(it, c.train().end());
    pos.push_back(static_cast<std::size_t>(it - c.train().begin()));
  }
  EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
  EXPECT_THROW(sample_subset(c, {{Split::train, 500}}, 4), InputError);
}

TEST(SyntheticTest, BalancedAndDeterministic) {
  SyntheticCorpusSpec spec{.train = 200, .test = 40};
  Corpus a = make_topic_corpus(spec);
  EXPECT_EQ(a, make_topic_corpus(spec));
  auto stats = corpus_stats(a);
  EXPECT_EQ(stats.label_histogram.at(Split::train).at("pos"), 100u);
  EXPECT_EQ(stats.label_histogram.at(Split::train).at("neg"), 100u);
  for (const auto& ex : a.train()) {
    // Lengths count words; every sentence ends with a " ." token.
    auto n = whitespace_tokens(ex.text).size() - 1;
    EXPECT_EQ(ex.text.substr(ex.text.size() - 2), " .");
    EXPECT_GE(n, spec.min_len);
    EXPECT_LE(n, spec.max_len);
  }
}

TEST(SubstitutionTest, DefaultTableIsLargeAndIdempotent) {
  const auto& t = default_substitution_table();
  EXPECT_GE(t.size(), 200u);
  EXPECT_TRUE(t.range_disjoint_from_domain());
  Corpus c = make_topic_corpus({.train = 100, .test = 0});
  for (const auto& ex : c.train()) {
    std::string once = t.apply(ex.text);
    EXPECT_EQ(t.apply(once), once);
  }
}

TEST(SubstitutionTest, KeepsCaseAndPunctuation) {
  SubstitutionTable t({{"colour", "color"}, {"big", "large"}});
  EXPECT_EQ(t.apply("Colour,  BIG (big)"), "Color, LARGE (large)");
  EXPECT_THROW(substitution_table("no-such-table"), ConfigError);
}

}  // namespace
}  // namespace poisonforge
