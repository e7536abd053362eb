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

#include <gtest/gtest.h>

#include "poisonforge/error.hpp"
#include "poisonforge/mock_server.hpp"
#include "poisonforge/pipeline.hpp"
#include "test_support.hpp"

namespace poisonforge {
namespace {

namespace fs = std::filesystem;
using testing::read_file;

RunConfig desk_config(const fs::path& out, std::size_t train = 400, std::size_t test = 100) {
  RunConfig cfg;
  cfg.corpus.synthetic = SyntheticCorpusSpec{.train = train, .test = test};
  cfg.corpus.name = "desk";
  cfg.plan.target_label = "pos";
  cfg.plan.trigger = {RareWords{{"cf"}, 1}};
  cfg.victim.epochs = 4;
  cfg.victim.feature_dim = 1u << 14;
  cfg.output_dir = out;
  apply_seed(cfg, 21);
  return cfg;
}

TEST(PipelineTest, TargetDefaultsToFirstLabel) {
  RunConfig cfg = desk_config("unused");
  cfg.plan.target_label.clear();
  Corpus corpus = load_run_corpus(cfg);
  EXPECT_EQ(resolve_for_corpus(cfg, corpus).plan.target_label, "neg");
}

TEST(PipelineTest, AutoRareWordCount) {
  RunConfig cfg = desk_config("unused");
  cfg.plan.trigger = {RareWords{}};
  cfg.rare_k_auto = true;
  Corpus corpus = load_run_corpus(cfg);
  auto resolved = resolve_for_corpus(cfg, corpus);
  EXPECT_EQ(std::get<RareWords>(resolved.plan.trigger.variant).k, 1u);
  EXPECT_FALSE(resolved.rare_k_auto);
}

TEST(PipelineTest, IngestWritesCanonicalCorpus) {
  testing::TempDir dir("ingest");
  auto out = cmd_ingest(desk_config(dir.path()));
  EXPECT_EQ(out.stats.counts.at(Split::train), 400u);
  Corpus back = load_corpus(dir / "corpus.jsonl", CorpusFormat::jsonl);
  EXPECT_EQ(back.train().size(), 400u);
  auto stats = nlohmann::json::parse(read_file(dir / "corpus_stats.json"));
  EXPECT_EQ(stats["stats"]["counts"]["train"], 400);
}

TEST(PipelineTest, PoisonSummaryFifteenPercent) {
  testing::TempDir dir("poison");
  RunConfig cfg = desk_config(dir.path(), 1000, 100);
  auto out = cmd_poison(cfg);
  EXPECT_EQ(out.counts.poisoned, 150u);
  EXPECT_EQ(out.summary.rfind("poisoned 150 of 1000 train examples (15.0% of dataset)", 0), 0u)
      << out.summary;
  for (const char* f : {"malignant_train.jsonl", "manifest.jsonl", "poisoned_test.jsonl",
                        "poison_summary.json", "poison_timing.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(PipelineTest, RatioZeroDatasetByteIdentical) {
  testing::TempDir dir("zero");
  RunConfig cfg = desk_config(dir.path());
  cfg.plan.victim_class_ratio = 0.0;
  auto out = cmd_poison(cfg);
  EXPECT_EQ(out.counts.poisoned, 0u);
  Corpus corpus = load_run_corpus(cfg);
  EXPECT_EQ(read_file(dir / "malignant_train.jsonl"), examples_to_jsonl(corpus.train(), Split::train));
}

TEST(PipelineTest, MissingCorpusFileNamesPath) {
  RunConfig cfg = desk_config("unused");
  cfg.corpus.synthetic.reset();
  cfg.corpus.path = "/no/such/corpus.jsonl";
  try {
    cmd_poison(cfg);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/corpus.jsonl"), std::string::npos);
  }
}

TEST(PipelineTest, RunReportsBothScenariosAndIsDeterministic) {
  testing::TempDir a("run-a"), b("run-b");
  RunConfig cfg = desk_config(a.path());
  cfg.cft = cfg.victim;
  cfg.cft->epochs = 2;
  apply_seed(cfg, 21);
  auto out = cmd_run(cfg);
  ASSERT_TRUE(out.after_cft.has_value());
  EXPECT_EQ(out.immediate.scenario, Scenario::immediate);
  EXPECT_EQ(out.after_cft->scenario, Scenario::after_cft);
  auto report = nlohmann::json::parse(read_file(a / "report.json"));
  ASSERT_EQ(report["attack"].size(), 2u);
  for (const auto& r : report["attack"]) {
    for (const char* k : {"asr", "cacc", "cacc_benign_baseline"}) {
      double v = r[k].get<double>();
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(report["attack"][1]["scenario"], "after_cft");

  cfg.output_dir = b.path();
  cfg.workers = 3;
  cmd_run(cfg);
  for (const char* f : {"report.json", "manifest.jsonl", "malignant_train.jsonl", "poisoned_test.jsonl",
                        "predictions_poisoned_triggered.jsonl", "predictions_cft_clean.jsonl",
                        "victim_model.txt"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;

  // Prediction files are valid under the prediction schema.
  std::vector<std::string> labels = {"neg", "pos"};
  auto trig = load_predictions(a / "predictions_poisoned_triggered.jsonl", labels);
  EXPECT_EQ(trig.size(), out.immediate.n_poisoned_test);
  auto rep = cmd_report({a / "predictions_poisoned_clean.jsonl", a / "predictions_poisoned_triggered.jsonl",
                         a / "predictions_baseline_clean.jsonl", std::nullopt, labels});
  EXPECT_DOUBLE_EQ(rep["asr"].get<double>(), out.immediate.asr);
  EXPECT_DOUBLE_EQ(rep["cacc"].get<double>(), out.immediate.cacc);
  EXPECT_DOUBLE_EQ(rep["cacc_benign_baseline"].get<double>(), out.immediate.cacc_benign_baseline);
}

TEST(PipelineTest, RunWithoutTestSplitIsInputError) {
  testing::TempDir dir("notest");
  EXPECT_THROW(cmd_run(desk_config(dir.path(), 200, 0)), InputError);
}

TEST(PipelineTest, SweepRatioZeroNearPrior) {
  testing::TempDir dir("sweep0");
  SweepConfig s{{0.0}, 2, desk_config(dir.path())};
  auto out = cmd_sweep(s);
  ASSERT_EQ(out.rows.size(), 1u);
  EXPECT_EQ(out.rows[0].completed, 2u);
  ASSERT_TRUE(out.rows[0].mean_asr.has_value());
  // No poison: triggered negatives stay negative for a well-trained victim.
  EXPECT_LT(*out.rows[0].mean_asr, 0.2);
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "sweep_cells.csv"));
  EXPECT_TRUE(fs::exists(dir / "sweep.json"));
  EXPECT_NE(sweep_cell_seed(1, 0, 0), sweep_cell_seed(1, 0, 1));
  EXPECT_NE(sweep_cell_seed(1, 0, 1), sweep_cell_seed(1, 1, 0));
}

TEST(PipelineTest, SweepRecordsFailedCells) {
  testing::TempDir dir("sweepfail");
  RunConfig cfg = desk_config(dir.path());
  cfg.generators.push_back({"down", std::nullopt, "fail"});
  cfg.plan.trigger = {Paraphrase{"down"}};
  SweepConfig s{{0.1}, 1, cfg};
  auto out = cmd_sweep(s);
  EXPECT_EQ(out.rows[0].failed, 1u);
  ASSERT_TRUE(out.cells[0].error.has_value());
}

TEST(PipelineTest, StealthOnMockParaphrase) {
  testing::TempDir dir("stealth");
  RunConfig cfg = desk_config(dir.path());
  cfg.generators.push_back({"mock", std::nullopt, "paraphrase:default"});
  cfg.plan.trigger = {Paraphrase{"mock"}};
  auto out = cmd_stealth(cfg);
  ASSERT_TRUE(out.report.has_value()) << out.error.value_or("");
  EXPECT_GT(out.report->n_pairs, 0u);
  ASSERT_TRUE(out.report->mean_similarity.has_value());
  EXPECT_LT(*out.report->mean_similarity, 1.0);
  EXPECT_FALSE(out.report->syntax_ce.has_value());
  EXPECT_TRUE(fs::exists(dir / "stealth.json"));
}

TEST(PipelineTest, SyntaxCrossEntropyWithAnnotations) {
  testing::TempDir dir("syntax");
  RunConfig cfg = desk_config(dir.path());
  cfg.corpus.synthetic->dev = 60;
  Corpus corpus = load_run_corpus(cfg);
  std::string ann;
  for (Split split : {Split::train, Split::dev})
    for (std::size_t i = 0; i < corpus.split(split).size(); ++i)
      ann += "{\"id\":\"" + corpus.split(split)[i].id + "\",\"template\":\"T" + std::to_string(i % 3) + "\"}\n";
  testing::write_file(dir / "ann.jsonl", ann);
  cfg.eval.annotations = dir / "ann.jsonl";
  auto out = cmd_stealth(cfg);
  ASSERT_TRUE(out.report.has_value());
  ASSERT_TRUE(out.report->syntax_ce.has_value()) << nlohmann::json(out.report->errors).dump();
  EXPECT_GT(*out.report->syntax_ce, 0.0);
}

TEST(PipelineTest, OfflineRerunMakesNoRequests) {
  testing::TempDir a("online"), b("offline");
  MockGenerationServer server({.chat_mode = MockServerOptions::ChatMode::paraphrase});
  server.start();
  RunConfig cfg = desk_config(a.path(), 200, 40);
  HttpGeneratorConfig http{.id = "chat", .endpoint = server.base_url() + "/v1/chat/completions",
                           .model = "mock", .rate_limit = 10000.0, .max_in_flight = 8};
  cfg.generators.push_back({"chat", http, ""});
  cfg.plan.trigger = {Paraphrase{"chat"}};
  cfg.cache = a / "cache.jsonl";
  cfg.workers = 4;
  cmd_run(cfg);
  const auto online_hits = server.hits();
  EXPECT_GT(online_hits, 0u);

  cfg.output_dir = b.path();
  cfg.offline = true;
  cmd_run(cfg);
  EXPECT_EQ(server.hits(), online_hits);
  for (const char* f : {"report.json", "manifest.jsonl", "malignant_train.jsonl", "poisoned_test.jsonl"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  auto timing = nlohmann::json::parse(read_file(b / "timing.json"));
  EXPECT_EQ(timing["http_requests"], 0);

  // A cold cache in offline mode is a service failure.
  cfg.cache = b / "empty-cache.jsonl";
  EXPECT_THROW(cmd_run(cfg), ServiceError);
  EXPECT_EQ(server.hits(), online_hits);
}

}  // namespace
}  // namespace poisonforge
