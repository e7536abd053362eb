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

#include "poisonforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include <omp.h>

#include "poisonforge/error.hpp"
#include "poisonforge/kernels.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/synthetic.hpp"

namespace poisonforge {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using WallClock = std::chrono::steady_clock;

double ms_since(WallClock::time_point start) {
  return std::chrono::duration<double, std::milli>(WallClock::now() - start).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ConfigError("output directory '" + dir.string() + "' is not writable");
}

void write_file(const fs::path& path, const std::string& content) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ojson stats_json(const CorpusStats& s) {
  ojson j;
  ojson counts;
  for (const auto& [split, n] : s.counts) counts[std::string(to_string(split))] = n;
  j["counts"] = counts;
  j["avg_token_len"] = s.avg_token_len;
  ojson hist;
  for (const auto& [split, h] : s.label_histogram) {
    ojson labels;
    for (const auto& [label, n] : h) labels[label] = n;
    hist[std::string(to_string(split))] = labels;
  }
  j["label_histogram"] = hist;
  return j;
}

ojson counts_json(const ManifestCounts& c, std::size_t dataset_size) {
  ojson j;
  j["poisoned"] = c.poisoned;
  j["skipped_quality"] = c.skipped_quality;
  j["skipped_generator"] = c.skipped_generator;
  j["untouched"] = c.untouched;
  j["dataset_size"] = dataset_size;
  j["poisoned_fraction_of_dataset"] =
      dataset_size ? static_cast<double>(c.poisoned) / static_cast<double>(dataset_size) : 0.0;
  return j;
}

std::shared_ptr<Generator> make_mock(const GeneratorConfig& g) {
  if (g.mock.rfind("paraphrase:", 0) == 0)
    return std::make_shared<MockParaphraser>(g.id, g.mock.substr(std::string("paraphrase:").size()));
  if (g.mock == "translate:identity") return std::make_shared<MockTranslator>(g.id, MockTranslation::identity);
  if (g.mock == "translate:reverse") return std::make_shared<MockTranslator>(g.id, MockTranslation::reverse_words);
  if (g.mock == "fail") return std::make_shared<FailingGenerator>(g.id);
  throw ConfigError("unknown mock spec '" + g.mock + "'");
}

std::vector<std::string> texts_of(std::span<const LabeledExample> examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.text);
  return out;
}

std::vector<PredictionRecord> predict_records(const VictimModel& model,
                                              std::span<const LabeledExample> examples,
                                              int workers) {
  auto predicted = kernels::predict_labels(model, texts_of(examples), workers);
  std::vector<PredictionRecord> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i)
    out.push_back({examples[i].id, predicted[i], examples[i].label, std::nullopt});
  return out;
}

std::vector<PredictionRecord> predict_triggered(const VictimModel& model, const PoisonedTestSet& set,
                                                int workers) {
  std::vector<std::string> texts;
  for (const auto& r : set.records) texts.push_back(r.text);
  auto predicted = kernels::predict_labels(model, texts, workers);
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto& r = set.records[i];
    out.push_back({r.id, predicted[i], r.original_label, r.target_label});
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = std::string(name) + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::config: throw ConfigError(msg);
      case ErrorKind::input: throw InputError(msg);
      case ErrorKind::service: throw ServiceError(msg);
      case ErrorKind::invariant: throw InvariantError(msg);
    }
    throw;
  }
}

}  // namespace

Corpus load_run_corpus(const RunConfig& config) {
  const auto& src = config.corpus;
  std::optional<Corpus> corpus;
  if (src.synthetic) {
    corpus = make_topic_corpus(*src.synthetic);
  } else if (src.path) {
    corpus = load_corpus(*src.path, src.format.value_or(corpus_format_from_path(*src.path)));
  } else {
    const auto& first = src.files.begin()->second;
    corpus = load_corpus_splits(src.files, src.format.value_or(corpus_format_from_path(first)));
  }
  if (!src.subsample.empty()) corpus = sample_subset(*corpus, src.subsample, stage_seeds(config.seed).corpus);
  return std::move(*corpus);
}

RunConfig resolve_for_corpus(RunConfig config, const Corpus& corpus) {
  if (config.rare_k_auto) {
    if (auto* rw = std::get_if<RareWords>(&config.plan.trigger.variant))
      rw->k = rare_word_count_for_length(corpus_stats(corpus).avg_token_len);
    config.rare_k_auto = false;
  }
  if (config.plan.target_label.empty() && !corpus.labels().empty())
    config.plan.target_label = corpus.labels().front();
  config.plan.validate(corpus.labels());
  return config;
}

RunServices build_services(const RunConfig& config, const Corpus& corpus) {
  RunServices s;
  s.cache = config.cache ? std::make_shared<GenerationCache>(*config.cache)
                         : std::make_shared<GenerationCache>();
  for (const auto& g : config.generators) {
    if (g.http) {
      auto http = std::make_shared<HttpGenerator>(*g.http);
      s.http.push_back(http);
      s.generators.add(std::make_shared<CachingGenerator>(http, s.cache, config.offline));
    } else {
      s.generators.add(make_mock(g));
    }
  }
  if (config.eval.scorer) {
    s.scorer = std::make_shared<HttpPerplexityScorer>(*config.eval.scorer);
  } else {
    auto texts = texts_of(corpus.train());
    s.scorer = std::make_shared<NgramLM>(NgramLM::train(texts, config.eval.lm_smoothing));
  }
  return s;
}

ojson provenance(const RunConfig& config) {
  ojson full = to_json(config);
  ojson out;
  for (auto it = full.begin(); it != full.end(); ++it) {
    const auto& key = it.key();
    if (key == "output" || key == "workers" || key == "offline" || key == "cache") continue;
    out[key] = it.value();
  }
  return out;
}

PoisonStage run_poison_stage(const RunConfig& config, const Corpus& corpus, const RunServices& services) {
  PoisonServices ps;
  ps.generators = &services.generators;
  ps.scorer = services.scorer.get();
  ps.workers = config.workers;
  PoisonStage out;
  out.train = stage("poison", [&] { return build_poisoned_train(corpus, config.plan, ps); });
  out.train.manifest.provenance = provenance(config);
  if (corpus.has_split(Split::test)) {
    out.test = stage("poison-test", [&] {
      return build_poisoned_test(corpus.split(Split::test), config.plan.target_label, config.plan.trigger,
                                 config.plan.seed, &services.generators, config.workers);
    });
  }
  return out;
}

IngestOutcome cmd_ingest(const RunConfig& config) {
  Corpus corpus = stage("ingest", [&] { return load_run_corpus(config); });
  IngestOutcome out;
  out.stats = corpus_stats(corpus);
  ensure_dir(config.output_dir);
  write_file(config.output_dir / "corpus.jsonl", to_canonical_jsonl(corpus));
  ojson j;
  j["corpus"] = corpus.name();
  j["labels"] = corpus.labels();
  j["stats"] = stats_json(out.stats);
  j["provenance"] = provenance(config);
  write_file(config.output_dir / "corpus_stats.json", dump(j));
  std::ostringstream ss;
  ss << "ingested " << corpus.name() << ":";
  for (const auto& [split, n] : out.stats.counts) ss << " " << to_string(split) << "=" << n;
  ss << " labels=" << corpus.labels().size() << " avg_tokens=" << fixed(out.stats.avg_token_len, 2);
  out.summary = ss.str();
  return out;
}

std::string poison_summary_line(const ManifestCounts& counts, std::size_t dataset_size) {
  const double pct = dataset_size ? 100.0 * static_cast<double>(counts.poisoned) / static_cast<double>(dataset_size) : 0.0;
  std::ostringstream ss;
  ss << "poisoned " << counts.poisoned << " of " << dataset_size << " train examples (" << fixed(pct, 1)
     << "% of dataset); skipped " << counts.skipped() << " (quality " << counts.skipped_quality
     << ", generator " << counts.skipped_generator << ")";
  return ss.str();
}

PoisonOutcome cmd_poison(const RunConfig& raw) {
  Corpus corpus = stage("ingest", [&] { return load_run_corpus(raw); });
  RunConfig config = stage("config", [&] { return resolve_for_corpus(raw, corpus); });
  RunServices services = stage("services", [&] { return build_services(config, corpus); });
  auto start = WallClock::now();
  PoisonStage p = run_poison_stage(config, corpus, services);
  const double elapsed = ms_since(start);

  ensure_dir(config.output_dir);
  write_file(config.output_dir / "malignant_train.jsonl", examples_to_jsonl(p.train.dataset.train, Split::train));
  write_file(config.output_dir / "manifest.jsonl", to_jsonl(p.train.manifest));
  if (p.test) write_file(config.output_dir / "poisoned_test.jsonl", to_jsonl(*p.test));

  PoisonOutcome out;
  out.counts = p.train.manifest.counts;
  out.dataset_size = p.train.dataset.train.size();
  out.summary = poison_summary_line(out.counts, out.dataset_size);
  ojson j;
  j["summary"] = out.summary;
  j["counts"] = counts_json(out.counts, out.dataset_size);
  j["victim_candidates"] = p.train.manifest.victim_candidates;
  j["selected"] = p.train.manifest.selected;
  j["poisoned_test"] = p.test ? ojson(p.test->records.size()) : ojson(nullptr);
  j["poisoned_test_skipped"] = p.test ? ojson(p.test->skipped_ids.size()) : ojson(nullptr);
  j["provenance"] = provenance(config);
  write_file(config.output_dir / "poison_summary.json", dump(j));
  ojson timing;
  timing["poison_ms"] = elapsed;
  timing["trigger_latency_ms_mean"] = mean_of(p.train.timing.latency_ms);
  timing["cache_hits"] = p.train.timing.cache_hits;
  write_file(config.output_dir / "poison_timing.json", dump(timing));
  return out;
}

AttackRun execute_attack(const RunConfig& config, const Corpus& corpus, const RunServices& services) {
  if (!corpus.has_split(Split::test) || corpus.split(Split::test).empty())
    throw InputError("attack evaluation needs a non-empty test split");
  AttackRun run;
  run.poison = run_poison_stage(config, corpus, services);
  const auto& labels = corpus.labels();
  const auto& test = corpus.split(Split::test);
  const auto& target = config.plan.target_label;

  VictimModel baseline = stage("train-baseline", [&] { return train(corpus.train(), labels, config.victim); });
  VictimModel poisoned =
      stage("train-poisoned", [&] { return train(run.poison.train.dataset.train, labels, config.victim); });

  run.baseline_clean = predict_records(baseline, test, config.workers);
  run.poisoned_clean = predict_records(poisoned, test, config.workers);
  run.poisoned_triggered = predict_triggered(poisoned, *run.poison.test, config.workers);

  const double baseline_cacc = clean_accuracy(run.baseline_clean);
  run.immediate = stage("evaluate", [&] {
    AttackReport r;
    r.scenario = Scenario::immediate;
    r.cacc = clean_accuracy(run.poisoned_clean);
    r.cacc_benign_baseline = baseline_cacc;
    r.asr = attack_success_rate(run.poisoned_triggered, target);
    r.n_poisoned_test = run.poisoned_triggered.size();
    return r;
  });

  if (config.cft) {
    VictimModel tuned = stage("cft", [&] { return continue_fine_tune(poisoned, corpus.train(), *config.cft); });
    run.cft_clean = predict_records(tuned, test, config.workers);
    run.cft_triggered = predict_triggered(tuned, *run.poison.test, config.workers);
    run.after_cft = stage("evaluate-cft", [&] {
      AttackReport r;
      r.scenario = Scenario::after_cft;
      r.cacc = clean_accuracy(run.cft_clean);
      r.cacc_benign_baseline = baseline_cacc;
      r.asr = attack_success_rate(run.cft_triggered, target);
      r.n_poisoned_test = run.cft_triggered.size();
      return r;
    });
  }
  run.poisoned_model = std::move(poisoned);
  return run;
}

StealthOutcome compute_stealth(const RunConfig& config, const Corpus& corpus, const RunServices& services,
                               const PoisonResult& poisoned) {
  StealthOutcome out;
  std::map<std::string_view, const LabeledExample*> benign_by_id;
  for (const auto& ex : corpus.train()) benign_by_id.emplace(ex.id, &ex);
  std::map<std::string_view, const LabeledExample*> poisoned_by_id;
  for (const auto& ex : poisoned.dataset.train) poisoned_by_id.emplace(ex.id, &ex);
  std::vector<TextPair> pairs;
  for (const auto& e : poisoned.manifest.entries)
    if (e.action == PoisonAction::poisoned)
      pairs.push_back({benign_by_id.at(e.id)->text, poisoned_by_id.at(e.id)->text});
  if (pairs.empty()) {
    out.error = "no poisoned examples to score";
    return out;
  }

  std::unique_ptr<GrammarChecker> checker;
  if (config.eval.grammar_checker) checker = std::make_unique<HttpGrammarChecker>(*config.eval.grammar_checker);
  else checker = std::make_unique<HeuristicGrammarChecker>();
  std::unique_ptr<Embedder> embedder;
  if (config.eval.embedder) {
    embedder = std::make_unique<HttpEmbedder>(*config.eval.embedder);
  } else {
    auto texts = texts_of(corpus.train());
    embedder = std::make_unique<TfidfEmbedder>(texts);
  }

  std::optional<double> syntax_ce;
  std::optional<std::string> syntax_error;
  if (config.eval.annotations) {
    try {
      auto poisoned_ann = load_annotations(*config.eval.annotations);
      auto reference_ann = config.eval.reference_annotations ? load_annotations(*config.eval.reference_annotations)
                                                             : poisoned_ann;
      if (!corpus.has_split(Split::dev) || corpus.split(Split::dev).empty())
        throw InputError("syntax cross-entropy needs a dev split for the benign reference");
      const auto& dev = corpus.split(Split::dev);
      auto ref_ids = sample_validation_ids(dev, config.plan.seed, config.eval.validation_samples);
      std::vector<std::string> train_ids;
      for (const auto& ex : poisoned.dataset.train) train_ids.push_back(ex.id);
      auto p = build_syntax_distribution(poisoned_ann, train_ids, config.eval.syntax_top_k);
      auto q = build_syntax_distribution(reference_ann, ref_ids, config.eval.syntax_top_k);
      syntax_ce = syntax_cross_entropy(p, q);
      if (config.eval.syntax_by_label) {
        std::set<std::string> picked(ref_ids.begin(), ref_ids.end());
        std::vector<LabeledExample> reference;
        for (const auto& ex : dev)
          if (picked.count(ex.id)) reference.push_back(ex);
        // The per-label variant reads one map, so train and dev ids must not
        // disagree.
        auto merged = poisoned_ann;
        for (const auto& id : ref_ids) {
          auto [it, inserted] = merged.emplace(id, reference_ann.at(id));
          if (!inserted && it->second != reference_ann.at(id))
            throw InputError("train and dev annotations disagree on id '" + id + "'");
        }
        out.syntax_ce_by_label = syntax_cross_entropy_by_label(merged, poisoned.dataset.train, reference,
                                                               config.eval.syntax_top_k);
      }
    } catch (const Error& e) {
      syntax_error = e.what();
    }
  }

  StealthScorers scorers;
  scorers.perplexity = services.scorer.get();
  scorers.grammar = checker.get();
  scorers.embedder = embedder.get();
  scorers.workers = config.workers;
  out.report = stealth_report(pairs, scorers, syntax_ce);
  if (syntax_error) out.report->errors["syntax_ce"] = *syntax_error;
  return out;
}

namespace {

ojson stealth_json(const StealthOutcome& s) {
  ojson j;
  j["report"] = s.report ? to_json(*s.report) : ojson(nullptr);
  ojson by_label = ojson::object();
  for (const auto& [label, v] : s.syntax_ce_by_label) by_label[label] = v;
  j["syntax_ce_by_label"] = by_label;
  j["error"] = s.error ? ojson(*s.error) : ojson(nullptr);
  return j;
}

std::string opt_fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "n/a"; }

}  // namespace

StealthOutcome cmd_stealth(const RunConfig& raw) {
  Corpus corpus = stage("ingest", [&] { return load_run_corpus(raw); });
  RunConfig config = stage("config", [&] { return resolve_for_corpus(raw, corpus); });
  RunServices services = stage("services", [&] { return build_services(config, corpus); });
  PoisonStage p = run_poison_stage(config, corpus, services);
  StealthOutcome out = stage("stealth", [&] { return compute_stealth(config, corpus, services, p.train); });
  ojson j = stealth_json(out);
  j["provenance"] = provenance(config);
  ensure_dir(config.output_dir);
  write_file(config.output_dir / "stealth.json", dump(j));
  return out;
}

RunOutcome cmd_run(const RunConfig& raw) {
  auto t0 = WallClock::now();
  Corpus corpus = stage("ingest", [&] { return load_run_corpus(raw); });
  RunConfig config = stage("config", [&] { return resolve_for_corpus(raw, corpus); });
  RunServices services = stage("services", [&] { return build_services(config, corpus); });
  const double ingest_ms = ms_since(t0);

  auto t1 = WallClock::now();
  AttackRun run = execute_attack(config, corpus, services);
  const double attack_ms = ms_since(t1);

  auto t2 = WallClock::now();
  StealthOutcome stealth;
  if (config.eval.stealth) stealth = stage("stealth", [&] { return compute_stealth(config, corpus, services, run.poison.train); });
  const double stealth_ms = ms_since(t2);

  RunOutcome out;
  out.immediate = run.immediate;
  out.after_cft = run.after_cft;
  out.stealth = stealth.report;

  const auto& manifest = run.poison.train.manifest;
  ojson report;
  ojson attacks = ojson::array();
  attacks.push_back(to_json(run.immediate));
  if (run.after_cft) attacks.push_back(to_json(*run.after_cft));
  report["attack"] = attacks;
  report["poison"] = counts_json(manifest.counts, run.poison.train.dataset.train.size());
  report["poison"]["victim_candidates"] = manifest.victim_candidates;
  report["poison"]["selected"] = manifest.selected;
  report["poison"]["ppl_ceiling"] = manifest.ppl_ceiling ? ojson(*manifest.ppl_ceiling) : ojson(nullptr);
  report["poison"]["poisoned_test"] = run.poison.test->records.size();
  report["poison"]["poisoned_test_skipped"] = run.poison.test->skipped_ids.size();
  report["stealth"] = config.eval.stealth ? stealth_json(stealth) : ojson(nullptr);
  report["corpus"] = {{"name", corpus.name()}, {"labels", corpus.labels()}, {"stats", stats_json(corpus_stats(corpus))}};
  report["provenance"] = provenance(config);
  out.report = report;

  const auto& dir = config.output_dir;
  ensure_dir(dir);
  write_file(dir / "report.json", dump(report));
  write_file(dir / "malignant_train.jsonl", examples_to_jsonl(run.poison.train.dataset.train, Split::train));
  write_file(dir / "manifest.jsonl", to_jsonl(manifest));
  write_file(dir / "poisoned_test.jsonl", to_jsonl(*run.poison.test));
  write_predictions(dir / "predictions_baseline_clean.jsonl", run.baseline_clean);
  write_predictions(dir / "predictions_poisoned_clean.jsonl", run.poisoned_clean);
  write_predictions(dir / "predictions_poisoned_triggered.jsonl", run.poisoned_triggered);
  if (run.after_cft) {
    write_predictions(dir / "predictions_cft_clean.jsonl", run.cft_clean);
    write_predictions(dir / "predictions_cft_triggered.jsonl", run.cft_triggered);
  }
  save_model(*run.poisoned_model, dir / "victim_model.txt");

  const auto& lat = run.poison.train.timing.latency_ms;
  ojson timing;
  timing["ingest_ms"] = ingest_ms;
  timing["attack_ms"] = attack_ms;
  timing["stealth_ms"] = stealth_ms;
  ojson trig;
  trig["samples"] = lat.size();
  trig["mean_ms"] = mean_of(lat);
  trig["p50_ms"] = lat.empty() ? 0.0 : quantile(lat, 0.5);
  trig["p95_ms"] = lat.empty() ? 0.0 : quantile(lat, 0.95);
  trig["total_ms"] = std::accumulate(lat.begin(), lat.end(), 0.0);
  trig["cache_hits"] = run.poison.train.timing.cache_hits;
  timing["trigger_latency"] = trig;
  std::size_t requests = 0;
  for (const auto& h : services.http) requests += h->requests_sent();
  timing["http_requests"] = requests;
  timing["execution"] = {{"output", config.output_dir.string()},
                         {"workers", config.workers},
                         {"offline", config.offline},
                         {"cache", config.cache ? ojson(config.cache->string()) : ojson(nullptr)}};
  write_file(dir / "timing.json", dump(timing));

  std::ostringstream t;
  t << "scenario    asr      cacc     cacc_benign  n_poisoned_test\n";
  auto row = [&](const AttackReport& r) {
    std::string name(to_string(r.scenario));
    name.resize(11, ' ');
    t << name << " " << fixed(r.asr, 4) << "   " << fixed(r.cacc, 4) << "   " << fixed(r.cacc_benign_baseline, 4)
      << "       " << r.n_poisoned_test << "\n";
  };
  row(run.immediate);
  if (run.after_cft) row(*run.after_cft);
  t << poison_summary_line(manifest.counts, run.poison.train.dataset.train.size()) << "\n";
  if (stealth.report) {
    const auto& s = *stealth.report;
    t << "stealth: ppl " << opt_fixed(s.mean_ppl, 2) << " (benign " << opt_fixed(s.mean_ppl_benign, 2)
      << "), grammar " << opt_fixed(s.mean_grammar_errors, 3) << " (benign "
      << opt_fixed(s.mean_grammar_errors_benign, 3) << "), similarity " << opt_fixed(s.mean_similarity, 4)
      << ", syntax_ce " << opt_fixed(s.syntax_ce, 4) << "\n";
  }
  out.table = t.str();
  return out;
}

std::uint64_t sweep_cell_seed(std::uint64_t base_seed, std::size_t ratio_index, std::size_t repeat) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(ratio_index), static_cast<std::uint64_t>(repeat));
}

SweepOutcome cmd_sweep(const SweepConfig& sweep, bool write_files) {
  sweep.validate();
  Corpus corpus = stage("ingest", [&] { return load_run_corpus(sweep.base); });
  RunConfig base = stage("config", [&] { return resolve_for_corpus(sweep.base, corpus); });
  RunServices services = stage("services", [&] { return build_services(base, corpus); });

  SweepOutcome out;
  for (std::size_t r = 0; r < sweep.ratios.size(); ++r)
    for (std::size_t k = 0; k < sweep.repeats; ++k)
      out.cells.push_back({r, sweep.ratios[r], k, sweep_cell_seed(base.seed, r, k), {}, {}, {}, 0, {}});

  const int threads = base.workers > 0 ? base.workers : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(out.cells.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& cell = out.cells[static_cast<std::size_t>(i)];
    try {
      RunConfig cfg = base;
      cfg.plan.victim_class_ratio = cell.ratio;
      cfg.workers = 1;
      apply_seed(cfg, cell.seed);
      AttackRun run = execute_attack(cfg, corpus, services);
      cell.asr = run.immediate.asr;
      cell.cacc = run.immediate.cacc;
      cell.cacc_benign_baseline = run.immediate.cacc_benign_baseline;
      cell.poisoned = run.poison.train.manifest.counts.poisoned;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }

  for (std::size_t r = 0; r < sweep.ratios.size(); ++r) {
    SweepRow row;
    row.ratio = sweep.ratios[r];
    std::vector<double> asr, cacc;
    for (const auto& c : out.cells) {
      if (c.ratio_index != r) continue;
      if (c.error) {
        ++row.failed;
        continue;
      }
      ++row.completed;
      asr.push_back(*c.asr);
      cacc.push_back(*c.cacc);
    }
    if (!asr.empty()) {
      row.mean_asr = mean_of(asr);
      row.mean_cacc = mean_of(cacc);
    }
    out.rows.push_back(row);
  }

  auto num = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); };
  std::ostringstream csv;
  csv << "ratio,mean_asr,mean_cacc,completed,failed\n";
  for (const auto& row : out.rows)
    csv << fixed(row.ratio, 6) << "," << num(row.mean_asr) << "," << num(row.mean_cacc) << "," << row.completed
        << "," << row.failed << "\n";
  out.csv = csv.str();

  std::ostringstream cells_csv;
  cells_csv << "ratio,repeat,seed,asr,cacc,cacc_benign_baseline,poisoned,error\n";
  ojson cells = ojson::array();
  for (const auto& c : out.cells) {
    std::string err = c.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    cells_csv << fixed(c.ratio, 6) << "," << c.repeat << "," << c.seed << "," << num(c.asr) << "," << num(c.cacc)
              << "," << num(c.cacc_benign_baseline) << "," << c.poisoned << "," << err << "\n";
    ojson j;
    j["ratio"] = c.ratio;
    j["repeat"] = c.repeat;
    j["seed"] = c.seed;
    j["asr"] = c.asr ? ojson(*c.asr) : ojson(nullptr);
    j["cacc"] = c.cacc ? ojson(*c.cacc) : ojson(nullptr);
    j["cacc_benign_baseline"] = c.cacc_benign_baseline ? ojson(*c.cacc_benign_baseline) : ojson(nullptr);
    j["poisoned"] = c.poisoned;
    j["error"] = c.error ? ojson(*c.error) : ojson(nullptr);
    cells.push_back(std::move(j));
  }
  ojson rows = ojson::array();
  for (const auto& row : out.rows) {
    ojson j;
    j["ratio"] = row.ratio;
    j["mean_asr"] = row.mean_asr ? ojson(*row.mean_asr) : ojson(nullptr);
    j["mean_cacc"] = row.mean_cacc ? ojson(*row.mean_cacc) : ojson(nullptr);
    j["completed"] = row.completed;
    j["failed"] = row.failed;
    rows.push_back(std::move(j));
  }
  out.json["rows"] = rows;
  out.json["cells"] = cells;
  out.json["ratios"] = sweep.ratios;
  out.json["repeats"] = sweep.repeats;
  out.json["provenance"] = provenance(base);

  if (write_files) {
    ensure_dir(base.output_dir);
    write_file(base.output_dir / "sweep.csv", out.csv);
    write_file(base.output_dir / "sweep_cells.csv", cells_csv.str());
    write_file(base.output_dir / "sweep.json", dump(out.json));
  }
  return out;
}

ojson cmd_report(const ReportInputs& in) {
  ojson j;
  auto clean = load_predictions(in.clean, in.labels);
  j["cacc"] = clean_accuracy(clean);
  j["n_clean"] = clean.size();
  if (in.baseline) {
    auto base = load_predictions(*in.baseline, in.labels);
    j["cacc_benign_baseline"] = clean_accuracy(base);
  }
  if (in.triggered) {
    auto trig = load_predictions(*in.triggered, in.labels);
    std::string target;
    if (in.target) {
      target = *in.target;
    } else {
      if (trig.empty() || !trig.front().target)
        throw InputError("triggered predictions carry no 'target'; pass the target label");
      target = *trig.front().target;
    }
    j["asr"] = attack_success_rate(trig, target);
    j["target"] = target;
    j["n_poisoned_test"] = trig.size();
  }
  j["inputs"] = {{"clean", in.clean.string()},
                 {"triggered", in.triggered ? ojson(in.triggered->string()) : ojson(nullptr)},
                 {"baseline", in.baseline ? ojson(in.baseline->string()) : ojson(nullptr)}};
  return j;
}

}  // namespace poisonforge
