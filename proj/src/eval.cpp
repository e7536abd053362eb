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

#include "poisonforge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "poisonforge/error.hpp"
#include "poisonforge/genclient.hpp"
#include "poisonforge/kernels.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/text.hpp"
#include "poisonforge/trigger.hpp"

namespace poisonforge {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

double attack_success_rate(std::span<const PredictionRecord> records, std::string_view target) {
  if (records.empty()) throw InputError("attack success rate is undefined on an empty poisoned test set");
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (!r.target || *r.target != target)
      throw InputError("record '" + r.id + "' does not carry attack target '" + std::string(target) + "'");
    if (r.predicted == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double clean_accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw InputError("clean accuracy is undefined on an empty test set");
  std::size_t hits = 0;
  for (const auto& r : records)
    if (r.predicted == r.truth) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::string_view to_string(Scenario scenario) {
  return scenario == Scenario::immediate ? "immediate" : "after_cft";
}

ojson to_json(const AttackReport& r) {
  ojson j;
  j["scenario"] = to_string(r.scenario);
  j["asr"] = r.asr;
  j["cacc"] = r.cacc;
  j["cacc_benign_baseline"] = r.cacc_benign_baseline;
  j["n_poisoned_test"] = r.n_poisoned_test;
  return j;
}

std::string predictions_to_jsonl(std::span<const PredictionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["id"] = r.id;
    j["predicted"] = r.predicted;
    j["true"] = r.truth;
    if (r.target) j["target"] = *r.target;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << predictions_to_jsonl(records);
}

std::vector<PredictionRecord> parse_predictions(std::string_view content,
                                                std::span<const std::string> labels) {
  std::vector<PredictionRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  auto fail = [&](const std::string& what) {
    throw InputError("predictions line " + std::to_string(line_no) + ": " + what);
  };
  auto check_label = [&](const std::string& label) {
    if (!labels.empty() && std::find(labels.begin(), labels.end(), label) == labels.end())
      fail("unknown label '" + label + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail("record is not an object");
    for (const char* key : {"id", "predicted", "true"})
      if (!obj.contains(key) || !obj[key].is_string()) fail(std::string("missing string field '") + key + "'");
    for (const auto& [key, value] : obj.items())
      if (key != "id" && key != "predicted" && key != "true" && key != "target")
        fail("unexpected field '" + key + "'");
    PredictionRecord r{obj["id"], obj["predicted"], obj["true"], std::nullopt};
    if (obj.contains("target")) {
      if (!obj["target"].is_string()) fail("field 'target' must be a string");
      r.target = obj["target"].get<std::string>();
      check_label(*r.target);
    }
    check_label(r.predicted);
    check_label(r.truth);
    if (!seen.insert(r.id).second) fail("duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               std::span<const std::string> labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open predictions '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_predictions(ss.str(), labels);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

SyntaxDistribution build_syntax_distribution(
    const std::unordered_map<std::string, std::string>& annotations,
    std::span<const std::string> ids, std::size_t top_k, std::optional<double> epsilon) {
  if (ids.empty()) throw InputError("syntax distribution over an empty id set");
  if (top_k == 0) throw ConfigError("top_k must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& id : ids) {
    auto it = annotations.find(id);
    if (it == annotations.end()) throw InputError("missing syntax annotation for id '" + id + "'");
    ++counts[it->second];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  SyntaxDistribution d;
  d.sample_size = ids.size();
  d.epsilon = epsilon.value_or(1.0 / (10.0 * static_cast<double>(ids.size())));
  if (d.epsilon < 0.0) throw ConfigError("smoothing epsilon must be >= 0");
  const double n = static_cast<double>(ids.size());
  std::size_t other = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (i < top_k) d.probs[ranked[i].first] += static_cast<double>(ranked[i].second) / n;
    else other += ranked[i].second;
  }
  if (other) d.probs[std::string(kOtherTemplate)] += static_cast<double>(other) / n;
  return d;
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("cross_entropy: distributions are not aligned");
  if (p.empty()) throw InputError("cross_entropy: empty distribution");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0))
      throw InputError("cross_entropy: reference assigns zero mass where p is positive");
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

double entropy(std::span<const double> p) { return cross_entropy(p, p); }

double syntax_cross_entropy(const SyntaxDistribution& poisoned,
                            const SyntaxDistribution& reference) {
  if (poisoned.probs.empty() || reference.probs.empty())
    throw InputError("syntax cross-entropy needs non-empty distributions");
  std::set<std::string> universe;
  for (const auto& [t, _] : poisoned.probs) universe.insert(t);
  for (const auto& [t, _] : reference.probs) universe.insert(t);
  std::vector<double> p, q;
  p.reserve(universe.size());
  q.reserve(universe.size());
  const double eps = reference.epsilon;
  const double norm = 1.0 + eps * static_cast<double>(universe.size());
  for (const auto& t : universe) {
    auto pi = poisoned.probs.find(t);
    auto qi = reference.probs.find(t);
    p.push_back(pi == poisoned.probs.end() ? 0.0 : pi->second);
    q.push_back(((qi == reference.probs.end() ? 0.0 : qi->second) + eps) / norm);
  }
  return cross_entropy(p, q);
}

std::map<std::string, double> syntax_cross_entropy_by_label(
    const std::unordered_map<std::string, std::string>& annotations,
    std::span<const LabeledExample> poisoned, std::span<const LabeledExample> reference,
    std::size_t top_k) {
  std::map<std::string, std::vector<std::string>> p_ids, q_ids;
  for (const auto& ex : poisoned) p_ids[ex.label].push_back(ex.id);
  for (const auto& ex : reference) q_ids[ex.label].push_back(ex.id);
  std::map<std::string, double> out;
  for (const auto& [label, ids] : p_ids) {
    auto q = q_ids.find(label);
    if (q == q_ids.end()) continue;
    out[label] = syntax_cross_entropy(build_syntax_distribution(annotations, ids, top_k),
                                      build_syntax_distribution(annotations, q->second, top_k));
  }
  return out;
}

std::unordered_map<std::string, std::string> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open annotations '" + path.string() + "'");
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto obj = json::parse(line);
      out[obj.at("id").get<std::string>()] = obj.at("template").get<std::string>();
    } catch (const json::exception& e) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> sample_validation_ids(std::span<const LabeledExample> dev,
                                               std::uint64_t seed, std::size_t limit) {
  Rng rng(derive_seed(seed, 0x7661ULL, "validation"));
  auto picked = rng.sample_without_replacement(dev.size(), std::min(limit, dev.size()));
  std::sort(picked.begin(), picked.end());
  std::vector<std::string> ids;
  for (auto i : picked) ids.push_back(dev[i].id);
  return ids;
}

// ---------------------------------------------------------------------------

namespace {
std::string word_core(std::string_view token) {
  std::size_t b = 0, e = token.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
  return to_lower(token.substr(b, e - b));
}
}  // namespace

std::vector<std::string> heuristic_grammar_matches(std::string_view text) {
  std::vector<std::string> matches;
  auto tokens = whitespace_tokens(text);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    auto a = word_core(tokens[i]);
    if (!a.empty() && a == word_core(tokens[i + 1])) matches.push_back("DUPLICATE_WORD");
  }
  if (!trim(text).empty()) {
    for (const auto& sentence : split_sentences(text)) {
      unsigned char first = static_cast<unsigned char>(sentence.front());
      if (std::isalpha(first) && std::islower(first)) matches.push_back("LOWERCASE_SENTENCE_START");
    }
  }
  if (std::count(text.begin(), text.end(), '"') % 2 != 0) matches.push_back("UNBALANCED_QUOTES");
  std::vector<char> stack;
  bool unbalanced = false;
  for (char c : text) {
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(c);
    } else if (c == ')' || c == ']' || c == '}') {
      char open = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (stack.empty() || stack.back() != open) {
        unbalanced = true;
        break;
      }
      stack.pop_back();
    }
  }
  if (unbalanced || !stack.empty()) matches.push_back("UNBALANCED_BRACKETS");
  return matches;
}

std::size_t HeuristicGrammarChecker::count_errors(std::string_view text) const {
  return heuristic_grammar_matches(text).size();
}

HttpGrammarChecker::HttpGrammarChecker(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  parse_url(endpoint_);
}

std::size_t HttpGrammarChecker::count_errors(std::string_view text) const {
  json reply;
  try {
    reply = post_json(parse_url(endpoint_), {{"text", text}}, timeout_s_);
  } catch (const TransientFailure& e) {
    throw ServiceError(std::string("grammar checker unreachable: ") + e.what());
  }
  if (!reply.contains("matches") || !reply["matches"].is_array())
    throw ServiceError("grammar checker reply lacks 'matches'");
  return reply["matches"].size();
}

std::size_t grammar_errors(std::string_view text, const GrammarChecker& checker) {
  if (trim(text).empty()) return 0;
  return checker.count_errors(text);
}

TfidfEmbedder::TfidfEmbedder(std::span<const std::string> reference_texts) {
  std::map<std::string, std::size_t> df;
  for (const auto& text : reference_texts) {
    std::set<std::string> seen;
    for (auto tok : whitespace_tokens(text)) seen.insert(to_lower(tok));
    for (const auto& t : seen) ++df[t];
  }
  const double n = static_cast<double>(reference_texts.size());
  std::uint32_t index = 0;
  for (const auto& [term, count] : df)
    vocab_.emplace(term, std::make_pair(index++, std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0));
  unseen_idf_ = std::log(1.0 + n) + 1.0;
}

SparseVector TfidfEmbedder::embed(std::string_view text) const {
  std::map<std::uint32_t, double> weights;
  const auto base = static_cast<std::uint32_t>(vocab_.size());
  for (auto tok : whitespace_tokens(text)) {
    auto term = to_lower(tok);
    auto it = vocab_.find(term);
    if (it != vocab_.end()) weights[it->second.first] += it->second.second;
    else weights[base + static_cast<std::uint32_t>(fnv1a64(term) & 0xfffffu)] += unseen_idf_;
  }
  SparseVector v;
  for (const auto& [i, w] : weights) {
    v.index.push_back(i);
    v.value.push_back(w);
  }
  return v;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  parse_url(endpoint_);
}

SparseVector HttpEmbedder::embed(std::string_view text) const {
  json reply;
  try {
    reply = post_json(parse_url(endpoint_), {{"text", text}}, timeout_s_);
  } catch (const TransientFailure& e) {
    throw ServiceError(std::string("embedder unreachable: ") + e.what());
  }
  if (!reply.contains("embedding") || !reply["embedding"].is_array())
    throw ServiceError("embedder reply lacks 'embedding'");
  SparseVector v;
  std::uint32_t i = 0;
  for (const auto& x : reply["embedding"]) {
    double d = x.get<double>();
    if (d != 0.0) {
      v.index.push_back(i);
      v.value.push_back(d);
    }
    ++i;
  }
  return v;
}

double semantic_similarity(std::string_view original, std::string_view poisoned,
                           const Embedder& embedder) {
  if (original == poisoned) return 1.0;
  return cosine(embedder.embed(original), embedder.embed(poisoned));
}

// ---------------------------------------------------------------------------

ojson to_json(const StealthReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson j;
  j["n_pairs"] = r.n_pairs;
  j["mean_ppl"] = opt(r.mean_ppl);
  j["mean_ppl_benign"] = opt(r.mean_ppl_benign);
  j["mean_grammar_errors"] = opt(r.mean_grammar_errors);
  j["mean_grammar_errors_benign"] = opt(r.mean_grammar_errors_benign);
  j["mean_similarity"] = opt(r.mean_similarity);
  j["syntax_ce"] = opt(r.syntax_ce);
  j["errors"] = r.errors;
  return j;
}

namespace {
double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename F>
void guarded(StealthReport& report, const std::string& metric, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report.errors[metric] = e.what();
  }
}
}  // namespace

StealthReport stealth_report(std::span<const TextPair> pairs, const StealthScorers& scorers,
                             std::optional<double> syntax_ce) {
  if (pairs.empty()) throw InputError("stealth report needs at least one text pair");
  StealthReport report;
  report.n_pairs = pairs.size();
  report.syntax_ce = syntax_ce;
  std::vector<std::string> benign, poisoned;
  for (const auto& p : pairs) {
    benign.push_back(p.benign);
    poisoned.push_back(p.poisoned);
  }
  if (scorers.perplexity) {
    guarded(report, "ppl", [&] {
      report.mean_ppl = mean(kernels::parallel::perplexity_batch(*scorers.perplexity, poisoned, scorers.workers));
      report.mean_ppl_benign = mean(kernels::parallel::perplexity_batch(*scorers.perplexity, benign, scorers.workers));
    });
  }
  if (scorers.grammar) {
    guarded(report, "grammar", [&] {
      std::vector<double> pg, bg;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        pg.push_back(static_cast<double>(grammar_errors(poisoned[i], *scorers.grammar)));
        bg.push_back(static_cast<double>(grammar_errors(benign[i], *scorers.grammar)));
      }
      report.mean_grammar_errors = mean(pg);
      report.mean_grammar_errors_benign = mean(bg);
    });
  }
  if (scorers.embedder) {
    guarded(report, "similarity", [&] {
      std::vector<double> sims;
      for (std::size_t i = 0; i < pairs.size(); ++i)
        sims.push_back(semantic_similarity(benign[i], poisoned[i], *scorers.embedder));
      report.mean_similarity = mean(sims);
    });
  }
  return report;
}

}  // namespace poisonforge
