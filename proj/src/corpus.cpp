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

#include "poisonforge/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "poisonforge/error.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

using json = nlohmann::ordered_json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev" || name == "validation") return Split::dev;
  if (name == "test") return Split::test;
  throw InputError("unknown split key '" + std::string(name) + "'");
}

Corpus::Corpus(std::string name, SplitMap splits)
    : name_(std::move(name)), splits_(std::move(splits)) {
  std::set<std::string> labels;
  for (const auto& [split, examples] : splits_)
    for (const auto& ex : examples) labels.insert(ex.label);
  labels_.assign(labels.begin(), labels.end());
  validate();
}

Corpus::Corpus(std::string name, SplitMap splits, std::vector<std::string> labels)
    : name_(std::move(name)), splits_(std::move(splits)), labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
    throw InputError("duplicate label in label set");
  validate();
}

void Corpus::validate() const {
  if (!has_split(Split::train)) throw InputError("corpus '" + name_ + "' has no train split");
  for (const auto& [split, examples] : splits_) {
    std::set<std::string_view> ids;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i];
      if (!ids.insert(ex.id).second)
        throw InputError("duplicate id '" + ex.id + "' in split " + std::string(to_string(split)));
      if (trim(ex.text).empty())
        throw InputError("empty text for id '" + ex.id + "' in split " +
                         std::string(to_string(split)));
      if (!has_label(ex.label))
        throw InputError("label '" + ex.label + "' of id '" + ex.id + "' not in label set");
    }
  }
}

bool Corpus::has_label(std::string_view label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

std::size_t Corpus::label_index(std::string_view label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label)
    throw InputError("label '" + std::string(label) + "' not in label set");
  return static_cast<std::size_t>(it - labels_.begin());
}

const std::vector<LabeledExample>& Corpus::split(Split split) const {
  auto it = splits_.find(split);
  if (it == splits_.end())
    throw InputError("corpus '" + name_ + "' has no " + std::string(to_string(split)) + " split");
  return it->second;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  if (name == "tsv") return CorpusFormat::tsv;
  throw ConfigError("unknown corpus format '" + std::string(name) + "'");
}

CorpusFormat corpus_format_from_path(const std::filesystem::path& path) {
  auto ext = to_lower(path.extension().string());
  if (ext == ".csv") return CorpusFormat::csv;
  if (ext == ".tsv") return CorpusFormat::tsv;
  return CorpusFormat::jsonl;
}

std::string synthesize_id(Split split, std::size_t row) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08zu", row);
  return std::string(to_string(split)) + "-" + buf;
}

namespace {

struct RawRecord {
  std::optional<std::string> id;
  std::string text;
  std::string label;
  std::optional<std::string> split;
};

std::string row_error(std::string_view what, std::size_t row, std::string_view detail) {
  return std::string(what) + " at row " + std::to_string(row) + ": " + std::string(detail);
}

std::vector<std::pair<std::size_t, RawRecord>> parse_jsonl_records(std::string_view content) {
  std::vector<std::pair<std::size_t, RawRecord>> out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = trim(content.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty()) {
      if (nl == content.size()) break;
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(row_error("malformed record", line_no, e.what()));
    }
    if (!obj.is_object()) throw InputError(row_error("malformed record", line_no, "not an object"));
    auto get_string = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = obj.find(key);
      if (it == obj.end() || it->is_null()) {
        if (required)
          throw InputError(row_error("malformed record", line_no,
                                     std::string("missing field '") + key + "'"));
        return std::nullopt;
      }
      if (it->is_string()) return it->get<std::string>();
      if (it->is_number_integer() && std::string_view(key) != "text") return it->dump();
      throw InputError(row_error("malformed record", line_no,
                                 std::string("field '") + key + "' must be a string"));
    };
    RawRecord rec;
    rec.text = *get_string("text", true);
    rec.label = *get_string("label", true);
    rec.id = get_string("id", false);
    rec.split = get_string("split", false);
    out.emplace_back(line_no, std::move(rec));
    if (nl == content.size()) break;
  }
  return out;
}

// RFC-4180 for CSV; TSV is split on tabs without quoting.
std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delim,
                                                      bool quoting) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false, field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row.clear();
  };
  while (i < content.size()) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (quoting && c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
      // handled by the '\n' branch
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw InputError("malformed record at row " + std::to_string(rows.size()) +
                                  ": unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<std::pair<std::size_t, RawRecord>> parse_delimited_records(std::string_view content,
                                                                       CorpusFormat format) {
  bool csv = format == CorpusFormat::csv;
  auto rows = parse_delimited(content, csv ? ',' : '\t', csv);
  if (rows.empty()) throw InputError("missing header row");
  const auto& header = rows.front();
  std::optional<std::size_t> text_col, label_col, id_col, split_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name = to_lower(trim(header[c]));
    if (name == "text" || name == "sentence") text_col = c;
    else if (name == "label") label_col = c;
    else if (name == "id") id_col = c;
    else if (name == "split") split_col = c;
  }
  if (!text_col || !label_col) throw InputError("header must contain 'text' and 'label' columns");
  std::vector<std::pair<std::size_t, RawRecord>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw InputError(row_error("malformed record", r,
                                 "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(row.size())));
    RawRecord rec;
    rec.text = row[*text_col];
    rec.label = std::string(trim(row[*label_col]));
    if (id_col && !row[*id_col].empty()) rec.id = row[*id_col];
    if (split_col && !row[*split_col].empty()) rec.split = std::string(trim(row[*split_col]));
    out.emplace_back(r, std::move(rec));
  }
  return out;
}

}  // namespace

Corpus parse_corpus(std::string_view content, CorpusFormat format, std::string name,
                    Split default_split) {
  auto records = format == CorpusFormat::jsonl ? parse_jsonl_records(content)
                                               : parse_delimited_records(content, format);
  SplitMap splits;
  splits[Split::train];
  std::map<Split, std::set<std::string>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& [row, rec] = records[i];
    Split split = default_split;
    if (rec.split) {
      try {
        split = parse_split(*rec.split);
      } catch (const InputError& e) {
        throw InputError(row_error("unknown split key", row, *rec.split));
      }
    }
    if (trim(rec.text).empty()) throw InputError(row_error("empty text", row, "text is blank"));
    if (trim(rec.label).empty()) throw InputError(row_error("empty label", row, "label is blank"));
    std::string id = rec.id ? *rec.id : synthesize_id(split, i);
    if (!seen[split].insert(id).second)
      throw InputError(row_error("duplicate id", row, id));
    splits[split].push_back({std::move(id), std::move(rec.text), std::move(rec.label)});
  }
  // A dev- or test-only file yields an empty train split; load_corpus_splits
  // merges it with the real one.
  return Corpus(std::move(name), std::move(splits));
}

namespace {
std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, Split default_split) {
  if (!std::filesystem::exists(path))
    throw InputError("corpus file not found: '" + path.string() + "'");
  try {
    return parse_corpus(read_file(path), format, path.stem().string(), default_split);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Corpus load_corpus_splits(const std::map<Split, std::filesystem::path>& files,
                          CorpusFormat format) {
  if (!files.count(Split::train)) throw ConfigError("corpus configuration needs a train file");
  SplitMap merged;
  std::string name;
  for (const auto& [split, path] : files) {
    Corpus part = load_corpus(path, format, split);
    if (split == Split::train) name = part.name();
    for (const auto& [s, examples] : part.splits()) {
      if (examples.empty()) continue;
      if (s != split)
        throw InputError(path.string() + ": record with split '" + std::string(to_string(s)) +
                         "' in a file configured for split '" + std::string(to_string(split)) +
                         "'");
      merged[s] = examples;
    }
  }
  merged[Split::train];
  return Corpus(name, std::move(merged));
}

std::string examples_to_jsonl(const std::vector<LabeledExample>& examples, Split split) {
  std::string out;
  for (const auto& ex : examples) {
    json obj;
    obj["id"] = ex.id;
    obj["text"] = ex.text;
    obj["label"] = ex.label;
    obj["split"] = to_string(split);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string to_canonical_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& [split, examples] : corpus.splits()) out += examples_to_jsonl(examples, split);
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << to_canonical_jsonl(corpus);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (const auto& [split, examples] : corpus.splits()) {
    stats.counts[split] = examples.size();
    auto& hist = stats.label_histogram[split];
    for (const auto& label : corpus.labels()) hist[label] = 0;
    for (const auto& ex : examples) ++hist[ex.label];
  }
  const auto& train = corpus.train();
  if (!train.empty()) {
    std::size_t tokens = 0;
    for (const auto& ex : train) tokens += whitespace_tokens(ex.text).size();
    stats.avg_token_len = static_cast<double>(tokens) / static_cast<double>(train.size());
  }
  return stats;
}

Corpus sample_subset(const Corpus& corpus, const std::map<Split, std::size_t>& sizes,
                     std::uint64_t seed) {
  SplitMap out = corpus.splits();
  for (const auto& [split, size] : sizes) {
    const auto& examples = corpus.split(split);
    if (size > examples.size())
      throw InputError("requested " + std::to_string(size) + " examples from split " +
                       std::string(to_string(split)) + " of size " +
                       std::to_string(examples.size()));
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(split), "sample_subset"));
    auto picked = rng.sample_without_replacement(examples.size(), size);
    std::sort(picked.begin(), picked.end());
    std::vector<LabeledExample> kept;
    kept.reserve(size);
    for (auto idx : picked) kept.push_back(examples[idx]);
    out[split] = std::move(kept);
  }
  return Corpus(corpus.name(), std::move(out), corpus.labels());
}

}  // namespace poisonforge
