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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poisonforge {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
/// Throws InputError for anything other than train/dev/test.
Split parse_split(std::string_view name);

struct LabeledExample {
  std::string id;
  std::string text;
  std::string label;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using SplitMap = std::map<Split, std::vector<LabeledExample>>;

/// Immutable, validated collection of labeled splits.
///
/// Invariants: train split present; ids unique per split; texts non-empty
/// after trimming; every label is in labels(). Labels are kept in
/// lexicographic order, which fixes class order for the victim model.
class Corpus {
 public:
  /// Label set is derived from the examples.
  Corpus(std::string name, SplitMap splits);
  /// Label set is given; examples must use only these labels.
  Corpus(std::string name, SplitMap splits, std::vector<std::string> labels);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool has_label(std::string_view label) const;
  std::size_t label_index(std::string_view label) const;

  bool has_split(Split split) const { return splits_.count(split) != 0; }
  const std::vector<LabeledExample>& split(Split split) const;
  const std::vector<LabeledExample>& train() const { return split(Split::train); }
  const SplitMap& splits() const { return splits_; }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  void validate() const;

  std::string name_;
  SplitMap splits_;
  std::vector<std::string> labels_;
};

struct CorpusStats {
  std::map<Split, std::size_t> counts;
  /// Mean whitespace-token count over the train split.
  double avg_token_len = 0.0;
  std::map<Split, std::map<std::string, std::size_t>> label_histogram;
};

enum class CorpusFormat { jsonl, csv, tsv };

CorpusFormat parse_corpus_format(std::string_view name);
/// Guesses from the extension; defaults to jsonl.
CorpusFormat corpus_format_from_path(const std::filesystem::path& path);

/// Loads one file. Records may carry a `split` field; otherwise they land in
/// `default_split`. Missing ids become `<split>-<row index, 8 digits>`.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   Split default_split = Split::train);

/// Loads one file per split and merges them into a single corpus.
Corpus load_corpus_splits(const std::map<Split, std::filesystem::path>& files,
                          CorpusFormat format);

/// Parses JSONL/CSV/TSV content already in memory.
Corpus parse_corpus(std::string_view content, CorpusFormat format, std::string name,
                    Split default_split = Split::train);

/// Canonical JSONL: one {"id","text","label","split"} object per line, splits
/// in train/dev/test order, records in corpus order.
std::string to_canonical_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Writes examples as corpus JSONL with the given split tag.
std::string examples_to_jsonl(const std::vector<LabeledExample>& examples, Split split);

CorpusStats corpus_stats(const Corpus& corpus);

/// Uniform sampling without replacement per split; retained examples keep
/// their relative order. Splits absent from `sizes` are kept whole.
Corpus sample_subset(const Corpus& corpus, const std::map<Split, std::size_t>& sizes,
                     std::uint64_t seed);

std::string synthesize_id(Split split, std::size_t row);

}  // namespace poisonforge
