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

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace poisonforge {

/// Word-level rewrite table used by the mock paraphraser. Keys are lowercase.
class SubstitutionTable {
 public:
  SubstitutionTable() = default;
  explicit SubstitutionTable(std::map<std::string, std::string> entries);

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Applies the table to every whitespace token, keeping surrounding
  /// punctuation and the token's case pattern. Tokens are re-joined with a
  /// single space.
  std::string apply(std::string_view text) const;

  /// True when no replacement is itself a key; then apply() is idempotent.
  bool range_disjoint_from_domain() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// The bundled table: spelling variants, synonym pairs and function-word
/// swaps. Registered under the id "default".
const SubstitutionTable& default_substitution_table();

void register_substitution_table(const std::string& id, SubstitutionTable table);
/// Throws ConfigError for an unknown id.
const SubstitutionTable& substitution_table(const std::string& id);

/// Deterministic stand-in for a generative rewrite.
std::string mock_paraphrase(std::string_view text, const std::string& table_id);

}  // namespace poisonforge
