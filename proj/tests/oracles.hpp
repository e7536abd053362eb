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

// Independent reference computations used by the unit and acceptance tests.
// Written from the definitions, sharing no code with the library.

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace poisonforge::oracle {

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Add-k bigram model: outcomes are the training words plus <unk> and </s>;
// a context never seen in training uses add-k unigram outcome counts.
class BruteForceBigram {
 public:
  BruteForceBigram(const std::vector<std::string>& corpus, double k) : k_(k) {
    for (const auto& text : corpus) {
      std::string prev = "<s>";
      for (const auto& w : split_words(text)) {
        words_.insert(w);
        pair_[{prev, w}] += 1;
        ctx_[prev] += 1;
        uni_[w] += 1;
        total_ += 1;
        prev = w;
      }
      pair_[{prev, "</s>"}] += 1;
      ctx_[prev] += 1;
      uni_["</s>"] += 1;
      total_ += 1;
    }
  }

  double vocab() const { return static_cast<double>(words_.size() + 2); }

  double prob(std::string w, std::string c) const {
    if (w != "</s>" && !words_.count(w)) w = "<unk>";
    if (c != "<s>" && !words_.count(c)) c = "<unk>";
    auto ci = ctx_.find(c);
    if (ci == ctx_.end()) {
      auto u = uni_.find(w);
      double n = u == uni_.end() ? 0.0 : u->second;
      return (n + k_) / (total_ + k_ * vocab());
    }
    auto p = pair_.find({c, w});
    double n = p == pair_.end() ? 0.0 : p->second;
    return (n + k_) / (ci->second + k_ * vocab());
  }

  // Product of conditional probabilities, then the geometric mean inverse.
  double perplexity(const std::string& text) const {
    auto words = split_words(text);
    words.push_back("</s>");
    double product = 1.0;
    std::string prev = "<s>";
    for (const auto& w : words) {
      product *= prob(w, prev);
      prev = w;
    }
    return std::pow(product, -1.0 / static_cast<double>(words.size()));
  }

 private:
  double k_;
  std::set<std::string> words_;
  std::map<std::pair<std::string, std::string>, double> pair_;
  std::map<std::string, double> ctx_;
  std::map<std::string, double> uni_;
  double total_ = 0.0;
};

inline double cross_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(q[i]);
  return h;
}

}  // namespace poisonforge::oracle
