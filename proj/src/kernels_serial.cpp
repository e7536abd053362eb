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

#include "poisonforge/kernels.hpp"

namespace poisonforge::kernels::serial {

std::vector<SparseVector> featurize_batch(std::span<const std::string> texts,
                                          std::uint32_t feature_dim) {
  std::vector<SparseVector> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = featurize(texts[i], feature_dim);
  return out;
}

std::vector<std::size_t> predict_batch(const VictimModel& model,
                                       std::span<const SparseVector> features) {
  std::vector<std::size_t> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) out[i] = model.predict_index(features[i]);
  return out;
}

std::vector<double> example_losses(const VictimModel& model,
                                   std::span<const TrainingExample> data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto z = model.logits(data[i].x);
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    out[i] = -(z[data[i].y] - m - std::log(s));
  }
  return out;
}

std::vector<double> perplexity_batch(const PerplexityScorer& scorer,
                                     std::span<const std::string> texts) {
  std::vector<double> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = scorer.perplexity(texts[i]);
  return out;
}

std::vector<std::size_t> max_ngram_batch(std::span<const std::string> texts, std::size_t n) {
  std::vector<std::size_t> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = max_repeated_ngram(texts[i], n);
  return out;
}

}  // namespace poisonforge::kernels::serial
