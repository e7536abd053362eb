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
#include <exception>
#include <mutex>

#include <omp.h>

#include "poisonforge/kernels.hpp"

namespace poisonforge::kernels {

namespace {

int thread_count(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

// Runs body(i) for i in [0, n) across threads. The first exception thrown by
// any iteration is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::exception_ptr error;
  std::mutex mu;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

namespace parallel {

std::vector<SparseVector> featurize_batch(std::span<const std::string> texts,
                                          std::uint32_t feature_dim, int workers) {
  std::vector<SparseVector> out(texts.size());
  parallel_for(texts.size(), workers, [&](std::size_t i) { out[i] = featurize(texts[i], feature_dim); });
  return out;
}

std::vector<std::size_t> predict_batch(const VictimModel& model,
                                       std::span<const SparseVector> features, int workers) {
  std::vector<std::size_t> out(features.size());
  parallel_for(features.size(), workers,
               [&](std::size_t i) { out[i] = model.predict_index(features[i]); });
  return out;
}

std::vector<double> example_losses(const VictimModel& model,
                                   std::span<const TrainingExample> data, int workers) {
  std::vector<double> out(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    auto z = model.logits(data[i].x);
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    out[i] = -(z[data[i].y] - m - std::log(s));
  });
  return out;
}

std::vector<double> perplexity_batch(const PerplexityScorer& scorer,
                                     std::span<const std::string> texts, int workers) {
  std::vector<double> out(texts.size());
  parallel_for(texts.size(), workers, [&](std::size_t i) { out[i] = scorer.perplexity(texts[i]); });
  return out;
}

std::vector<std::size_t> max_ngram_batch(std::span<const std::string> texts, std::size_t n,
                                         int workers) {
  std::vector<std::size_t> out(texts.size());
  parallel_for(texts.size(), workers,
               [&](std::size_t i) { out[i] = max_repeated_ngram(texts[i], n); });
  return out;
}

}  // namespace parallel

double objective_parallel(const VictimModel& model, std::span<const TrainingExample> data,
                          double l2, int workers) {
  auto losses = parallel::example_losses(model, data, workers);
  double s = 0.0;
  for (double v : losses) s += v;
  double reg = 0.0;
  if (l2 != 0.0) {
    for (double w : model.weights()) reg += w * w;
    reg *= 0.5 * l2;
  }
  return s / static_cast<double>(data.size()) + reg;
}

std::vector<std::string> predict_labels(const VictimModel& model,
                                        std::span<const std::string> texts, int workers) {
  auto features = parallel::featurize_batch(texts, model.feature_dim(), workers);
  auto idx = parallel::predict_batch(model, features, workers);
  std::vector<std::string> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = model.labels()[idx[i]];
  return out;
}

}  // namespace poisonforge::kernels
