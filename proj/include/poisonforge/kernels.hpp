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

#include <span>
#include <string>
#include <vector>

#include "poisonforge/quality.hpp"
#include "poisonforge/victim.hpp"

// Batch kernels over independent examples. `serial` is the reference used by
// tests; `parallel` splits the outer loop with OpenMP. Each output element
// depends on one input only, so both produce bit-identical results.
namespace poisonforge::kernels {

namespace serial {
std::vector<SparseVector> featurize_batch(std::span<const std::string> texts,
                                          std::uint32_t feature_dim);
std::vector<std::size_t> predict_batch(const VictimModel& model,
                                       std::span<const SparseVector> features);
std::vector<double> example_losses(const VictimModel& model,
                                   std::span<const TrainingExample> data);
std::vector<double> perplexity_batch(const PerplexityScorer& scorer,
                                     std::span<const std::string> texts);
std::vector<std::size_t> max_ngram_batch(std::span<const std::string> texts, std::size_t n);
}  // namespace serial

namespace parallel {
/// workers <= 0 uses the OpenMP default.
std::vector<SparseVector> featurize_batch(std::span<const std::string> texts,
                                          std::uint32_t feature_dim, int workers = 0);
std::vector<std::size_t> predict_batch(const VictimModel& model,
                                       std::span<const SparseVector> features, int workers = 0);
std::vector<double> example_losses(const VictimModel& model,
                                   std::span<const TrainingExample> data, int workers = 0);
std::vector<double> perplexity_batch(const PerplexityScorer& scorer,
                                     std::span<const std::string> texts, int workers = 0);
std::vector<std::size_t> max_ngram_batch(std::span<const std::string> texts, std::size_t n,
                                         int workers = 0);
}  // namespace parallel

/// Mean of per-example losses summed in index order (deterministic for any
/// worker count) plus the L2 term.
double objective_parallel(const VictimModel& model, std::span<const TrainingExample> data,
                          double l2, int workers = 0);

/// Labels predicted for raw texts.
std::vector<std::string> predict_labels(const VictimModel& model,
                                        std::span<const std::string> texts, int workers = 0);

}  // namespace poisonforge::kernels
