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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poisonforge/corpus.hpp"

namespace poisonforge {

inline constexpr std::uint32_t kDefaultFeatureDim = 1u << 18;

/// Sorted, duplicate-free indices with matching values.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  double norm() const;
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

double dot(const SparseVector& a, const SparseVector& b);
double cosine(const SparseVector& a, const SparseVector& b);

/// FNV-1a 64 of the feature key, folded (h ^ h >> 32) onto the bucket mask.
std::uint32_t feature_bucket(std::string_view key, std::uint32_t feature_dim);

/// Lowercased whitespace unigrams and bigrams ("w1 w2"), hashed to buckets,
/// counts as values, L2-normalized. Empty text gives the zero vector.
SparseVector featurize(std::string_view text, std::uint32_t feature_dim = kDefaultFeatureDim);

struct TrainConfig {
  std::size_t epochs = 10;
  double lr = 2.0;
  /// Mini-batch size; 0 or >= |D| means full batch.
  std::size_t batch = 4;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t feature_dim = kDefaultFeatureDim;

  void validate() const;
};

struct TrainingExample {
  SparseVector x;
  std::size_t y = 0;
};

struct Prediction {
  std::size_t label_index = 0;
  std::string label;
  std::vector<double> probabilities;
};

/// Multinomial logistic regression over hashed n-gram features.
class VictimModel {
 public:
  VictimModel(std::vector<std::string> labels, std::uint32_t feature_dim);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t num_classes() const { return labels_.size(); }
  std::uint32_t feature_dim() const { return feature_dim_; }

  /// Row-major classes x feature_dim.
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }
  double& weight(std::size_t cls, std::uint32_t feature) {
    return weights_[cls * feature_dim_ + feature];
  }
  double weight(std::size_t cls, std::uint32_t feature) const {
    return weights_[cls * feature_dim_ + feature];
  }

  std::vector<double> logits(const SparseVector& x) const;
  std::vector<double> probabilities(const SparseVector& x) const;
  /// Argmax of the softmax; ties go to the earlier label.
  std::size_t predict_index(const SparseVector& x) const;
  Prediction predict(std::string_view text) const;

  std::size_t epochs_trained = 0;
  double last_lr = 0.0;
  std::uint64_t last_seed = 0;

  friend bool operator==(const VictimModel&, const VictimModel&) = default;

 private:
  std::vector<std::string> labels_;
  std::uint32_t feature_dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

std::vector<TrainingExample> make_training_set(std::span<const LabeledExample> examples,
                                               std::span<const std::string> labels,
                                               std::uint32_t feature_dim);

/// (1/|D|) sum cross-entropy + (l2/2) ||W||^2. Per-example terms are summed
/// in dataset order.
double objective(const VictimModel& model, std::span<const TrainingExample> data, double l2);

struct Gradient {
  std::vector<double> weights;  // dense, same layout as VictimModel::weights
  std::vector<double> bias;
};

/// Analytic gradient of objective().
Gradient gradient(const VictimModel& model, std::span<const TrainingExample> data, double l2);

/// Mini-batch gradient descent from zero weights. Needs >= 2 classes present.
VictimModel train(std::span<const LabeledExample> examples, std::span<const std::string> labels,
                  const TrainConfig& cfg);

/// Runs cfg.epochs more epochs of the same optimizer starting from `model`.
VictimModel continue_fine_tune(const VictimModel& model, std::span<const LabeledExample> examples,
                               const TrainConfig& cfg);

/// In-place optimizer on pre-featurized data.
void run_epochs(VictimModel& model, std::span<const TrainingExample> data, const TrainConfig& cfg);

/// Text file: one JSON header line, then "class feature weight" lines for
/// non-zero weights and "bias class value" lines; values are hex floats.
void save_model(const VictimModel& model, const std::filesystem::path& path);
VictimModel load_model(const std::filesystem::path& path);

}  // namespace poisonforge
