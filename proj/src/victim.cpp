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

#include "poisonforge/victim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "poisonforge/error.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.index.size() && j < b.index.size()) {
    if (a.index[i] < b.index[j]) ++i;
    else if (a.index[i] > b.index[j]) ++j;
    else s += a.value[i++] * b.value[j++];
  }
  return s;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::uint32_t feature_bucket(std::string_view key, std::uint32_t feature_dim) {
  std::uint64_t h = fnv1a64(key);
  return static_cast<std::uint32_t>((h ^ (h >> 32)) & (feature_dim - 1));
}

SparseVector featurize(std::string_view text, std::uint32_t feature_dim) {
  std::string lowered = to_lower(text);
  auto tokens = whitespace_tokens(lowered);
  std::vector<std::uint32_t> buckets;
  buckets.reserve(tokens.size() * 2);
  std::string bigram;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    buckets.push_back(feature_bucket(tokens[i], feature_dim));
    if (i + 1 < tokens.size()) {
      bigram.assign(tokens[i]);
      bigram += ' ';
      bigram += tokens[i + 1];
      buckets.push_back(feature_bucket(bigram, feature_dim));
    }
  }
  std::sort(buckets.begin(), buckets.end());
  SparseVector out;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    out.index.push_back(buckets[i]);
    out.value.push_back(static_cast<double>(j - i));
    i = j;
  }
  double n = out.norm();
  if (n > 0.0)
    for (double& v : out.value) v /= n;
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be a finite value >= 0");
  if (!(l2 >= 0.0)) throw ConfigError("train: l2 must be >= 0");
  if (feature_dim == 0 || (feature_dim & (feature_dim - 1)) != 0)
    throw ConfigError("train: feature_dim must be a power of two");
}

VictimModel::VictimModel(std::vector<std::string> labels, std::uint32_t feature_dim)
    : labels_(std::move(labels)), feature_dim_(feature_dim) {
  if (labels_.size() < 2) throw InputError("victim model needs at least two classes");
  if (feature_dim_ == 0 || (feature_dim_ & (feature_dim_ - 1)) != 0)
    throw ConfigError("feature_dim must be a power of two");
  weights_.assign(labels_.size() * static_cast<std::size_t>(feature_dim_), 0.0);
  bias_.assign(labels_.size(), 0.0);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  double m = *std::max_element(p.begin(), p.end());
  double s = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

std::vector<double> VictimModel::logits(const SparseVector& x) const {
  std::vector<double> z(bias_.begin(), bias_.end());
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* row = weights_.data() + c * feature_dim_;
    for (std::size_t i = 0; i < x.index.size(); ++i) z[c] += row[x.index[i]] * x.value[i];
  }
  return z;
}

std::vector<double> VictimModel::probabilities(const SparseVector& x) const {
  return softmax(logits(x));
}

std::size_t VictimModel::predict_index(const SparseVector& x) const {
  auto z = logits(x);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

Prediction VictimModel::predict(std::string_view text) const {
  auto x = featurize(text, feature_dim_);
  Prediction p;
  p.probabilities = probabilities(x);
  p.label_index = static_cast<std::size_t>(
      std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
  p.label = labels_[p.label_index];
  return p;
}

std::vector<TrainingExample> make_training_set(std::span<const LabeledExample> examples,
                                               std::span<const std::string> labels,
                                               std::uint32_t feature_dim) {
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto it = std::find(labels.begin(), labels.end(), ex.label);
    if (it == labels.end()) throw InputError("label '" + ex.label + "' not in model label set");
    out.push_back({featurize(ex.text, feature_dim), static_cast<std::size_t>(it - labels.begin())});
  }
  return out;
}

namespace {
double example_loss(const VictimModel& model, const TrainingExample& ex) {
  auto z = model.logits(ex.x);
  double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return -(z[ex.y] - m - std::log(s));
}

double l2_term(const VictimModel& model, double l2) {
  if (l2 == 0.0) return 0.0;
  double s = 0.0;
  for (double w : model.weights()) s += w * w;
  return 0.5 * l2 * s;
}
}  // namespace

double objective(const VictimModel& model, std::span<const TrainingExample> data, double l2) {
  if (data.empty()) throw InputError("objective over an empty dataset");
  double s = 0.0;
  for (const auto& ex : data) s += example_loss(model, ex);
  return s / static_cast<double>(data.size()) + l2_term(model, l2);
}

Gradient gradient(const VictimModel& model, std::span<const TrainingExample> data, double l2) {
  if (data.empty()) throw InputError("gradient over an empty dataset");
  const std::size_t dim = model.feature_dim();
  Gradient g;
  g.weights.assign(model.weights().size(), 0.0);
  g.bias.assign(model.num_classes(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    auto p = model.probabilities(ex.x);
    for (std::size_t c = 0; c < p.size(); ++c) {
      double r = (p[c] - (c == ex.y ? 1.0 : 0.0)) * inv_n;
      g.bias[c] += r;
      for (std::size_t i = 0; i < ex.x.index.size(); ++i)
        g.weights[c * dim + ex.x.index[i]] += r * ex.x.value[i];
    }
  }
  if (l2 != 0.0) {
    auto w = model.weights();
    for (std::size_t i = 0; i < w.size(); ++i) g.weights[i] += l2 * w[i];
  }
  return g;
}

void run_epochs(VictimModel& model, std::span<const TrainingExample> data, const TrainConfig& cfg) {
  if (data.empty()) throw InputError("cannot train on an empty dataset");
  const std::size_t n = data.size();
  const std::size_t classes = model.num_classes();
  const std::size_t dim = model.feature_dim();
  const std::size_t batch = (cfg.batch == 0 || cfg.batch >= n) ? n : cfg.batch;

  auto weights = model.weights();
  auto bias = model.bias();
  // Scratch gradient; only touched entries are non-zero between steps.
  std::vector<double> scratch(weights.size(), 0.0);
  std::vector<std::size_t> touched;
  std::vector<double> bias_grad(classes);

  std::vector<std::size_t> order(n);
  const std::size_t first_epoch = model.epochs_trained;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (batch < n) {
      Rng rng(derive_seed(cfg.seed, first_epoch + e, 0x5eedULL));
      rng.shuffle(order);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
      touched.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data[order[k]];
        auto p = model.probabilities(ex.x);
        for (std::size_t c = 0; c < classes; ++c) {
          double r = (p[c] - (c == ex.y ? 1.0 : 0.0)) * inv_b;
          bias_grad[c] += r;
          for (std::size_t i = 0; i < ex.x.index.size(); ++i) {
            std::size_t at = c * dim + ex.x.index[i];
            if (scratch[at] == 0.0) touched.push_back(at);
            scratch[at] += r * ex.x.value[i];
          }
        }
      }
      if (cfg.l2 != 0.0) {
        const double decay = 1.0 - cfg.lr * cfg.l2;
        for (double& w : weights) w *= decay;
      }
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (auto at : touched) {
        weights[at] -= cfg.lr * scratch[at];
        scratch[at] = 0.0;
      }
      for (std::size_t c = 0; c < classes; ++c) bias[c] -= cfg.lr * bias_grad[c];
    }
  }
  for (double w : weights)
    if (!std::isfinite(w)) throw InvariantError("victim training diverged (non-finite weight)");
  model.epochs_trained += cfg.epochs;
  model.last_lr = cfg.lr;
  model.last_seed = cfg.seed;
}

namespace {
void require_two_classes(std::span<const TrainingExample> data) {
  for (const auto& ex : data)
    if (ex.y != data.front().y) return;
  throw InputError("training data contains a single class");
}
}  // namespace

VictimModel train(std::span<const LabeledExample> examples, std::span<const std::string> labels,
                  const TrainConfig& cfg) {
  cfg.validate();
  auto data = make_training_set(examples, labels, cfg.feature_dim);
  if (data.empty()) throw InputError("cannot train on an empty dataset");
  require_two_classes(data);
  VictimModel model(std::vector<std::string>(labels.begin(), labels.end()), cfg.feature_dim);
  run_epochs(model, data, cfg);
  return model;
}

VictimModel continue_fine_tune(const VictimModel& model, std::span<const LabeledExample> examples,
                               const TrainConfig& cfg) {
  if (cfg.epochs == 0) return model;
  TrainConfig c = cfg;
  c.feature_dim = model.feature_dim();
  c.validate();
  auto data = make_training_set(examples, model.labels(), model.feature_dim());
  if (data.empty()) throw InputError("cannot fine-tune on an empty dataset");
  require_two_classes(data);
  VictimModel out = model;
  run_epochs(out, data, c);
  return out;
}

namespace {
std::string hexfloat(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, end);
}

double parse_hexfloat(std::string_view s) {
  double v = 0.0;
  bool neg = !s.empty() && s.front() == '-';
  if (neg) s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("bad weight value '" + std::string(s) + "' in model file");
  return neg ? -v : v;
}
}  // namespace

void save_model(const VictimModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model '" + path.string() + "'");
  nlohmann::ordered_json header = {{"format", "poisonforge-victim"},
                                   {"version", 1},
                                   {"hash", "fnv1a64-fold"},
                                   {"feature_dim", model.feature_dim()},
                                   {"labels", model.labels()},
                                   {"epochs", model.epochs_trained},
                                   {"lr", model.last_lr},
                                   {"seed", model.last_seed}};
  out << header.dump() << '\n';
  for (std::size_t c = 0; c < model.num_classes(); ++c)
    out << "bias " << c << ' ' << hexfloat(model.bias()[c]) << '\n';
  for (std::size_t c = 0; c < model.num_classes(); ++c)
    for (std::uint32_t j = 0; j < model.feature_dim(); ++j)
      if (double w = model.weight(c, j); w != 0.0) out << c << ' ' << j << ' ' << hexfloat(w) << '\n';
}

VictimModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty model file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad model header: ") + e.what());
  }
  if (header.value("format", "") != "poisonforge-victim" || header.value("hash", "") != "fnv1a64-fold")
    throw InputError("unsupported model file '" + path.string() + "'");
  VictimModel model(header.at("labels").get<std::vector<std::string>>(),
                    header.at("feature_dim").get<std::uint32_t>());
  model.epochs_trained = header.value("epochs", std::size_t{0});
  model.last_lr = header.value("lr", 0.0);
  model.last_seed = header.value("seed", std::uint64_t{0});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string a, b, v;
    if (!(ss >> a >> b >> v)) continue;
    try {
      if (a == "bias") {
        std::size_t c = std::stoul(b);
        if (c >= model.num_classes()) throw std::out_of_range("class");
        model.bias()[c] = parse_hexfloat(v);
      } else {
        std::size_t c = std::stoul(a);
        std::size_t j = std::stoul(b);
        if (c >= model.num_classes() || j >= model.feature_dim()) throw std::out_of_range("index");
        model.weight(c, static_cast<std::uint32_t>(j)) = parse_hexfloat(v);
      }
    } catch (const std::logic_error&) {
      throw InputError("bad model line " + std::to_string(line_no));
    }
  }
  return model;
}

}  // namespace poisonforge
