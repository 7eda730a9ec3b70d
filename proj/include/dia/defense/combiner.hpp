// Copyright 2026 The DIA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Learned score combiner: one tanh hidden layer and a sigmoid output unit.
//
//   h = tanh(W1 x' + b1),  z = w2 . h + b2,  p = sigmoid(z)
//
// x' is the input after a fixed standardization fitted on the training rows.
// Trainable parameters: d*h + h + h + 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dia/core/types.hpp"
#include "json.hpp"

namespace dia {

struct TrainingRow {
  std::vector<double> features;
  bool fake = false;
};

struct CombinerHyper {
  int hidden = 8;
  double learning_rate = 0.5;
  int epochs = 2000;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

inline constexpr double kProbabilityEps = 1e-12;

inline double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

class CombinerModel {
 public:
  CombinerModel() = default;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static CombinerModel Init(std::size_t input_dim, std::size_t hidden,
                            std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0) {
      throw ValidationError("combiner", "input_dim and hidden must be positive");
    }
    CombinerModel m;
    m.input_dim_ = input_dim;
    m.hidden_ = hidden;
    m.params_.assign(m.parameter_count(), 0.0);
    m.mean_.assign(input_dim, 0.0);
    m.scale_.assign(input_dim, 1.0);
    std::mt19937_64 rng(seed);
    double a1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    for (std::size_t i = 0; i < input_dim * hidden; ++i) m.params_[i] = u1(rng);
    for (std::size_t k = 0; k < hidden; ++k) m.params_[m.w2_offset() + k] = u2(rng);
    return m;
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t parameter_count() const {
    return (input_dim_ * hidden_ + hidden_) + (hidden_ + 1);
  }

  // Layout: W1 (hidden x input_dim, row-major), b1, w2, b2.
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t b1_offset() const { return input_dim_ * hidden_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + hidden_; }

  const std::vector<double>& feature_mean() const { return mean_; }
  const std::vector<double>& feature_scale() const { return scale_; }
  void SetStandardization(std::vector<double> mean, std::vector<double> scale) {
    if (mean.size() != input_dim_ || scale.size() != input_dim_) {
      throw ValidationError("combiner", "standardization size mismatch");
    }
    for (double s : scale) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw ValidationError("combiner", "standardization scale must be > 0");
      }
    }
    mean_ = std::move(mean);
    scale_ = std::move(scale);
  }

  std::vector<double> Standardize(std::span<const double> x) const {
    CheckInput(x);
    std::vector<double> s(input_dim_);
    for (std::size_t i = 0; i < input_dim_; ++i) s[i] = (x[i] - mean_[i]) / scale_[i];
    return s;
  }

  // Pre-sigmoid output for an already standardized input; fills `h` with
  // the hidden activations when given.
  double LogitStandardized(std::span<const double> xs,
                           std::vector<double>* h = nullptr) const {
    double z = params_[b2_offset()];
    if (h) h->assign(hidden_, 0.0);
    for (std::size_t k = 0; k < hidden_; ++k) {
      double a = params_[b1_offset() + k];
      for (std::size_t i = 0; i < input_dim_; ++i) {
        a += params_[k * input_dim_ + i] * xs[i];
      }
      double t = std::tanh(a);
      if (h) (*h)[k] = t;
      z += params_[w2_offset() + k] * t;
    }
    return z;
  }

  double Logit(std::span<const double> x) const {
    auto xs = Standardize(x);
    return LogitStandardized(xs);
  }

  // Strictly inside (0, 1).
  double Predict(std::span<const double> x) const {
    return std::clamp(Sigmoid(Logit(x)), kProbabilityEps, 1.0 - kProbabilityEps);
  }

  nlohmann::ordered_json ToJson() const {
    nlohmann::ordered_json j;
    j["input_dim"] = input_dim_;
    j["hidden"] = hidden_;
    j["feature_mean"] = mean_;
    j["feature_scale"] = scale_;
    j["params"] = params_;
    return j;
  }

  static CombinerModel FromJson(const nlohmann::json& j) {
    CombinerModel m;
    try {
      m.input_dim_ = j.at("input_dim").get<std::size_t>();
      m.hidden_ = j.at("hidden").get<std::size_t>();
      m.params_ = j.at("params").get<std::vector<double>>();
      if (m.input_dim_ == 0 || m.hidden_ == 0 ||
          m.params_.size() != m.parameter_count()) {
        throw ValidationError("combiner", "parameter count mismatch");
      }
      for (double p : m.params_) {
        if (!std::isfinite(p)) throw ValidationError("combiner", "non-finite parameter");
      }
      m.mean_.assign(m.input_dim_, 0.0);
      m.scale_.assign(m.input_dim_, 1.0);
      m.SetStandardization(j.at("feature_mean").get<std::vector<double>>(),
                           j.at("feature_scale").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("combiner", e.what());
    }
    return m;
  }

 private:
  void CheckInput(std::span<const double> x) const {
    if (x.size() != input_dim_) {
      throw ValidationError("combiner", "expected " + std::to_string(input_dim_) +
                                            " features, got " +
                                            std::to_string(x.size()));
    }
  }

  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

inline void SaveCombiner(const CombinerModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("combiner", "cannot write " + path);
  out << m.ToJson().dump(2) << "\n";
}

inline CombinerModel LoadCombiner(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("combiner", "cannot open " + path);
  try {
    return CombinerModel::FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("combiner", e.what());
  }
}

// Mean binary cross-entropy over standardized rows plus (l2/2)*||W1, w2||^2.
// Cross-entropy uses the logit form softplus(z) - y*z.
inline double CombinerLoss(const CombinerModel& m,
                           const std::vector<TrainingRow>& rows, double l2) {
  double loss = 0.0;
  for (const auto& r : rows) {
    double z = m.LogitStandardized(m.Standardize(r.features));
    loss += Softplus(z) - (r.fake ? z : 0.0);
  }
  loss /= static_cast<double>(rows.size());
  double sq = 0.0;
  const auto& p = m.params();
  for (std::size_t i = 0; i < m.b1_offset(); ++i) sq += p[i] * p[i];
  for (std::size_t k = 0; k < m.hidden(); ++k) {
    sq += p[m.w2_offset() + k] * p[m.w2_offset() + k];
  }
  return loss + 0.5 * l2 * sq;
}

// Analytic gradient of CombinerLoss with respect to params().
inline std::vector<double> CombinerGradient(const CombinerModel& m,
                                            const std::vector<TrainingRow>& rows,
                                            double l2) {
  const auto& p = m.params();
  std::vector<double> g(p.size(), 0.0);
  std::vector<double> h;
  double inv_n = 1.0 / static_cast<double>(rows.size());
  std::size_t d = m.input_dim();
  for (const auto& r : rows) {
    auto xs = m.Standardize(r.features);
    double z = m.LogitStandardized(xs, &h);
    double dz = (Sigmoid(z) - (r.fake ? 1.0 : 0.0)) * inv_n;
    g[m.b2_offset()] += dz;
    for (std::size_t k = 0; k < m.hidden(); ++k) {
      g[m.w2_offset() + k] += dz * h[k];
      double da = dz * p[m.w2_offset() + k] * (1.0 - h[k] * h[k]);
      g[m.b1_offset() + k] += da;
      for (std::size_t i = 0; i < d; ++i) g[k * d + i] += da * xs[i];
    }
  }
  for (std::size_t i = 0; i < m.b1_offset(); ++i) g[i] += l2 * p[i];
  for (std::size_t k = 0; k < m.hidden(); ++k) {
    g[m.w2_offset() + k] += l2 * p[m.w2_offset() + k];
  }
  return g;
}

inline void ValidateTrainingRows(const std::vector<TrainingRow>& rows) {
  if (rows.empty()) throw ValidationError("combiner_data", "no training rows");
  std::size_t d = rows.front().features.size();
  if (d == 0) throw ValidationError("combiner_data", "rows have no features");
  std::size_t fakes = 0;
  for (const auto& r : rows) {
    if (r.features.size() != d) {
      throw ValidationError("combiner_data", "rows differ in feature count");
    }
    for (double v : r.features) {
      if (!std::isfinite(v)) {
        throw ValidationError("combiner_data", "non-finite feature value");
      }
    }
    if (r.fake) ++fakes;
  }
  std::size_t reals = rows.size() - fakes;
  if (fakes == 0 || reals == 0) {
    throw ValidationError("combiner_data", "training data has a single class");
  }
  if (fakes < 2 || reals < 2) {
    throw ValidationError("combiner_data", "need at least 2 rows per class");
  }
}

struct TrainResult {
  CombinerModel model;
  std::vector<double> loss_curve;  // loss before each epoch, then final
  double training_accuracy = 0.0;
};

// Full-batch gradient descent. Deterministic for a given seed.
inline TrainResult TrainCombiner(const std::vector<TrainingRow>& rows,
                                 const CombinerHyper& hyper) {
  ValidateTrainingRows(rows);
  if (hyper.hidden <= 0 || hyper.epochs < 0 || !(hyper.learning_rate > 0.0) ||
      !(hyper.l2 >= 0.0)) {
    throw ValidationError("combiner", "bad hyperparameters");
  }
  std::size_t d = rows.front().features.size();
  TrainResult out;
  out.model = CombinerModel::Init(d, static_cast<std::size_t>(hyper.hidden),
                                  hyper.seed);
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += r.features[i] / n;
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      double dv = r.features[i] - mean[i];
      scale[i] += dv * dv / n;
    }
  }
  for (auto& s : scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;
  out.model.SetStandardization(mean, scale);

  auto& p = out.model.params();
  for (int e = 0; e < hyper.epochs; ++e) {
    out.loss_curve.push_back(CombinerLoss(out.model, rows, hyper.l2));
    auto g = CombinerGradient(out.model, rows, hyper.l2);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= hyper.learning_rate * g[i];
  }
  out.loss_curve.push_back(CombinerLoss(out.model, rows, hyper.l2));
  if (!std::isfinite(out.loss_curve.back())) {
    throw ValidationError("combiner", "training diverged");
  }
  std::size_t correct = 0;
  for (const auto& r : rows) {
    bool predicted_fake = out.model.Predict(r.features) >= 0.5;
    if (predicted_fake == r.fake) ++correct;
  }
  out.training_accuracy = static_cast<double>(correct) / n;
  return out;
}

}  // namespace dia
