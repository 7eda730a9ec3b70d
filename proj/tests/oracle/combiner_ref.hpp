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

// Test-only reference for the score combiner: a direct forward pass written
// from the model definition, and a synthetic benchmark with overlapping
// score distributions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dia/defense/combiner.hpp"

namespace oracle {

// Mean cross-entropy plus (l2 / 2) times the squared weights (biases and the
// fitted standardization are not penalized). `params` uses the model layout.
inline double ReferenceLoss(const dia::CombinerModel& m, const std::vector<double>& params,
                            const std::vector<dia::TrainingRow>& rows, double l2) {
  const std::size_t d = m.input_dim(), h = m.hidden();
  const double* w1 = params.data();
  const double* b1 = w1 + d * h;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double total = 0.0;
  for (const auto& r : rows) {
    double z = b2;
    for (std::size_t k = 0; k < h; ++k) {
      double a = b1[k];
      for (std::size_t i = 0; i < d; ++i) {
        double x = (r.features[i] - m.feature_mean()[i]) / m.feature_scale()[i];
        a += w1[k * d + i] * x;
      }
      z += w2[k] * std::tanh(a);
    }
    double p = 1.0 / (1.0 + std::exp(-z));
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    total += r.fake ? -std::log(p) : -std::log1p(-p);
  }
  double reg = 0.0;
  for (std::size_t i = 0; i < d * h; ++i) reg += w1[i] * w1[i];
  for (std::size_t k = 0; k < h; ++k) reg += w2[k] * w2[k];
  return total / static_cast<double>(rows.size()) + 0.5 * l2 * reg;
}

struct BenchmarkSample {
  bool fake = false;
  std::vector<double> scores;  // three detector scores
  std::vector<double> aux;     // six image statistics
  std::vector<double> Features() const {
    std::vector<double> f = scores;
    f.insert(f.end(), aux.begin(), aux.end());
    return f;
  }
};

// Three detectors whose scores overlap across classes, with different
// separations and noise levels; image statistics carry no label signal.
inline std::vector<BenchmarkSample> OverlappingBenchmark(std::size_t n, std::uint64_t seed) {
  const double sep[3] = {0.18, 0.14, 0.10};
  const double noise[3] = {0.14, 0.18, 0.22};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BenchmarkSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    BenchmarkSample& s = out[i];
    s.fake = i % 2 == 0;
    for (int j = 0; j < 3; ++j) {
      double v = 0.5 + (s.fake ? sep[j] : -sep[j]) + noise[j] * g(rng);
      s.scores.push_back(std::clamp(v, 0.0, 1.0));
    }
    for (int c = 0; c < 3; ++c) s.aux.push_back(0.3 + 0.4 * u(rng));
    for (int c = 0; c < 3; ++c) s.aux.push_back(0.01 + 0.04 * u(rng));
  }
  return out;
}

}  // namespace oracle
