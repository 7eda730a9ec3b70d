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

#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/defense/combiner.hpp"
#include "dia/defense/image_stats.hpp"
#include "json.hpp"

namespace dia {

// DD1: one detector. DD2: three detectors, admit only if all admit.
// DD3: three detector scores plus image statistics through a combiner.
enum class DefenseMode { kDD1, kDD2, kDD3 };

inline std::string_view ToString(DefenseMode m) {
  switch (m) {
    case DefenseMode::kDD1: return "DD1";
    case DefenseMode::kDD2: return "DD2";
    case DefenseMode::kDD3: return "DD3";
  }
  return "DD1";
}

inline DefenseMode ParseDefenseMode(std::string_view s) {
  if (s == "DD1") return DefenseMode::kDD1;
  if (s == "DD2") return DefenseMode::kDD2;
  if (s == "DD3") return DefenseMode::kDD3;
  throw ValidationError("policy", "unknown defense mode '" + std::string(s) + "'");
}

inline std::size_t DetectorArity(DefenseMode m) {
  return m == DefenseMode::kDD1 ? 1 : 3;
}

inline constexpr std::size_t kAuxFeatures = 6;

enum class Verdict { kAdmit, kBlock };

// A score exactly at the threshold blocks.
inline Verdict Dd1Verdict(double p_fake, double threshold) {
  return p_fake >= threshold ? Verdict::kBlock : Verdict::kAdmit;
}

inline Verdict Dd2Verdict(std::span<const double> scores, double threshold) {
  if (scores.size() != 3) {
    throw ValidationError("policy", "DD2 needs exactly 3 detector scores");
  }
  for (double s : scores) {
    if (Dd1Verdict(s, threshold) == Verdict::kBlock) return Verdict::kBlock;
  }
  return Verdict::kAdmit;
}

// Combiner input: the three scores, then per-channel means, then variances.
inline std::vector<double> Dd3Features(std::span<const double> scores,
                                       const ImageStats& stats) {
  if (scores.size() != 3) {
    throw ValidationError("policy", "DD3 needs exactly 3 detector scores");
  }
  std::vector<double> f(scores.begin(), scores.end());
  for (double v : stats.Flatten()) f.push_back(v);
  return f;
}

inline Verdict Dd3Verdict(double combined, double threshold) {
  return Dd1Verdict(combined, threshold);
}

struct DefensePolicy {
  DefenseMode mode = DefenseMode::kDD1;
  std::vector<std::string> detector_ids;
  double threshold = 0.5;
  std::optional<CombinerModel> combiner;  // DD3 only
};

inline void ValidatePolicy(const DefensePolicy& p) {
  if (p.detector_ids.size() != DetectorArity(p.mode)) {
    throw ValidationError("policy", std::string(ToString(p.mode)) + " needs " +
                                        std::to_string(DetectorArity(p.mode)) +
                                        " detectors");
  }
  std::set<std::string> ids(p.detector_ids.begin(), p.detector_ids.end());
  if (ids.size() != p.detector_ids.size() || ids.contains("")) {
    throw ValidationError("policy", "detector ids must be distinct and non-empty");
  }
  if (!(p.threshold > 0.0 && p.threshold < 1.0)) {
    throw ValidationError("policy", "threshold must be in (0, 1)");
  }
  if (p.mode == DefenseMode::kDD3) {
    if (!p.combiner) throw ValidationError("policy", "DD3 needs a combiner");
    if (p.combiner->input_dim() != 3 + kAuxFeatures) {
      throw ValidationError("policy", "combiner input_dim must be 9");
    }
  } else if (p.combiner) {
    throw ValidationError("policy", "combiner given for a non-DD3 policy");
  }
}

// {"mode": "DD2", "detectors": ["a", "b", "c"], "threshold": 0.5,
//  "combiner": "model.json"}. The combiner path resolves against
// `base_dir` when relative.
inline DefensePolicy ParsePolicy(const nlohmann::json& j,
                                 const std::string& base_dir = "") {
  if (!j.is_object()) throw ValidationError("policy", "policy must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k != "mode" && k != "detectors" && k != "threshold" && k != "combiner") {
      throw ValidationError("policy", "unknown key '" + k + "'");
    }
  }
  DefensePolicy p;
  try {
    p.mode = ParseDefenseMode(j.at("mode").get<std::string>());
    p.detector_ids = j.at("detectors").get<std::vector<std::string>>();
    if (j.contains("threshold")) p.threshold = j["threshold"].get<double>();
    if (j.contains("combiner")) {
      std::string path = j["combiner"].get<std::string>();
      if (!path.empty() && path[0] != '/' && !base_dir.empty()) {
        path = base_dir + "/" + path;
      }
      p.combiner = LoadCombiner(path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("policy", e.what());
  }
  ValidatePolicy(p);
  return p;
}

// Defended success rate when a detector with false-negative rate `fnr`
// screens every fake: only missed fakes reach the provider.
inline double UpdatedSuccessRate(double raw_rate, double fnr) {
  return raw_rate * fnr;
}

inline double FnrFromAccuracy(double accuracy) { return 1.0 - accuracy; }

}  // namespace dia
