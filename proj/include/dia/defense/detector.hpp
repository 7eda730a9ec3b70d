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
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "dia/manifest.hpp"

namespace dia {

enum class DetectorErrorKind { kProtocolViolation, kTimeout, kCrash };

inline std::string_view ToString(DetectorErrorKind k) {
  switch (k) {
    case DetectorErrorKind::kProtocolViolation: return "protocol_violation";
    case DetectorErrorKind::kTimeout: return "timeout";
    case DetectorErrorKind::kCrash: return "crash";
  }
  return "crash";
}

class DetectorError : public std::runtime_error {
 public:
  DetectorError(DetectorErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ToString(kind)) + ": " + message),
        kind_(kind) {}

  DetectorErrorKind kind() const { return kind_; }

 private:
  DetectorErrorKind kind_;
};

struct DetectorScore {
  std::string detector_id;
  double p_fake = 0.0;

  // Range-checked construction; a score outside [0, 1] is a protocol
  // violation, never clamped.
  static DetectorScore Make(std::string detector_id, double p_fake) {
    if (!std::isfinite(p_fake) || p_fake < 0.0 || p_fake > 1.0) {
      throw DetectorError(DetectorErrorKind::kProtocolViolation,
                          "p_fake " + std::to_string(p_fake) +
                              " outside [0, 1]");
    }
    return {std::move(detector_id), p_fake};
  }
};

// One deepfake detector. Score() either returns a valid score or throws
// DetectorError; it never fabricates a score.
class DetectorChannel {
 public:
  virtual ~DetectorChannel() = default;
  virtual const std::string& detector_id() const = 0;
  virtual DetectorScore Score(const ProbeImage& probe) = 0;
};

// Perfect detector: 1 for fakes, 0 for reals.
class OracleDetector : public DetectorChannel {
 public:
  explicit OracleDetector(std::string detector_id)
      : detector_id_(std::move(detector_id)) {}

  const std::string& detector_id() const override { return detector_id_; }
  DetectorScore Score(const ProbeImage& probe) override {
    return DetectorScore::Make(detector_id_,
                               probe.kind == ProbeKind::kFake ? 1.0 : 0.0);
  }

 private:
  std::string detector_id_;
};

class ConstantDetector : public DetectorChannel {
 public:
  ConstantDetector(std::string detector_id, double p_fake)
      : detector_id_(std::move(detector_id)), p_fake_(p_fake) {
    DetectorScore::Make(detector_id_, p_fake_);
  }

  const std::string& detector_id() const override { return detector_id_; }
  DetectorScore Score(const ProbeImage&) override {
    return DetectorScore::Make(detector_id_, p_fake_);
  }

 private:
  std::string detector_id_;
  double p_fake_;
};

// The oracle answer flipped with probability `fnr` on fakes and `fpr` on
// reals. The flip draw is KeyedUniform(seed, probe_id): FNV-1a-64 over
// "<seed>:<probe_id>", SplitMix64 finalizer, top 53 bits scaled to [0, 1);
// flip iff draw < rate.
// The external stub detector implements the same rule.
class FixedRatesDetector : public DetectorChannel {
 public:
  FixedRatesDetector(std::string detector_id, double fnr, double fpr,
                     std::uint64_t seed)
      : detector_id_(std::move(detector_id)), fnr_(fnr), fpr_(fpr), seed_(seed) {
    if (!(fnr >= 0.0 && fnr <= 1.0 && fpr >= 0.0 && fpr <= 1.0)) {
      throw ValidationError("detector", "fnr/fpr outside [0, 1]");
    }
  }

  const std::string& detector_id() const override { return detector_id_; }
  DetectorScore Score(const ProbeImage& probe) override {
    double u = KeyedUniform(seed_, probe.probe_id);
    bool fake = probe.kind == ProbeKind::kFake;
    bool flip = u < (fake ? fnr_ : fpr_);
    return DetectorScore::Make(detector_id_, (fake != flip) ? 1.0 : 0.0);
  }

 private:
  std::string detector_id_;
  double fnr_;
  double fpr_;
  std::uint64_t seed_;
};

}  // namespace dia
