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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dia {

// Raised for any rejected input: malformed identities, out-of-range
// percentages, probes violating the kind/method table.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string rule, const std::string& message)
      : std::runtime_error(rule + ": " + message), rule_(std::move(rule)) {}

  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

enum class Demographic {
  kWhite,
  kAsian,
  kBlack,
  kHispanic,
  kAsianIndian,
  kMultiracial,
  kUnknown,
};

inline constexpr Demographic kAllDemographics[] = {
    Demographic::kWhite,       Demographic::kAsian,
    Demographic::kBlack,       Demographic::kHispanic,
    Demographic::kAsianIndian, Demographic::kMultiracial,
    Demographic::kUnknown,
};

inline std::string_view ToString(Demographic d) {
  switch (d) {
    case Demographic::kWhite: return "White";
    case Demographic::kAsian: return "Asian";
    case Demographic::kBlack: return "Black";
    case Demographic::kHispanic: return "Hispanic";
    case Demographic::kAsianIndian: return "AsianIndian";
    case Demographic::kMultiracial: return "Multiracial";
    case Demographic::kUnknown: return "Unknown";
  }
  return "Unknown";
}

inline Demographic ParseDemographic(std::string_view s) {
  for (Demographic d : kAllDemographics) {
    if (ToString(d) == s) return d;
  }
  throw ValidationError("demographic_tag",
                        "unknown demographic tag '" + std::string(s) + "'");
}

// A celebrity identity. Equality is byte equality of the normalized name;
// the demographic tag rides along but does not participate.
class IdentityRef {
 public:
  const std::string& canonical_name() const { return name_; }
  std::optional<Demographic> demographic_tag() const { return tag_; }

  IdentityRef WithTag(std::optional<Demographic> tag) const {
    IdentityRef copy = *this;
    copy.tag_ = tag;
    return copy;
  }

  friend bool operator==(const IdentityRef& a, const IdentityRef& b) {
    return a.name_ == b.name_;
  }
  friend auto operator<=>(const IdentityRef& a, const IdentityRef& b) {
    return a.name_ <=> b.name_;
  }

 private:
  friend IdentityRef NormalizeIdentity(std::string_view raw_name,
                                       std::optional<Demographic> tag);
  IdentityRef(std::string name, std::optional<Demographic> tag)
      : name_(std::move(name)), tag_(tag) {}

  std::string name_;
  std::optional<Demographic> tag_;
};

// Case-folds (ASCII), trims, and collapses internal whitespace runs to a
// single space. Bytes >= 0x80 pass through untouched.
inline IdentityRef NormalizeIdentity(
    std::string_view raw_name, std::optional<Demographic> tag = std::nullopt) {
  std::string out;
  out.reserve(raw_name.size());
  bool pending_space = false;
  for (char c : raw_name) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : c);
  }
  if (out.empty()) {
    throw ValidationError("identity_empty",
                          "identity name is empty after normalization");
  }
  return IdentityRef(std::move(out), tag);
}

// A percentage in [0, 100]. Out-of-range input is rejected, never clamped.
class Percentage {
 public:
  Percentage() = default;
  explicit Percentage(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0 || value > 100.0) {
      throw ValidationError("percentage_range",
                            "value " + std::to_string(value) +
                                " outside [0, 100]");
    }
  }

  double value() const { return value_; }

  friend bool operator==(Percentage a, Percentage b) = default;
  friend auto operator<=>(Percentage a, Percentage b) = default;

 private:
  double value_ = 0.0;
};

enum class ProbeKind { kReal, kFake };

enum class GenerationMethod {
  kReplacement,
  kReenactment,
  kSynthesis,
  kNotApplicable,
};

inline std::string_view ToString(ProbeKind k) {
  return k == ProbeKind::kReal ? "Real" : "Fake";
}

inline ProbeKind ParseProbeKind(std::string_view s) {
  if (s == "Real") return ProbeKind::kReal;
  if (s == "Fake") return ProbeKind::kFake;
  throw ValidationError("schema", "unknown probe kind '" + std::string(s) + "'");
}

inline std::string_view ToString(GenerationMethod m) {
  switch (m) {
    case GenerationMethod::kReplacement: return "Replacement";
    case GenerationMethod::kReenactment: return "Reenactment";
    case GenerationMethod::kSynthesis: return "Synthesis";
    case GenerationMethod::kNotApplicable: return "NotApplicable";
  }
  return "NotApplicable";
}

inline GenerationMethod ParseGenerationMethod(std::string_view s) {
  if (s == "Replacement") return GenerationMethod::kReplacement;
  if (s == "Reenactment") return GenerationMethod::kReenactment;
  if (s == "Synthesis") return GenerationMethod::kSynthesis;
  if (s == "NotApplicable") return GenerationMethod::kNotApplicable;
  throw ValidationError("schema",
                        "unknown generation method '" + std::string(s) + "'");
}

// One image under test. Construct through MakeProbe (or validate with
// ProbeViolations) so that the kind/method/role table always holds.
struct ProbeImage {
  std::string probe_id;
  std::string uri;
  ProbeKind kind = ProbeKind::kReal;
  GenerationMethod method = GenerationMethod::kNotApplicable;
  std::string dataset_id;
  std::optional<IdentityRef> target;
  std::optional<IdentityRef> reference;
  std::optional<IdentityRef> reference2;
  std::optional<std::string> source_video_id;
  bool no_real_reference = false;

  // The identity a fake is "of" for per-celebrity accounting: the target,
  // or the first reference for a synthesis blend.
  const std::optional<IdentityRef>& subject() const {
    return target ? target : reference;
  }
};

// Rule names of every kind/method/role violation in `p`. Empty means valid.
inline std::vector<std::string> ProbeViolations(const ProbeImage& p) {
  std::vector<std::string> v;
  if (p.probe_id.empty()) v.push_back("probe_id_empty");
  if (p.kind == ProbeKind::kReal) {
    if (p.method != GenerationMethod::kNotApplicable)
      v.push_back("real_method_not_applicable");
    if (!p.target) v.push_back("real_requires_target");
    if (p.reference || p.reference2) v.push_back("real_forbids_reference");
    if (p.no_real_reference) v.push_back("real_forbids_no_real_reference");
    return v;
  }
  switch (p.method) {
    case GenerationMethod::kNotApplicable:
      v.push_back("fake_method_required");
      break;
    case GenerationMethod::kReplacement:
    case GenerationMethod::kReenactment:
      if (!p.target) v.push_back("fake_requires_target");
      if (!p.reference) v.push_back("fake_requires_reference");
      if (p.reference2) v.push_back("reference2_only_for_synthesis");
      break;
    case GenerationMethod::kSynthesis:
      if (p.target) v.push_back("synthesis_forbids_target");
      if (!p.reference || !p.reference2)
        v.push_back("synthesis_requires_two_references");
      break;
  }
  return v;
}

inline ProbeImage MakeProbe(ProbeImage p) {
  auto v = ProbeViolations(p);
  if (!v.empty()) {
    throw ValidationError(v.front(), "probe '" + p.probe_id + "' is invalid");
  }
  return p;
}

struct Match {
  IdentityRef name;
  Percentage confidence;

  friend bool operator==(const Match&, const Match&) = default;
};

// Recognizer output. An absent match means the provider named nobody.
struct Prediction {
  std::optional<Match> match;

  bool recognized() const { return match.has_value(); }
  // Absent match compares as confidence 0.
  double confidence_or_zero() const {
    return match ? match->confidence.value() : 0.0;
  }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

enum class RequestKind { kCR, kFS };

inline std::string_view ToString(RequestKind k) {
  return k == RequestKind::kCR ? "CR" : "FS";
}

inline RequestKind ParseRequestKind(std::string_view s) {
  if (s == "CR") return RequestKind::kCR;
  if (s == "FS") return RequestKind::kFS;
  throw ValidationError("schema",
                        "unknown request kind '" + std::string(s) + "'");
}

// Money in nano-dollars. Every tier price with at most six decimals per
// 1,000 transactions is an exact integer per transaction in this unit.
struct Money {
  std::int64_t nanos = 0;

  static Money FromDollars(double dollars) {
    return Money{static_cast<std::int64_t>(std::llround(dollars * 1e9))};
  }
  double dollars() const { return static_cast<double>(nanos) / 1e9; }

  // Rounded half away from zero to the cent, e.g. "1800.00".
  std::string ToCentString() const {
    std::int64_t abs_nanos = nanos < 0 ? -nanos : nanos;
    std::int64_t cents = (abs_nanos + 5'000'000) / 10'000'000;
    std::string frac = std::to_string(cents % 100);
    if (frac.size() < 2) frac.insert(0, "0");
    return std::string(nanos < 0 && cents != 0 ? "-" : "") +
           std::to_string(cents / 100) + "." + frac;
  }

  Money& operator+=(Money o) {
    nanos += o.nanos;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return Money{a.nanos + b.nanos}; }
  friend Money operator-(Money a, Money b) { return Money{a.nanos - b.nanos}; }
  friend bool operator==(Money, Money) = default;
  friend auto operator<=>(Money, Money) = default;
};

namespace skip_reason {
inline constexpr std::string_view kDefenseBlocked = "defense_blocked";
inline constexpr std::string_view kNetworkError = "network_error";
inline constexpr std::string_view kQuotaExceeded = "quota_exceeded";
inline constexpr std::string_view kCassetteMiss = "cassette_miss";
inline constexpr std::string_view kUnreadableImage = "unreadable_image";
inline constexpr std::string_view kBadResponse = "bad_response";
}  // namespace skip_reason

// Joined outcome of one request against one provider. FS records carry the
// fake's probe_id and a similarity; CR records carry a prediction.
struct QueryRecord {
  std::string probe_id;
  std::string provider_id;
  RequestKind request_kind = RequestKind::kCR;
  Prediction prediction;
  std::optional<Percentage> similarity;
  double latency_ms = 0.0;
  Money unit_cost;
  std::optional<std::string> skip_reason;
  std::int64_t timestamp_ms = 0;  // UTC, milliseconds since the Unix epoch

  // Blocked records stand in for "non-celebrity" answers and stay in every
  // metric denominator; skipped records (failures) are excluded.
  bool blocked() const {
    return skip_reason && *skip_reason == skip_reason::kDefenseBlocked;
  }
  bool skipped() const { return skip_reason && !blocked(); }
};

using QueryLog = std::vector<QueryRecord>;

struct MetricConfig {
  Percentage beta{90.0};
  Percentage gamma{80.0};
};

}  // namespace dia
