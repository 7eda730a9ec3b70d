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

#include <stdexcept>
#include <string>
#include <string_view>

#include "dia/core/types.hpp"

namespace dia {

enum class ProviderErrorKind {
  kNetwork,          // retryable
  kQuotaExceeded,    // retryable with backoff
  kCassetteMiss,     // fatal in replay mode
  kUnreadableImage,  // fatal for this probe
  kBadResponse,      // provider answered with something unusable
};

inline bool IsRetryable(ProviderErrorKind k) {
  return k == ProviderErrorKind::kNetwork ||
         k == ProviderErrorKind::kQuotaExceeded;
}

inline std::string_view SkipReasonFor(ProviderErrorKind k) {
  switch (k) {
    case ProviderErrorKind::kNetwork: return skip_reason::kNetworkError;
    case ProviderErrorKind::kQuotaExceeded: return skip_reason::kQuotaExceeded;
    case ProviderErrorKind::kCassetteMiss: return skip_reason::kCassetteMiss;
    case ProviderErrorKind::kUnreadableImage:
      return skip_reason::kUnreadableImage;
    case ProviderErrorKind::kBadResponse: return skip_reason::kBadResponse;
  }
  return skip_reason::kBadResponse;
}

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ProviderErrorKind kind() const { return kind_; }
  bool retryable() const { return IsRetryable(kind_); }

 private:
  ProviderErrorKind kind_;
};

template <typename T>
struct Timed {
  T value;
  double latency_ms = 0.0;
};

// The two recognizer functions of a face-recognition web API. Implementations
// must be callable concurrently; failures are reported as ProviderError.
class RecognizerBackend {
 public:
  virtual ~RecognizerBackend() = default;

  virtual const std::string& provider_id() const = 0;

  // Celebrity recognition: the best-matching celebrity and its confidence,
  // or no match.
  virtual Timed<Prediction> RecognizeCelebrity(const ProbeImage& probe) = 0;

  // Face similarity between a real image and a fake, in [0, 100].
  virtual Timed<Percentage> FaceSimilarity(const ProbeImage& real_probe,
                                           const ProbeImage& fake_probe) = 0;
};

}  // namespace dia
