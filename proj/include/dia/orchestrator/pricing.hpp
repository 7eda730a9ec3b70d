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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dia/core/types.hpp"
#include "json.hpp"

namespace dia {

struct PriceTier {
  std::optional<std::int64_t> up_to;  // inclusive monthly bound; none = open
  std::int64_t nanos_per_transaction = 0;

  static PriceTier PerThousand(std::optional<std::int64_t> up_to,
                               double dollars_per_1000) {
    return {up_to, std::llround(dollars_per_1000 * 1e6)};
  }
};

struct ProviderPricing {
  std::int64_t free_allowance = 0;
  std::vector<PriceTier> tiers;
};

enum class TierMode {
  kMarginal,      // each transaction priced by the tier it falls into
  kFlatByVolume,  // every billable transaction priced by the total's tier
};

struct PricingSchedule {
  TierMode mode = TierMode::kMarginal;
  std::map<std::string, ProviderPricing> providers;
};

class UnknownProviderError : public std::out_of_range {
 public:
  explicit UnknownProviderError(const std::string& provider_id)
      : std::out_of_range("no pricing for provider '" + provider_id + "'") {}
};

inline void ValidatePricing(const PricingSchedule& s) {
  for (const auto& [id, p] : s.providers) {
    if (p.tiers.empty()) throw ValidationError("pricing", id + ": no tiers");
    if (p.free_allowance < 0) {
      throw ValidationError("pricing", id + ": negative free allowance");
    }
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < p.tiers.size(); ++i) {
      const PriceTier& t = p.tiers[i];
      if (t.nanos_per_transaction < 0) {
        throw ValidationError("pricing", id + ": negative price");
      }
      bool last = i + 1 == p.tiers.size();
      if (!t.up_to) {
        if (!last) throw ValidationError("pricing", id + ": open tier not last");
        continue;
      }
      if (*t.up_to <= prev) {
        throw ValidationError("pricing", id + ": tier bounds not increasing");
      }
      prev = *t.up_to;
    }
    if (p.tiers.back().up_to) {
      throw ValidationError("pricing", id + ": last tier must be open-ended");
    }
  }
}

// Monthly cost of `transactions` for one provider.
inline Money EstimateCost(const PricingSchedule& schedule,
                          const std::string& provider_id,
                          std::int64_t transactions) {
  auto it = schedule.providers.find(provider_id);
  if (it == schedule.providers.end()) throw UnknownProviderError(provider_id);
  if (transactions < 0) {
    throw ValidationError("pricing", "transaction count must be >= 0");
  }
  const ProviderPricing& p = it->second;
  if (transactions <= p.free_allowance) return Money{0};

  if (schedule.mode == TierMode::kFlatByVolume) {
    for (const PriceTier& t : p.tiers) {
      if (!t.up_to || transactions <= *t.up_to) {
        return Money{(transactions - p.free_allowance) * t.nanos_per_transaction};
      }
    }
  }

  // Transactions are numbered 1..n; tier i covers (lower, up_to].
  Money total;
  std::int64_t lower = 0;
  for (const PriceTier& t : p.tiers) {
    std::int64_t upper = t.up_to.value_or(transactions);
    std::int64_t from = std::max(lower, p.free_allowance);
    std::int64_t to = std::min(upper, transactions);
    if (to > from) total += Money{(to - from) * t.nanos_per_transaction};
    if (upper >= transactions) break;
    lower = upper;
  }
  return total;
}

// Published list prices: every provider charges $1 per 1,000 up to 1M per
// month, then provider-specific tiers. "ms-free" is the free instance.
inline PricingSchedule DefaultPricingSchedule() {
  constexpr std::int64_t kM = 1'000'000;
  PricingSchedule s;
  s.providers["aws"] = {0,
                        {PriceTier::PerThousand(kM, 1.00),
                         PriceTier::PerThousand(10 * kM, 0.80),
                         PriceTier::PerThousand(100 * kM, 0.60),
                         PriceTier::PerThousand(std::nullopt, 0.40)}};
  std::vector<PriceTier> ms = {PriceTier::PerThousand(kM, 1.00),
                               PriceTier::PerThousand(5 * kM, 0.80),
                               PriceTier::PerThousand(100 * kM, 0.60),
                               PriceTier::PerThousand(std::nullopt, 0.40)};
  s.providers["ms"] = {0, ms};
  s.providers["ms-free"] = {30'000, ms};
  s.providers["nav"] = {0,
                        {PriceTier::PerThousand(kM, 1.00),
                         PriceTier::PerThousand(100 * kM, 0.50),
                         PriceTier::PerThousand(std::nullopt, 0.30)}};
  return s;
}

// {"mode": "marginal"|"flat", "providers": {"aws": {"free_allowance": 0,
//  "tiers": [{"up_to": 1000000, "price_per_1000": 1.0}, ...]}}}
inline PricingSchedule ParsePricingSchedule(const nlohmann::json& j) {
  PricingSchedule s;
  std::string mode = j.value("mode", std::string("marginal"));
  if (mode == "marginal") {
    s.mode = TierMode::kMarginal;
  } else if (mode == "flat") {
    s.mode = TierMode::kFlatByVolume;
  } else {
    throw ValidationError("pricing", "unknown mode '" + mode + "'");
  }
  for (const auto& [id, jp] : j.at("providers").items()) {
    ProviderPricing p;
    p.free_allowance = jp.value("free_allowance", std::int64_t{0});
    for (const auto& jt : jp.at("tiers")) {
      std::optional<std::int64_t> up_to;
      if (jt.contains("up_to") && !jt["up_to"].is_null()) {
        up_to = jt["up_to"].get<std::int64_t>();
      }
      p.tiers.push_back(
          PriceTier::PerThousand(up_to, jt.at("price_per_1000").get<double>()));
    }
    s.providers[id] = std::move(p);
  }
  ValidatePricing(s);
  return s;
}

inline PricingSchedule LoadPricingSchedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("pricing", "cannot open " + path);
  try {
    return ParsePricingSchedule(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("pricing", e.what());
  }
}

}  // namespace dia
