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

// Campaign execution. For every (probe, provider) issue celebrity
// recognition; then, for fakes the provider did not recognize, issue face
// similarity against the fake's paired real image. Requests fan out to at
// most max_in_flight workers per provider behind a token bucket, retryable
// failures back off exponentially, and every record is priced.
//
// In Simulated and Replay modes time is virtual: admission timestamps come
// from the bucket arithmetic alone, so logs are byte-identical across runs.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "dia/manifest.hpp"
#include "dia/orchestrator/pricing.hpp"
#include "dia/orchestrator/query_log.hpp"
#include "dia/orchestrator/rate_limit.hpp"
#include "dia/providers/backend.hpp"

namespace dia {

enum class CampaignMode { kLive, kReplay, kSimulated };
enum class FsPolicy { kOnCrMiss, kNever, kAlways };

// kPerResponse bills one transaction per request that got a usable answer;
// kPerAttempt bills every attempt that reached the provider.
enum class BillingPolicy { kPerResponse, kPerAttempt };

struct RetryPolicy {
  int max_attempts = 3;
  double base_backoff_s = 1.0;
  double multiplier = 2.0;
  double jitter_fraction = 0.1;
};

struct ProviderLimits {
  int max_in_flight = 4;
  TokenBucketParams rate{10.0, 10.0};
};

struct CampaignConfig {
  std::vector<std::string> provider_ids;
  std::map<std::string, ProviderLimits> limits;  // absent -> defaults
  RetryPolicy retry;
  CampaignMode mode = CampaignMode::kSimulated;
  FsPolicy fs_policy = FsPolicy::kOnCrMiss;
  BillingPolicy billing = BillingPolicy::kPerResponse;
  PricingSchedule pricing = DefaultPricingSchedule();
  std::map<std::string, std::int64_t> month_to_date;  // prior transactions
  std::int64_t epoch_ms = 1'609'459'200'000;  // virtual-time origin, 2021-01-01
  std::uint64_t seed = 0;
  Clock* live_clock = nullptr;  // Live mode only; defaults to a SteadyClock

  const ProviderLimits& LimitsFor(const std::string& id) const {
    static const ProviderLimits kDefault;
    auto it = limits.find(id);
    return it == limits.end() ? kDefault : it->second;
  }
};

class CampaignConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Backends = std::map<std::string, std::shared_ptr<RecognizerBackend>>;

inline std::string_view ToString(CampaignMode m) {
  switch (m) {
    case CampaignMode::kLive: return "live";
    case CampaignMode::kReplay: return "replay";
    case CampaignMode::kSimulated: return "simulated";
  }
  return "simulated";
}

inline CampaignMode ParseCampaignMode(std::string_view s) {
  if (s == "live") return CampaignMode::kLive;
  if (s == "replay") return CampaignMode::kReplay;
  if (s == "simulated") return CampaignMode::kSimulated;
  throw CampaignConfigError("unknown mode '" + std::string(s) + "'");
}

inline FsPolicy ParseFsPolicy(std::string_view s) {
  if (s == "OnCrMiss") return FsPolicy::kOnCrMiss;
  if (s == "Never") return FsPolicy::kNever;
  if (s == "Always") return FsPolicy::kAlways;
  throw CampaignConfigError("unknown fs_policy '" + std::string(s) + "'");
}

inline void ValidateCampaignConfig(const CampaignConfig& config,
                                   const Backends& backends) {
  if (config.provider_ids.empty()) {
    throw CampaignConfigError("no providers configured");
  }
  std::set<std::string> seen;
  for (const auto& id : config.provider_ids) {
    if (!seen.insert(id).second) {
      throw CampaignConfigError("provider '" + id + "' listed twice");
    }
    auto it = backends.find(id);
    if (it == backends.end() || !it->second) {
      throw CampaignConfigError("no backend for provider '" + id + "'");
    }
    if (!config.pricing.providers.contains(id)) {
      throw CampaignConfigError("no pricing for provider '" + id + "'");
    }
    const ProviderLimits& l = config.LimitsFor(id);
    if (l.max_in_flight < 1) {
      throw CampaignConfigError("max_in_flight must be >= 1");
    }
    try {
      ValidateBucket(l.rate);
    } catch (const ValidationError& e) {
      throw CampaignConfigError(e.what());
    }
  }
  if (config.retry.max_attempts < 1) {
    throw CampaignConfigError("retry.max_attempts must be >= 1");
  }
  if (config.retry.base_backoff_s < 0 || config.retry.multiplier < 1.0 ||
      config.retry.jitter_fraction < 0 || config.retry.jitter_fraction > 1) {
    throw CampaignConfigError("retry policy out of range");
  }
  try {
    ValidatePricing(config.pricing);
  } catch (const ValidationError& e) {
    throw CampaignConfigError(e.what());
  }
}

// Delay before retry number `attempt` (1-based count of failures so far),
// with symmetric jitter drawn from `unit` in [0, 1).
inline double BackoffDelay(const RetryPolicy& p, int attempt, double unit) {
  double base = p.base_backoff_s * std::pow(p.multiplier, attempt - 1);
  return base * (1.0 + p.jitter_fraction * (2.0 * unit - 1.0));
}

namespace campaign_detail {

struct Task {
  const ProbeImage* probe = nullptr;
  const ProbeImage* counterpart = nullptr;  // FS: the paired real probe
  RequestKind kind = RequestKind::kCR;
};

struct Outcome {
  Prediction prediction;
  std::optional<Percentage> similarity;
  double latency_ms = 0.0;
  std::int64_t billed = 0;
  std::optional<std::string> skip;
  std::int64_t timestamp_ms = 0;
};

// Time and admission for one provider across both phases.
class ProviderTimeline {
 public:
  ProviderTimeline(const CampaignConfig& config, const ProviderLimits& limits)
      : config_(config), limits_(limits) {
    if (config.mode == CampaignMode::kLive) {
      if (config.live_clock == nullptr) {
        own_clock_ = std::make_unique<SteadyClock>();
      }
      Clock& clock = config.live_clock ? *config.live_clock : *own_clock_;
      gate_ = std::make_unique<RateGate>(limits.rate, clock);
    } else {
      state_ = FullBucket(limits.rate);
    }
  }

  bool is_virtual() const { return gate_ == nullptr; }

  // Virtual mode: admission times for a whole phase, in task order.
  std::vector<std::int64_t> Schedule(std::size_t n) {
    auto times = AdmissionSchedule(limits_.rate, state_, n, now_s_);
    std::vector<std::int64_t> out;
    for (double t : times) {
      out.push_back(config_.epoch_ms + std::llround(t * 1000.0));
    }
    if (!times.empty()) now_s_ = times.back();
    return out;
  }

  // Live mode: block for a token, return the wall-clock admission time.
  std::int64_t Acquire() {
    gate_->Acquire();
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  void Sleep(double seconds) {
    if (!is_virtual()) {
      (config_.live_clock ? *config_.live_clock : *own_clock_).SleepFor(seconds);
    }
  }

 private:
  const CampaignConfig& config_;
  const ProviderLimits& limits_;
  std::unique_ptr<SteadyClock> own_clock_;
  std::unique_ptr<RateGate> gate_;
  BucketState state_;
  double now_s_ = 0.0;
};

inline Outcome Execute(RecognizerBackend& backend, const Task& task,
                       const CampaignConfig& config, ProviderTimeline& timeline,
                       std::optional<std::int64_t> scheduled_ms) {
  Outcome out;
  for (int attempt = 1;; ++attempt) {
    out.timestamp_ms =
        scheduled_ms && attempt == 1 ? *scheduled_ms
        : timeline.is_virtual()     ? out.timestamp_ms
                                    : timeline.Acquire();
    try {
      if (task.kind == RequestKind::kCR) {
        auto r = backend.RecognizeCelebrity(*task.probe);
        out.prediction = r.value;
        out.latency_ms = r.latency_ms;
      } else {
        auto r = backend.FaceSimilarity(*task.counterpart, *task.probe);
        out.similarity = r.value;
        out.latency_ms = r.latency_ms;
      }
      out.billed += 1;
      return out;
    } catch (const ProviderError& e) {
      bool reached_provider =
          e.kind() != ProviderErrorKind::kCassetteMiss &&
          e.kind() != ProviderErrorKind::kUnreadableImage;
      if (config.billing == BillingPolicy::kPerAttempt && reached_provider) {
        out.billed += 1;
      }
      if (!e.retryable() || attempt >= config.retry.max_attempts) {
        out.skip = std::string(SkipReasonFor(e.kind()));
        return out;
      }
      double u = KeyedUniform(
          config.seed, backend.provider_id() + ":" + task.probe->probe_id + ":" +
                           std::string(ToString(task.kind)) + ":" +
                           std::to_string(attempt));
      timeline.Sleep(BackoffDelay(config.retry, attempt, u));
    } catch (const std::exception&) {
      out.skip = std::string(skip_reason::kBadResponse);
      return out;
    }
  }
}

inline std::vector<Outcome> RunPhase(RecognizerBackend& backend,
                                     const std::vector<Task>& tasks,
                                     const CampaignConfig& config,
                                     const ProviderLimits& limits,
                                     ProviderTimeline& timeline) {
  std::vector<Outcome> outcomes(tasks.size());
  if (tasks.empty()) return outcomes;
  std::vector<std::int64_t> schedule;
  if (timeline.is_virtual()) schedule = timeline.Schedule(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      std::optional<std::int64_t> slot;
      if (!schedule.empty()) slot = schedule[i];
      outcomes[i] = Execute(backend, tasks[i], config, timeline, slot);
    }
  };
  std::size_t n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(limits.max_in_flight), tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return outcomes;
}

inline QueryRecord ToRecord(const std::string& provider_id, const Task& task,
                            const Outcome& o) {
  QueryRecord r;
  r.probe_id = task.probe->probe_id;
  r.provider_id = provider_id;
  r.request_kind = task.kind;
  r.prediction = o.prediction;
  r.similarity = o.similarity;
  r.latency_ms = o.latency_ms;
  r.skip_reason = o.skip;
  r.timestamp_ms = o.timestamp_ms;
  return r;
}

}  // namespace campaign_detail

// Prices each record's billed transactions (`billed[i]` for `log[i]`) as
// the increment of the provider's monthly cost, walking the sorted log so
// per-record costs are deterministic and sum to EstimateCost of the total.
inline void AssignUnitCosts(QueryLog& log,
                            const std::vector<std::int64_t>& billed,
                            const CampaignConfig& config) {
  std::map<std::string, std::int64_t> count = config.month_to_date;
  for (std::size_t i = 0; i < log.size(); ++i) {
    QueryRecord& r = log[i];
    std::int64_t& n = count[r.provider_id];
    r.unit_cost = EstimateCost(config.pricing, r.provider_id, n + billed[i]) -
                  EstimateCost(config.pricing, r.provider_id, n);
    n += billed[i];
  }
}

// Runs a campaign. When `admitted` is given, only those probe_ids are sent
// to providers (the defense layer accounts for the rest). Per-probe
// failures become skip records; only an unusable config throws.
inline QueryLog RunCampaign(const DatasetManifest& manifest,
                            const Backends& backends,
                            const CampaignConfig& config,
                            const std::set<std::string>* admitted = nullptr) {
  using campaign_detail::Outcome;
  using campaign_detail::Task;
  ValidateCampaignConfig(config, backends);

  std::vector<const ProbeImage*> probes;
  for (const auto& p : manifest.probes()) {
    if (admitted == nullptr || admitted->contains(p.probe_id)) {
      probes.push_back(&p);
    }
  }
  std::sort(probes.begin(), probes.end(),
            [](const ProbeImage* a, const ProbeImage* b) {
              return a->probe_id < b->probe_id;
            });

  using Billed = std::pair<QueryRecord, std::int64_t>;
  std::vector<std::vector<Billed>> per_provider(config.provider_ids.size());
  auto run_provider = [&](std::size_t k) {
    const std::string& id = config.provider_ids[k];
    RecognizerBackend& backend = *backends.at(id);
    const ProviderLimits& limits = config.LimitsFor(id);
    campaign_detail::ProviderTimeline timeline(config, limits);

    std::vector<Task> cr_tasks;
    for (const ProbeImage* p : probes) cr_tasks.push_back({p, nullptr, RequestKind::kCR});
    auto cr = campaign_detail::RunPhase(backend, cr_tasks, config, limits, timeline);

    std::vector<Task> fs_tasks;
    for (std::size_t i = 0; i < cr_tasks.size(); ++i) {
      const ProbeImage& p = *cr_tasks[i].probe;
      if (p.kind != ProbeKind::kFake || cr[i].skip) continue;
      bool wanted = config.fs_policy == FsPolicy::kAlways ||
                    (config.fs_policy == FsPolicy::kOnCrMiss &&
                     !cr[i].prediction.recognized());
      if (!wanted) continue;
      auto real_id = PairFakeWithReal(manifest, p.probe_id);
      if (!real_id) continue;
      fs_tasks.push_back({&p, &manifest.Get(*real_id), RequestKind::kFS});
    }
    auto fs = campaign_detail::RunPhase(backend, fs_tasks, config, limits, timeline);

    auto& out = per_provider[k];
    for (std::size_t i = 0; i < cr_tasks.size(); ++i) {
      out.emplace_back(campaign_detail::ToRecord(id, cr_tasks[i], cr[i]),
                       cr[i].billed);
    }
    for (std::size_t i = 0; i < fs_tasks.size(); ++i) {
      out.emplace_back(campaign_detail::ToRecord(id, fs_tasks[i], fs[i]),
                       fs[i].billed);
    }
  };

  std::vector<std::thread> threads;
  for (std::size_t k = 1; k < config.provider_ids.size(); ++k) {
    threads.emplace_back(run_provider, k);
  }
  run_provider(0);
  for (auto& t : threads) t.join();

  std::vector<Billed> all;
  for (auto& part : per_provider) {
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  std::stable_sort(all.begin(), all.end(), [](const Billed& a, const Billed& b) {
    return LogOrder(a.first, b.first);
  });
  QueryLog log;
  std::vector<std::int64_t> billed;
  for (auto& [r, b] : all) {
    log.push_back(std::move(r));
    billed.push_back(b);
  }
  AssignUnitCosts(log, billed, config);
  return log;
}

// Per-provider totals straight from a log.
struct ProviderCost {
  std::string provider_id;
  std::int64_t records = 0;
  std::int64_t skipped = 0;
  Money total;
};

inline std::vector<ProviderCost> SummarizeCost(const QueryLog& log) {
  std::map<std::string, ProviderCost> by;
  for (const auto& r : log) {
    ProviderCost& c = by[r.provider_id];
    c.provider_id = r.provider_id;
    ++c.records;
    if (r.skipped()) ++c.skipped;
    c.total += r.unit_cost;
  }
  std::vector<ProviderCost> out;
  for (auto& [id, c] : by) out.push_back(c);
  return out;
}

}  // namespace dia
