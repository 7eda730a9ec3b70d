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

#include <gtest/gtest.h>

#include <atomic>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dia/orchestrator/campaign.hpp"
#include "dia/orchestrator/pricing.hpp"
#include "dia/orchestrator/query_log.hpp"
#include "dia/orchestrator/rate_limit.hpp"
#include "dia/providers/cassette.hpp"
#include "dia/providers/simulated.hpp"
#include "oracle/scenario.hpp"

namespace dia {
namespace {

TEST(TokenBucket, ScheduleFollowsRefillRate) {
  TokenBucketParams p{1.0, 0.3};
  BucketState s = FullBucket(p);
  auto times = AdmissionSchedule(p, s, 20, 0.0);
  ASSERT_EQ(times.size(), 20u);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(times[k], k / 0.3, 1e-6);
  }
}

TEST(TokenBucket, CapacityAllowsBurst) {
  TokenBucketParams p{5.0, 1.0};
  BucketState s = FullBucket(p);
  auto times = AdmissionSchedule(p, s, 7, 0.0);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(times[k], 0.0);
  EXPECT_NEAR(times[5], 1.0, 1e-9);
  EXPECT_NEAR(times[6], 2.0, 1e-9);
}

TEST(TokenBucket, RejectsBadParams) {
  EXPECT_THROW(ValidateBucket({0.5, 1.0}), ValidationError);
  EXPECT_THROW(ValidateBucket({1.0, 0.0}), ValidationError);
}

TEST(RateGate, VirtualClockAdmissions) {
  VirtualClock clock;
  RateGate gate({1.0, 0.3}, clock);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(gate.Acquire(), k / 0.3, 1e-6);
}

struct GoldenCost {
  const char* provider;
  std::int64_t tx;
  const char* dollars;
};

TEST(Pricing, MarginalGoldenValues) {
  const GoldenCost kCases[] = {
      {"aws", 2'000'000, "1800.00"},   {"aws", 15'000'000, "11200.00"},
      {"aws", 150'000'000, "82200.00"}, {"nav", 2'000'000, "1500.00"},
      {"nav", 15'000'000, "8000.00"},   {"nav", 150'000'000, "65500.00"},
      {"ms", 2'000'000, "1800.00"},     {"ms", 15'000'000, "10200.00"},
      {"ms", 150'000'000, "81200.00"},  {"ms-free", 2'000'000, "1770.00"},
      {"ms-free", 15'000'000, "10170.00"}, {"ms-free", 150'000'000, "81170.00"},
      {"aws", 1000, "1.00"},           {"ms-free", 30'000, "0.00"},
      {"ms-free", 30'001, "0.00"},     {"aws", 0, "0.00"},
  };
  auto s = DefaultPricingSchedule();
  for (const auto& c : kCases) {
    EXPECT_EQ(EstimateCost(s, c.provider, c.tx).ToCentString(), c.dollars)
        << c.provider << " " << c.tx;
  }
  EXPECT_EQ(EstimateCost(s, "ms-free", 30'001), Money{1'000'000});
}

TEST(Pricing, FlatModeUsesTotalTier) {
  auto s = DefaultPricingSchedule();
  s.mode = TierMode::kFlatByVolume;
  EXPECT_EQ(EstimateCost(s, "aws", 2'000'000).ToCentString(), "1600.00");
  EXPECT_EQ(EstimateCost(s, "aws", 1'000'000).ToCentString(), "1000.00");
}

TEST(Pricing, MarginalIsMonotoneAndAdditive) {
  auto s = DefaultPricingSchedule();
  Money prev;
  for (std::int64_t n = 0; n <= 12'000'000; n += 250'000) {
    Money c = EstimateCost(s, "ms", n);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(Pricing, UnknownProviderAndNegativeCount) {
  auto s = DefaultPricingSchedule();
  EXPECT_THROW(EstimateCost(s, "nobody", 1), UnknownProviderError);
  EXPECT_THROW(EstimateCost(s, "aws", -1), ValidationError);
}

TEST(Pricing, ParsesSchedule) {
  auto j = nlohmann::json::parse(R"({"mode":"marginal","providers":{"x":{
      "free_allowance":10,"tiers":[{"up_to":100,"price_per_1000":2.0},
      {"up_to":null,"price_per_1000":1.0}]}}})");
  auto s = ParsePricingSchedule(j);
  // 90 at $0.002 + 100 at $0.001
  EXPECT_EQ(EstimateCost(s, "x", 200), Money{90 * 2'000'000 + 100 * 1'000'000});
  j["providers"]["x"]["tiers"][1]["up_to"] = 50;
  EXPECT_THROW(ParsePricingSchedule(j), ValidationError);
}

TEST(QueryLog, RoundTripsEveryField) {
  QueryRecord a;
  a.probe_id = "f1";
  a.provider_id = "aws";
  a.prediction.match = Match{NormalizeIdentity("Emma Watson"), Percentage(97.25)};
  a.latency_ms = 120.5;
  a.unit_cost = Money{1'000'000};
  a.timestamp_ms = 1'609'459'200'123;
  QueryRecord b;
  b.probe_id = "f1";
  b.provider_id = "aws";
  b.request_kind = RequestKind::kFS;
  b.similarity = Percentage(81.5);
  b.skip_reason = "quota_exceeded";
  std::stringstream ss;
  WriteQueryLog(ss, {a, b});
  auto back = ReadQueryLog(ss);
  ASSERT_EQ(back.size(), 2u);
  std::stringstream again;
  WriteQueryLog(again, back);
  std::stringstream orig;
  WriteQueryLog(orig, {a, b});
  EXPECT_EQ(again.str(), orig.str());
  EXPECT_EQ(back[0].prediction, a.prediction);
  EXPECT_EQ(back[0].unit_cost, a.unit_cost);
  EXPECT_EQ(back[0].timestamp_ms, a.timestamp_ms);
  EXPECT_EQ(back[1].skip_reason, b.skip_reason);
}

TEST(QueryLog, RejectsMalformedLines) {
  std::stringstream ss(R"({"probe_id":"f1","provider_id":"p","request_kind":"CR",)"
                       R"("confidence":9,"latency_ms":1,"unit_cost":0,)"
                       R"("timestamp":"2021-01-01T00:00:00.000Z"})");
  EXPECT_THROW(ReadQueryLog(ss), ValidationError);
}

DatasetManifest SmallManifest() {
  oracle::Gen g(11);
  return oracle::RandomManifest(g, 20);
}

std::shared_ptr<SimulatedProvider> Sim(const DatasetManifest& m, const std::string& id,
                                       double threshold) {
  ProviderProfile prof;
  prof.provider_id = id;
  prof.report_threshold = Percentage(threshold);
  prof.gallery = MakeGallery(m.Identities(), 16, 1);
  prof.noise_scale = 0.4;
  prof.rng_seed = 3;
  return std::make_shared<SimulatedProvider>(prof);
}

CampaignConfig Config(std::vector<std::string> ids) {
  CampaignConfig c;
  c.provider_ids = std::move(ids);
  c.pricing.providers["p0"] = c.pricing.providers.at("aws");
  c.pricing.providers["p1"] = c.pricing.providers.at("ms-free");
  return c;
}

std::string Dump(const QueryLog& log) {
  std::stringstream ss;
  WriteQueryLog(ss, log);
  return ss.str();
}

TEST(RunCampaign, DeterministicAcrossRunsAndThreads) {
  auto m = SmallManifest();
  Backends b{{"p0", Sim(m, "p0", 60)}, {"p1", Sim(m, "p1", 85)}};
  auto c = Config({"p0", "p1"});
  auto first = Dump(RunCampaign(m, b, c));
  c.limits["p0"].max_in_flight = 1;
  c.limits["p1"].max_in_flight = 8;
  EXPECT_EQ(Dump(RunCampaign(m, b, c)), first);
}

TEST(RunCampaign, OneCrRecordPerProbeAndSortedOrder) {
  auto m = SmallManifest();
  Backends b{{"p0", Sim(m, "p0", 60)}};
  auto log = RunCampaign(m, b, Config({"p0"}));
  std::size_t cr = 0;
  for (const auto& r : log) cr += r.request_kind == RequestKind::kCR;
  EXPECT_EQ(cr, m.probes().size());
  EXPECT_TRUE(std::is_sorted(log.begin(), log.end(), LogOrder));
}

TEST(RunCampaign, FsPolicies) {
  auto m = SmallManifest();
  Backends b{{"p0", Sim(m, "p0", 60)}};
  auto c = Config({"p0"});
  auto count_fs = [&](FsPolicy p) {
    c.fs_policy = p;
    auto log = RunCampaign(m, b, c);
    int fs = 0;
    for (const auto& r : log) fs += r.request_kind == RequestKind::kFS;
    return fs;
  };
  int never = count_fs(FsPolicy::kNever);
  int miss = count_fs(FsPolicy::kOnCrMiss);
  int always = count_fs(FsPolicy::kAlways);
  EXPECT_EQ(never, 0);
  EXPECT_LE(miss, always);
  int pairable = 0;
  for (const auto& p : m.probes()) {
    pairable += p.kind == ProbeKind::kFake && PairFakeWithReal(m, p.probe_id).has_value();
  }
  EXPECT_EQ(always, pairable);
}

TEST(RunCampaign, UnitCostsSumToEstimate) {
  auto m = SmallManifest();
  Backends b{{"p0", Sim(m, "p0", 60)}, {"p1", Sim(m, "p1", 60)}};
  auto c = Config({"p0", "p1"});
  c.month_to_date["p0"] = 999'990;  // straddles the first tier boundary
  c.month_to_date["p1"] = 29'995;   // straddles the free allowance
  auto log = RunCampaign(m, b, c);
  for (const std::string id : {"p0", "p1"}) {
    Money sum;
    std::int64_t n = 0;
    for (const auto& r : log) {
      if (r.provider_id != id) continue;
      sum += r.unit_cost;
      n += !r.skipped();
    }
    std::int64_t mtd = c.month_to_date[id];
    EXPECT_EQ(sum, EstimateCost(c.pricing, id, mtd + n) - EstimateCost(c.pricing, id, mtd))
        << id;
  }
}

TEST(RunCampaign, VirtualTimestampsFollowBucket) {
  auto m = SmallManifest();
  Backends b{{"p0", Sim(m, "p0", 60)}};
  auto c = Config({"p0"});
  c.fs_policy = FsPolicy::kNever;
  c.limits["p0"].rate = {1.0, 0.5};
  auto log = RunCampaign(m, b, c);
  for (std::size_t k = 0; k < log.size(); ++k) {
    EXPECT_EQ(log[k].timestamp_ms, c.epoch_ms + static_cast<std::int64_t>(k) * 2000);
  }
}

class FlakyBackend : public RecognizerBackend {
 public:
  FlakyBackend(ProviderErrorKind kind, int failures) : kind_(kind), failures_(failures) {}
  const std::string& provider_id() const override { return id_; }
  Timed<Prediction> RecognizeCelebrity(const ProbeImage&) override {
    ++calls;
    if (calls <= failures_) throw ProviderError(kind_, "injected");
    return {Prediction{}, 1.0};
  }
  Timed<Percentage> FaceSimilarity(const ProbeImage&, const ProbeImage&) override {
    return {Percentage(50), 1.0};
  }
  std::atomic<int> calls{0};

 private:
  std::string id_ = "p0";
  ProviderErrorKind kind_;
  int failures_;
};

DatasetManifest OneProbe() {
  ProbeImage p;
  p.probe_id = "r1";
  p.uri = "r1.png";
  p.target = NormalizeIdentity("a");
  return DatasetManifest("d", "", {p});
}

TEST(RunCampaign, RetryThenSucceed) {
  auto m = OneProbe();
  auto flaky = std::make_shared<FlakyBackend>(ProviderErrorKind::kNetwork, 2);
  auto c = Config({"p0"});
  c.billing = BillingPolicy::kPerAttempt;
  auto log = RunCampaign(m, {{"p0", flaky}}, c);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_FALSE(log[0].skip_reason.has_value());
  EXPECT_EQ(flaky->calls, 3);
  EXPECT_EQ(log[0].unit_cost, Money{3'000'000});
}

TEST(RunCampaign, RetryExhaustionBecomesSkip) {
  auto m = OneProbe();
  auto flaky = std::make_shared<FlakyBackend>(ProviderErrorKind::kQuotaExceeded, 100);
  auto log = RunCampaign(m, {{"p0", flaky}}, Config({"p0"}));
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].skip_reason, "quota_exceeded");
  EXPECT_EQ(flaky->calls, 3);
  EXPECT_EQ(log[0].unit_cost, Money{0});
}

TEST(RunCampaign, FatalErrorIsNotRetried) {
  auto m = OneProbe();
  auto flaky = std::make_shared<FlakyBackend>(ProviderErrorKind::kUnreadableImage, 100);
  auto log = RunCampaign(m, {{"p0", flaky}}, Config({"p0"}));
  EXPECT_EQ(log[0].skip_reason, "unreadable_image");
  EXPECT_EQ(flaky->calls, 1);
}

TEST(RunCampaign, ConfigErrors) {
  auto m = OneProbe();
  auto b = std::make_shared<FlakyBackend>(ProviderErrorKind::kNetwork, 0);
  EXPECT_THROW(RunCampaign(m, {{"p0", b}}, Config({})), CampaignConfigError);
  EXPECT_THROW(RunCampaign(m, {{"p0", b}}, Config({"p0", "p0"})), CampaignConfigError);
  EXPECT_THROW(RunCampaign(m, {}, Config({"p0"})), CampaignConfigError);
  auto c = Config({"zz"});
  EXPECT_THROW(RunCampaign(m, {{"zz", b}}, c), CampaignConfigError);
}

TEST(RunCampaign, RecordThenReplayMatches) {
  auto m = SmallManifest();
  std::stringstream tape;
  auto writer = std::make_shared<CassetteWriter>(tape);
  auto c = Config({"p0"});
  c.fs_policy = FsPolicy::kAlways;
  Backends rec{{"p0", std::make_shared<RecordingProvider>(Sim(m, "p0", 60), writer)}};
  auto recorded = RunCampaign(m, rec, c);

  auto cassette = std::make_shared<Cassette>(Cassette::Parse(tape));
  Backends replay{{"p0", std::make_shared<ReplayProvider>("p0", cassette)}};
  c.mode = CampaignMode::kReplay;
  EXPECT_EQ(Dump(RunCampaign(m, replay, c)), Dump(recorded));
}

TEST(RunCampaign, ReplayMissIsSkipped) {
  auto m = OneProbe();
  auto cassette = std::make_shared<Cassette>();
  auto c = Config({"p0"});
  c.mode = CampaignMode::kReplay;
  auto log = RunCampaign(m, {{"p0", std::make_shared<ReplayProvider>("p0", cassette)}}, c);
  EXPECT_EQ(log[0].skip_reason, "cassette_miss");
  EXPECT_EQ(log[0].unit_cost, Money{0});
}

TEST(Backoff, GrowsGeometricallyWithJitter) {
  RetryPolicy p;
  EXPECT_DOUBLE_EQ(BackoffDelay(p, 1, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(BackoffDelay(p, 3, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(BackoffDelay(p, 1, 0.0), 0.9);
}

}  // namespace
}  // namespace dia
