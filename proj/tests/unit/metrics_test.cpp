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

#include <string>
#include <vector>

#include "dia/metrics/metrics.hpp"
#include "oracle/brute_force.hpp"
#include "oracle/compare.hpp"
#include "oracle/scenario.hpp"

namespace dia {
namespace {

ProbeImage Probe(const std::string& id, ProbeKind kind, GenerationMethod m,
                 const char* target, const char* ref, const char* ref2 = nullptr) {
  ProbeImage p;
  p.probe_id = id;
  p.uri = id + ".png";
  p.kind = kind;
  p.method = m;
  p.dataset_id = "ds";
  if (target) p.target = NormalizeIdentity(target);
  if (ref) p.reference = NormalizeIdentity(ref);
  if (ref2) p.reference2 = NormalizeIdentity(ref2);
  return p;
}

DatasetManifest HandManifest() {
  using GM = GenerationMethod;
  std::vector<ProbeImage> probes = {
      Probe("rA1", ProbeKind::kReal, GM::kNotApplicable, "A", nullptr),
      Probe("rB1", ProbeKind::kReal, GM::kNotApplicable, "B", nullptr),
      Probe("f1", ProbeKind::kFake, GM::kReplacement, "A", "B"),
      Probe("f2", ProbeKind::kFake, GM::kReenactment, "A", "B"),
      Probe("f3", ProbeKind::kFake, GM::kReplacement, "B", "A"),
      Probe("f4", ProbeKind::kFake, GM::kSynthesis, nullptr, "A", "B"),
      Probe("f5", ProbeKind::kFake, GM::kReplacement, "B", "A"),
      Probe("f6", ProbeKind::kFake, GM::kReenactment, "A", "B"),
  };
  std::map<std::string, IdentityRef> aliases{{"bee", NormalizeIdentity("B")}};
  std::map<std::string, Demographic> tags{{"a", Demographic::kWhite},
                                          {"b", Demographic::kAsian}};
  return DatasetManifest("ds", "hand-built", probes, aliases, tags);
}

QueryRecord Cr(const std::string& probe, const char* name = nullptr, double conf = 0) {
  QueryRecord r;
  r.provider_id = "p";
  r.probe_id = probe;
  if (name) r.prediction.match = Match{NormalizeIdentity(name), Percentage(conf)};
  return r;
}

QueryRecord Fs(const std::string& probe, double sim) {
  QueryRecord r;
  r.provider_id = "p";
  r.probe_id = probe;
  r.request_kind = RequestKind::kFS;
  r.similarity = Percentage(sim);
  return r;
}

QueryRecord Skip(QueryRecord r, const char* reason) {
  r.skip_reason = reason;
  r.prediction = {};
  r.similarity.reset();
  return r;
}

QueryLog HandLog() {
  return {Cr("rA1", "A", 90),        Cr("rB1"),
          Cr("f1", "A", 95),         Cr("f2", "B", 85),
          Fs("f2", 99),              Cr("f3"),
          Fs("f3", 80),              Cr("f4", "bee", 90),
          Skip(Cr("f5"), "network_error"), Skip(Fs("f5", 0), "quota_exceeded"),
          Skip(Cr("f6"), "defense_blocked"), Fs("f6", 95)};
}

TEST(Aggregate, HandBuiltLog) {
  auto m = HandManifest();
  auto log = HandLog();
  ASSERT_EQ(log.size(), 12u);
  auto report = Aggregate(log, m, {});
  ASSERT_EQ(report.cells.size(), 1u);
  const CellReport& c = report.cells.at({"p", "ds"});
  EXPECT_EQ(c.counts.fakes, 5);
  EXPECT_EQ(c.counts.skipped, 1);
  EXPECT_EQ(c.ta(), (Ratio{2, 5}));
  EXPECT_EQ(c.na(), (Ratio{3, 5}));
  EXPECT_EQ(c.dhf(), (Ratio{1, 4}));
  EXPECT_EQ(c.dhc(), (Ratio{1, 5}));
  EXPECT_EQ(c.dhs(), (Ratio{1, 5}));
  EXPECT_EQ(c.dhs_missed(), (Ratio{1, 2}));
  EXPECT_EQ(c.sic(), (Ratio{1, 2}));
  EXPECT_EQ(c.counts.ta_relaxed, 1);
  EXPECT_EQ(c.counts.ta_relaxed_success, 1);
  EXPECT_EQ(c.demographics.at(Demographic::kWhite).fakes, 4);
  EXPECT_EQ(c.demographics.at(Demographic::kAsian).fakes, 1);
  EXPECT_EQ(c.demographics.at(Demographic::kAsian).predicted, 2);
  EXPECT_EQ(c.celebrities.at("a").fake_conf_centi, 9500 + 8500 + 9000);
  EXPECT_EQ(oracle::Diff(report, oracle::Enumerate(log, m, 90, 80)), "");
}

TEST(Aggregate, ThresholdsAreStrict) {
  auto m = HandManifest();
  auto log = HandLog();
  auto loose = Aggregate(log, m, {Percentage(89.99), Percentage(79.99)});
  const CellReport& c = loose.cells.at({"p", "ds"});
  EXPECT_EQ(c.dhc(), (Ratio{2, 5}));  // f4 at exactly 90 now counts
  EXPECT_EQ(c.dhs(), (Ratio{2, 5}));  // f3 at exactly 80 now counts
}

TEST(Aggregate, EmptyLogIsUndefined) {
  auto m = HandManifest();
  auto report = Aggregate({}, m, {});
  EXPECT_TRUE(report.cells.empty());
  CellReport empty;
  EXPECT_FALSE(empty.ta().value().has_value());
  EXPECT_FALSE(empty.sic().value().has_value());
}

TEST(Aggregate, AllSkippedIsUndefinedNotZero) {
  auto m = HandManifest();
  QueryLog log = {Skip(Cr("f1"), "network_error")};
  auto report = Aggregate(log, m, {});
  const CellReport& c = report.cells.at({"p", "ds"});
  EXPECT_EQ(c.counts.skipped, 1);
  EXPECT_FALSE(c.na().value().has_value());
}

TEST(Aggregate, RejectsLogManifestMismatch) {
  auto m = HandManifest();
  EXPECT_THROW(Aggregate({Cr("nope")}, m, {}), LogManifestMismatch);
  EXPECT_THROW(Aggregate({Cr("f1"), Cr("f1")}, m, {}), LogManifestMismatch);
  EXPECT_THROW(Aggregate({Fs("rA1", 10)}, m, {}), LogManifestMismatch);
}

TEST(Aggregate, MatchesOracleOnRandomLogs) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto s = oracle::RandomScenario(seed);
    auto report = Aggregate(s.log, s.manifest, {});
    EXPECT_EQ(oracle::Diff(report, oracle::Enumerate(s.log, s.manifest, 90, 80)), "")
        << "seed " << seed;
  }
}

TEST(Aggregate, PartitionsMergeExactly) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = oracle::RandomScenario(seed, 40);
    QueryLog a, b;
    for (const auto& r : s.log) {
      const ProbeImage& p = s.manifest.Get(r.probe_id);
      if (p.kind == ProbeKind::kReal) {
        a.push_back(r);
        b.push_back(r);
      } else {
        (std::hash<std::string>{}(r.probe_id) % 2 ? a : b).push_back(r);
      }
    }
    auto merged = Aggregate(a, s.manifest, {});
    merged.Merge(Aggregate(b, s.manifest, {}));
    // Celebrities and demographics only appear when a fake touches them, so
    // compare after merging, which is also what a partitioned run does.
    EXPECT_EQ(merged, Aggregate(s.log, s.manifest, {})) << "seed " << seed;
  }
}

TEST(Aggregate, TargetedImpliesNonTargeted) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto s = oracle::RandomScenario(seed);
    for (const auto& r : s.log) {
      if (r.request_kind != RequestKind::kCR) continue;
      if (s.manifest.Get(r.probe_id).kind != ProbeKind::kFake) continue;
      auto o = PairOutcome(s.log, s.manifest, r);
      if (!o) continue;
      if (EvalTargeted(*o).success) {
        EXPECT_TRUE(EvalNonTargeted(o->fake_record));
      }
    }
  }
}

TEST(ComputeSic, AgreesWithAggregate) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto s = oracle::RandomScenario(seed);
    QueryLog single;
    for (const auto& r : s.log) {
      if (r.provider_id == "p0") single.push_back(r);
    }
    auto sic = ComputeSic(single, s.manifest);
    auto report = Aggregate(single, s.manifest, {});
    Ratio total;
    std::map<std::string, bool> any;
    for (const auto& [key, cell] : report.cells) {
      for (const auto& [name, row] : cell.celebrities) any[name] = any[name] || row.sic();
    }
    for (const auto& [name, ok] : any) {
      ++total.den;
      total.num += ok;
    }
    EXPECT_EQ(sic.rate, total) << "seed " << seed;
  }
}

TEST(Aggregate, BlockedRealBreaksPairing) {
  auto m = HandManifest();
  QueryLog log = {Skip(Cr("rA1"), "defense_blocked"), Cr("f1", "A", 95)};
  const CellReport& c = Aggregate(log, m, {}).cells.at({"p", "ds"});
  // The paired real is present but unrecognized, so the targeted attack
  // cannot confirm the identity.
  EXPECT_EQ(c.ta(), (Ratio{0, 1}));
  EXPECT_EQ(c.dhf(), (Ratio{1, 1}));
}

}  // namespace
}  // namespace dia
