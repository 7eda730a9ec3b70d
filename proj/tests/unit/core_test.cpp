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

#include <cmath>
#include <limits>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"

namespace dia {
namespace {

TEST(NormalizeIdentity, FoldsCaseTrimsAndCollapsesWhitespace) {
  EXPECT_EQ(NormalizeIdentity("  Tom   HANKS \t").canonical_name(), "tom hanks");
  EXPECT_EQ(NormalizeIdentity("Tom Hanks"), NormalizeIdentity("tom  hanks"));
}

TEST(NormalizeIdentity, KeepsNonAsciiBytes) {
  EXPECT_EQ(NormalizeIdentity("Zo\xc3\xab").canonical_name(), "zo\xc3\xab");
}

TEST(NormalizeIdentity, RejectsEmptyName) {
  try {
    NormalizeIdentity("   ");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.rule(), "identity_empty");
  }
}

TEST(IdentityRef, EqualityIgnoresDemographicTag) {
  auto a = NormalizeIdentity("x", Demographic::kAsian);
  auto b = NormalizeIdentity("x");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.demographic_tag(), Demographic::kAsian);
}

TEST(Percentage, RejectsOutOfRangeInsteadOfClamping) {
  EXPECT_NO_THROW(Percentage(0.0));
  EXPECT_NO_THROW(Percentage(100.0));
  EXPECT_THROW(Percentage(100.01), ValidationError);
  EXPECT_THROW(Percentage(-0.01), ValidationError);
  EXPECT_THROW(Percentage(std::numeric_limits<double>::quiet_NaN()), ValidationError);
}

ProbeImage Fake(GenerationMethod m) {
  ProbeImage p;
  p.probe_id = "f";
  p.kind = ProbeKind::kFake;
  p.method = m;
  return p;
}

TEST(ProbeViolations, SynthesisWithTargetIsRejected) {
  ProbeImage p = Fake(GenerationMethod::kSynthesis);
  p.reference = NormalizeIdentity("a");
  p.reference2 = NormalizeIdentity("b");
  EXPECT_TRUE(ProbeViolations(p).empty());
  p.target = NormalizeIdentity("c");
  auto v = ProbeViolations(p);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "synthesis_forbids_target");
}

TEST(ProbeViolations, ReplacementNeedsTargetAndReference) {
  ProbeImage p = Fake(GenerationMethod::kReplacement);
  auto v = ProbeViolations(p);
  EXPECT_NE(std::find(v.begin(), v.end(), "fake_requires_target"), v.end());
  EXPECT_NE(std::find(v.begin(), v.end(), "fake_requires_reference"), v.end());
  p.target = NormalizeIdentity("t");
  p.reference = NormalizeIdentity("r");
  EXPECT_TRUE(ProbeViolations(p).empty());
  p.reference2 = NormalizeIdentity("r2");
  EXPECT_EQ(ProbeViolations(p), std::vector<std::string>{"reference2_only_for_synthesis"});
}

TEST(ProbeViolations, RealProbeRoleTable) {
  ProbeImage p;
  p.probe_id = "r";
  p.kind = ProbeKind::kReal;
  EXPECT_EQ(ProbeViolations(p), std::vector<std::string>{"real_requires_target"});
  p.target = NormalizeIdentity("t");
  EXPECT_TRUE(ProbeViolations(p).empty());
  p.reference = NormalizeIdentity("r");
  EXPECT_EQ(ProbeViolations(p), std::vector<std::string>{"real_forbids_reference"});
  p.reference.reset();
  p.method = GenerationMethod::kReplacement;
  EXPECT_EQ(ProbeViolations(p), std::vector<std::string>{"real_method_not_applicable"});
}

TEST(ProbeImage, SubjectIsTargetOrFirstReference) {
  ProbeImage p = Fake(GenerationMethod::kSynthesis);
  p.reference = NormalizeIdentity("a");
  p.reference2 = NormalizeIdentity("b");
  EXPECT_EQ(p.subject()->canonical_name(), "a");
}

TEST(Money, CentStringRoundsHalfAwayFromZero) {
  EXPECT_EQ(Money::FromDollars(1.0).ToCentString(), "1.00");
  EXPECT_EQ(Money{5'000'000}.ToCentString(), "0.01");
  EXPECT_EQ(Money{4'999'999}.ToCentString(), "0.00");
  EXPECT_EQ(Money{-15'000'000}.ToCentString(), "-0.02");
  EXPECT_EQ(Money::FromDollars(1800.0).ToCentString(), "1800.00");
}

TEST(Fnv1a64, MatchesPublishedVectors) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(KeyedUniform, IsThePortableSeedColonKeyRule) {
  // Same value a Python implementation computes for "7:f0001".
  EXPECT_EQ(Fnv1a64("7:f0001"), 0xb642621d8711dfd9ULL);
  EXPECT_EQ(Mix64(0xb642621d8711dfd9ULL), 0x13ec9ecdb8d02706ULL);
  EXPECT_DOUBLE_EQ(KeyedUniform(7, "f0001"), 0.0778292896509929);
  double u = KeyedUniform(123, "anything");
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}

TEST(KeyedUniform, AdjacentSeedsAreIndependent) {
  // Joint rate of two events must match the product for neighbouring seeds.
  const int n = 20000;
  int both = 0;
  for (int i = 0; i < n; ++i) {
    std::string id = "f" + std::to_string(i);
    both += KeyedUniform(211, id) < 0.5 && KeyedUniform(212, id) < 0.5;
  }
  EXPECT_NEAR(both / double(n), 0.25, 0.02);
}

TEST(UtcMillis, FormatsAndParsesRoundTrip) {
  EXPECT_EQ(FormatUtcMillis(1'609'459'200'000), "2021-01-01T00:00:00.000Z");
  EXPECT_EQ(FormatUtcMillis(1'609'459'203'333), "2021-01-01T00:00:03.333Z");
  std::int64_t ms = 0;
  ASSERT_TRUE(ParseUtcMillis("2021-01-01T00:00:03.333Z", ms));
  EXPECT_EQ(ms, 1'609'459'203'333);
  EXPECT_FALSE(ParseUtcMillis("yesterday", ms));
}

TEST(QueryRecord, BlockedIsNotSkipped) {
  QueryRecord r;
  r.skip_reason = std::string(skip_reason::kDefenseBlocked);
  EXPECT_TRUE(r.blocked());
  EXPECT_FALSE(r.skipped());
  r.skip_reason = std::string(skip_reason::kNetworkError);
  EXPECT_FALSE(r.blocked());
  EXPECT_TRUE(r.skipped());
}

}  // namespace
}  // namespace dia
