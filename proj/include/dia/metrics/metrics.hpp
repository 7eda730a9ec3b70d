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

// Attack-success predicates and robustness metrics over a query log.
//
//   TA   fake recognized as its target, and the paired real image
//        recognized as that same celebrity
//   NA   fake recognized as any celebrity
//   DHF  fake recognized with confidence strictly above its real image's
//   DHC  fake recognized with confidence strictly above beta
//   DHS  fake not recognized, face similarity to its real strictly above gamma
//   SIC  per celebrity: at least one of their fakes is a TA success
//
// All thresholds are strict; ties fail.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/manifest.hpp"

namespace dia {

// A fake's CR record joined with its paired real probe's CR record (same
// provider). Names are already resolved through the manifest alias table.
struct PairedOutcome {
  QueryRecord fake_record;
  std::optional<QueryRecord> real_record;
  ProbeImage fake_probe;
};

struct TargetedResult {
  bool success = false;
  // Evaluated without the real-image condition: synthesis fakes (success iff
  // named as either reference) or fakes lacking a paired real record.
  bool relaxed = false;
};

inline TargetedResult EvalTargeted(const PairedOutcome& o) {
  const auto& fake = o.fake_record.prediction.match;
  const ProbeImage& p = o.fake_probe;
  if (p.method == GenerationMethod::kSynthesis || !p.target) {
    bool hit = fake && ((p.reference && fake->name == *p.reference) ||
                        (p.reference2 && fake->name == *p.reference2));
    return {hit, true};
  }
  if (!o.real_record) {
    return {fake && fake->name == *p.target, true};
  }
  const auto& real = o.real_record->prediction.match;
  bool hit = fake && fake->name == *p.target && real && real->name == fake->name;
  return {hit, false};
}

inline bool EvalNonTargeted(const QueryRecord& fake_cr) {
  return fake_cr.prediction.recognized();
}

enum class NaOutcome { kTargetMatch, kReferenceMatch, kOtherCelebrity, kNoMatch };

inline std::string_view ToString(NaOutcome o) {
  switch (o) {
    case NaOutcome::kTargetMatch: return "TargetMatch";
    case NaOutcome::kReferenceMatch: return "ReferenceMatch";
    case NaOutcome::kOtherCelebrity: return "OtherCelebrity";
    case NaOutcome::kNoMatch: return "NoMatch";
  }
  return "NoMatch";
}

inline NaOutcome ClassifyNaOutcome(const PairedOutcome& o) {
  const auto& m = o.fake_record.prediction.match;
  if (!m) return NaOutcome::kNoMatch;
  const ProbeImage& p = o.fake_probe;
  if (p.target && m->name == *p.target) return NaOutcome::kTargetMatch;
  if ((p.reference && m->name == *p.reference) ||
      (p.reference2 && m->name == *p.reference2)) {
    return NaOutcome::kReferenceMatch;
  }
  return NaOutcome::kOtherCelebrity;
}

// nullopt when there is no paired real record; such fakes are left out of
// the DHF denominator. An unrecognized real image counts as confidence 0.
inline std::optional<bool> EvalDhf(const PairedOutcome& o) {
  if (!o.real_record) return std::nullopt;
  const Prediction& fake = o.fake_record.prediction;
  return fake.recognized() &&
         fake.confidence_or_zero() > o.real_record->prediction.confidence_or_zero();
}

inline bool EvalDhc(const QueryRecord& fake_cr, Percentage beta) {
  return fake_cr.prediction.recognized() &&
         fake_cr.prediction.match->confidence > beta;
}

struct DhsResult {
  bool success = false;
  bool fs_missing = false;  // not recognized, yet no similarity available
};

inline DhsResult EvalDhs(const QueryRecord& fake_cr,
                         std::optional<Percentage> similarity,
                         Percentage gamma) {
  if (fake_cr.prediction.recognized()) return {false, false};
  if (!similarity) return {false, true};
  return {*similarity > gamma, false};
}

struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 0;

  // Undefined (0/0) stays undefined rather than reading as zero.
  std::optional<double> value() const {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct CellKey {
  std::string provider_id;
  std::string dataset_id;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellCounts {
  std::int64_t fakes = 0;    // fake CR records evaluated (incl. blocked)
  std::int64_t skipped = 0;  // fake CR requests that failed
  std::int64_t ta = 0;
  std::int64_t ta_relaxed = 0;          // fakes evaluated under relaxed TA
  std::int64_t ta_relaxed_success = 0;  // of which successes
  std::int64_t na = 0;
  std::int64_t dhf = 0;
  std::int64_t dhf_paired = 0;
  std::int64_t dhf_unpaired = 0;
  std::int64_t dhc = 0;
  std::int64_t dhs = 0;
  std::int64_t cr_missed = 0;
  std::int64_t fs_missing = 0;
  std::int64_t na_target = 0;
  std::int64_t na_reference = 0;
  std::int64_t na_other = 0;
  std::int64_t na_none = 0;

  void Add(const CellCounts& o) {
    fakes += o.fakes;
    skipped += o.skipped;
    ta += o.ta;
    ta_relaxed += o.ta_relaxed;
    ta_relaxed_success += o.ta_relaxed_success;
    na += o.na;
    dhf += o.dhf;
    dhf_paired += o.dhf_paired;
    dhf_unpaired += o.dhf_unpaired;
    dhc += o.dhc;
    dhs += o.dhs;
    cr_missed += o.cr_missed;
    fs_missing += o.fs_missing;
    na_target += o.na_target;
    na_reference += o.na_reference;
    na_other += o.na_other;
    na_none += o.na_none;
  }
  friend bool operator==(const CellCounts&, const CellCounts&) = default;
};

// Per-celebrity breakdown. Confidences are summed in hundredths of a
// percent so partial reports merge exactly.
struct CelebrityRow {
  std::int64_t n_fakes = 0;
  std::int64_t ta = 0;
  std::int64_t na = 0;
  std::int64_t dhc = 0;
  std::int64_t dhs = 0;
  std::int64_t fake_conf_centi = 0;
  std::int64_t fake_conf_n = 0;
  std::int64_t real_conf_centi = 0;
  std::int64_t real_conf_n = 0;

  void Add(const CelebrityRow& o) {
    n_fakes += o.n_fakes;
    ta += o.ta;
    na += o.na;
    dhc += o.dhc;
    dhs += o.dhs;
    fake_conf_centi += o.fake_conf_centi;
    fake_conf_n += o.fake_conf_n;
    real_conf_centi += o.real_conf_centi;
    real_conf_n += o.real_conf_n;
  }
  bool sic() const { return ta > 0; }
  std::optional<double> mean_fake_confidence() const {
    if (fake_conf_n == 0) return std::nullopt;
    return static_cast<double>(fake_conf_centi) / 100.0 / fake_conf_n;
  }
  std::optional<double> mean_real_confidence() const {
    if (real_conf_n == 0) return std::nullopt;
    return static_cast<double>(real_conf_centi) / 100.0 / real_conf_n;
  }
  friend bool operator==(const CelebrityRow&, const CelebrityRow&) = default;
};

struct DemographicRow {
  std::int64_t fakes = 0;      // fakes whose subject carries this tag
  std::int64_t predicted = 0;  // recognized fakes named as someone with it

  void Add(const DemographicRow& o) {
    fakes += o.fakes;
    predicted += o.predicted;
  }
  friend bool operator==(const DemographicRow&, const DemographicRow&) = default;
};

struct CellReport {
  CellCounts counts;
  std::map<std::string, CelebrityRow> celebrities;  // by canonical name
  std::map<Demographic, DemographicRow> demographics;

  Ratio ta() const { return {counts.ta, counts.fakes}; }
  Ratio na() const { return {counts.na, counts.fakes}; }
  Ratio dhf() const { return {counts.dhf, counts.dhf_paired}; }
  Ratio dhc() const { return {counts.dhc, counts.fakes}; }
  // DHS over every evaluated fake, and over only the CR misses.
  Ratio dhs() const { return {counts.dhs, counts.fakes}; }
  Ratio dhs_missed() const { return {counts.dhs, counts.cr_missed}; }
  Ratio sic() const {
    Ratio r;
    for (const auto& [name, row] : celebrities) {
      ++r.den;
      if (row.sic()) ++r.num;
    }
    return r;
  }

  void Add(const CellReport& o) {
    counts.Add(o.counts);
    for (const auto& [name, row] : o.celebrities) celebrities[name].Add(row);
    for (const auto& [tag, row] : o.demographics) demographics[tag].Add(row);
  }
  friend bool operator==(const CellReport&, const CellReport&) = default;
};

struct EvaluationReport {
  MetricConfig config;
  std::map<CellKey, CellReport> cells;

  void Merge(const EvaluationReport& o) {
    for (const auto& [key, cell] : o.cells) cells[key].Add(cell);
  }
  friend bool operator==(const EvaluationReport& a, const EvaluationReport& b) {
    return a.config.beta == b.config.beta && a.config.gamma == b.config.gamma &&
           a.cells == b.cells;
  }
};

class LogManifestMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace metrics_detail {

inline std::int64_t Centi(Percentage p) {
  return std::llround(p.value() * 100.0);
}

inline QueryRecord Resolved(const DatasetManifest& m, QueryRecord r) {
  if (r.prediction.match) {
    r.prediction.match->name = m.Resolve(r.prediction.match->name);
  }
  return r;
}

struct LogIndex {
  // (provider, probe) -> record
  std::map<std::pair<std::string, std::string>, const QueryRecord*> cr;
  std::map<std::pair<std::string, std::string>, const QueryRecord*> fs;
};

inline LogIndex IndexLog(const QueryLog& log, const DatasetManifest& manifest) {
  LogIndex idx;
  for (const QueryRecord& r : log) {
    const ProbeImage* p = manifest.Find(r.probe_id);
    if (p == nullptr) {
      throw LogManifestMismatch("log references unknown probe_id '" +
                                r.probe_id + "'");
    }
    auto& table = r.request_kind == RequestKind::kCR ? idx.cr : idx.fs;
    if (!table.emplace(std::make_pair(r.provider_id, r.probe_id), &r).second) {
      throw LogManifestMismatch("duplicate " +
                                std::string(ToString(r.request_kind)) +
                                " record for " + r.provider_id + "/" +
                                r.probe_id);
    }
    if (r.request_kind == RequestKind::kFS && p->kind != ProbeKind::kFake) {
      throw LogManifestMismatch("FS record on real probe '" + r.probe_id + "'");
    }
  }
  return idx;
}

}  // namespace metrics_detail

// Builds the paired outcome for one fake CR record, or nullopt when the
// record is a failed (skipped) request.
inline std::optional<PairedOutcome> PairOutcome(const QueryLog& log,
                                                const DatasetManifest& manifest,
                                                const QueryRecord& fake_cr) {
  if (fake_cr.skipped()) return std::nullopt;
  PairedOutcome o{metrics_detail::Resolved(manifest, fake_cr), std::nullopt,
                  manifest.Get(fake_cr.probe_id)};
  if (auto real_id = PairFakeWithReal(manifest, fake_cr.probe_id)) {
    for (const QueryRecord& r : log) {
      if (r.request_kind == RequestKind::kCR && r.probe_id == *real_id &&
          r.provider_id == fake_cr.provider_id && !r.skipped()) {
        o.real_record = metrics_detail::Resolved(manifest, r);
        break;
      }
    }
  }
  return o;
}

// Aggregates a complete log into per (provider, dataset) cells.
//
// Counting runs over fake records only; real CR records serve as pairing
// context. Splitting a log's fake records into parts (each part keeping the
// real records) and merging the per-part reports reproduces the whole.
inline EvaluationReport Aggregate(const QueryLog& log,
                                  const DatasetManifest& manifest,
                                  const MetricConfig& config) {
  using metrics_detail::Centi;
  EvaluationReport report;
  report.config = config;
  const auto idx = metrics_detail::IndexLog(log, manifest);

  for (const auto& [key, rec] : idx.cr) {
    const ProbeImage& probe = manifest.Get(key.second);
    if (probe.kind != ProbeKind::kFake) continue;
    CellReport& cell = report.cells[{key.first, probe.dataset_id}];
    if (rec->skipped()) {
      ++cell.counts.skipped;
      continue;
    }

    PairedOutcome o{metrics_detail::Resolved(manifest, *rec), std::nullopt,
                    probe};
    if (auto real_id = PairFakeWithReal(manifest, probe.probe_id)) {
      auto it = idx.cr.find({key.first, *real_id});
      if (it != idx.cr.end() && !it->second->skipped()) {
        o.real_record = metrics_detail::Resolved(manifest, *it->second);
      }
    }
    std::optional<Percentage> similarity;
    if (auto it = idx.fs.find(key); it != idx.fs.end() && !it->second->skipped()) {
      similarity = it->second->similarity;
    }

    CellCounts& c = cell.counts;
    ++c.fakes;
    TargetedResult ta = EvalTargeted(o);
    bool na = EvalNonTargeted(o.fake_record);
    bool dhc = EvalDhc(o.fake_record, config.beta);
    DhsResult dhs = EvalDhs(o.fake_record, similarity, config.gamma);
    c.ta += ta.success;
    if (ta.relaxed) {
      ++c.ta_relaxed;
      c.ta_relaxed_success += ta.success;
    }
    c.na += na;
    if (auto dhf = EvalDhf(o)) {
      ++c.dhf_paired;
      c.dhf += *dhf;
    } else {
      ++c.dhf_unpaired;
    }
    c.dhc += dhc;
    c.dhs += dhs.success;
    c.cr_missed += !na;
    c.fs_missing += dhs.fs_missing;
    switch (ClassifyNaOutcome(o)) {
      case NaOutcome::kTargetMatch: ++c.na_target; break;
      case NaOutcome::kReferenceMatch: ++c.na_reference; break;
      case NaOutcome::kOtherCelebrity: ++c.na_other; break;
      case NaOutcome::kNoMatch: ++c.na_none; break;
    }

    if (const auto& subject = probe.subject()) {
      CelebrityRow& row = cell.celebrities[subject->canonical_name()];
      ++row.n_fakes;
      row.ta += ta.success;
      row.na += na;
      row.dhc += dhc;
      row.dhs += dhs.success;
      if (na) {
        row.fake_conf_centi += Centi(o.fake_record.prediction.match->confidence);
        ++row.fake_conf_n;
      }
      if (o.real_record && o.real_record->prediction.match) {
        row.real_conf_centi += Centi(o.real_record->prediction.match->confidence);
        ++row.real_conf_n;
      }
      ++cell.demographics[manifest.TagOf(*subject)].fakes;
    }
    if (na) {
      ++cell.demographics[manifest.TagOf(o.fake_record.prediction.match->name)]
            .predicted;
    }
  }
  return report;
}

struct SicResult {
  std::map<IdentityRef, bool> by_celebrity;
  Ratio rate;
};

// SIC for a single provider's log.
inline SicResult ComputeSic(const QueryLog& log, const DatasetManifest& manifest) {
  std::set<std::string> providers;
  for (const auto& r : log) providers.insert(r.provider_id);
  if (providers.size() > 1) {
    throw std::invalid_argument("ComputeSic expects a single provider's log");
  }
  SicResult out;
  for (const QueryRecord& r : log) {
    if (r.request_kind != RequestKind::kCR) continue;
    const ProbeImage& p = manifest.Get(r.probe_id);
    if (p.kind != ProbeKind::kFake || !p.subject()) continue;
    auto o = PairOutcome(log, manifest, r);
    if (!o) continue;
    bool& flag = out.by_celebrity[*p.subject()];
    flag = flag || EvalTargeted(*o).success;
  }
  for (const auto& [id, ok] : out.by_celebrity) {
    ++out.rate.den;
    out.rate.num += ok;
  }
  return out;
}

}  // namespace dia
