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

// Field-by-field comparison of an aggregated report against the oracle.

#pragma once

#include <sstream>
#include <string>

#include "dia/metrics/metrics.hpp"
#include "oracle/brute_force.hpp"

namespace oracle {

// Empty when the report agrees with the tallies on every count.
inline std::string Diff(const dia::EvaluationReport& report, const Tallies& expected) {
  std::ostringstream out;
  auto check = [&](const std::string& where, const char* what, std::int64_t got,
                   std::int64_t want) {
    if (got != want) {
      out << where << " " << what << ": got " << got << " want " << want << "\n";
    }
  };
  if (report.cells.size() != expected.size()) {
    out << "cell count: got " << report.cells.size() << " want " << expected.size() << "\n";
  }
  for (const auto& [key, t] : expected) {
    std::string where = key.first + "/" + key.second;
    auto it = report.cells.find({key.first, key.second});
    if (it == report.cells.end()) {
      out << where << ": missing cell\n";
      continue;
    }
    const dia::CellReport& cell = it->second;
    const dia::CellCounts& c = cell.counts;
    check(where, "fakes", c.fakes, t.fakes);
    check(where, "skipped", c.skipped, t.skipped);
    check(where, "ta", c.ta, t.ta);
    check(where, "na", c.na, t.na);
    check(where, "dhf", c.dhf, t.dhf);
    check(where, "dhf_den", cell.dhf().den, t.dhf_den);
    check(where, "dhc", c.dhc, t.dhc);
    check(where, "dhs", c.dhs, t.dhs);
    check(where, "cr_missed", cell.dhs_missed().den, t.cr_missed);
    check(where, "sic_num", cell.sic().num, t.sic_num);
    check(where, "sic_den", cell.sic().den, t.sic_den);
    check(where, "celebrities", static_cast<std::int64_t>(cell.celebrities.size()),
          static_cast<std::int64_t>(t.celebs.size()));
    for (const auto& [name, ct] : t.celebs) {
      auto ci = cell.celebrities.find(name);
      if (ci == cell.celebrities.end()) {
        out << where << ": missing celebrity " << name << "\n";
        continue;
      }
      const dia::CelebrityRow& row = ci->second;
      std::string w = where + "/" + name;
      check(w, "n_fakes", row.n_fakes, ct.n_fakes);
      check(w, "ta", row.ta, ct.ta);
      check(w, "na", row.na, ct.na);
      check(w, "dhc", row.dhc, ct.dhc);
      check(w, "dhs", row.dhs, ct.dhs);
      check(w, "fake_conf_centi", row.fake_conf_centi, ct.fake_centi);
      check(w, "fake_conf_n", row.fake_conf_n, ct.fake_n);
      check(w, "real_conf_centi", row.real_conf_centi, ct.real_centi);
      check(w, "real_conf_n", row.real_conf_n, ct.real_n);
    }
    for (const auto& [tag, d] : t.demo) {
      auto di = cell.demographics.find(dia::ParseDemographic(tag));
      std::int64_t fakes = di == cell.demographics.end() ? 0 : di->second.fakes;
      std::int64_t predicted = di == cell.demographics.end() ? 0 : di->second.predicted;
      check(where + "/" + tag, "demo_fakes", fakes, d.first);
      check(where + "/" + tag, "demo_predicted", predicted, d.second);
    }
    check(where, "demographic rows", static_cast<std::int64_t>(cell.demographics.size()),
          static_cast<std::int64_t>(t.demo.size()));
  }
  return out.str();
}

}  // namespace oracle
