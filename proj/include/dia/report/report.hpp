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

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/defense/defended_campaign.hpp"
#include "dia/metrics/metrics.hpp"
#include "dia/orchestrator/campaign.hpp"
#include "json.hpp"

namespace dia {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CellCounts, fakes, skipped, ta, ta_relaxed,
                                   ta_relaxed_success, na, dhf, dhf_paired,
                                   dhf_unpaired, dhc, dhs, cr_missed, fs_missing,
                                   na_target, na_reference, na_other, na_none)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CelebrityRow, n_fakes, ta, na, dhc, dhs,
                                   fake_conf_centi, fake_conf_n, real_conf_centi,
                                   real_conf_n)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DemographicRow, fakes, predicted)

// One Table 2 style comparison: a metric before and after a defense.
struct DefenseRow {
  std::string dataset_id;
  std::string policy;     // DD1 / DD2 / DD3
  std::string detectors;  // '+'-joined detector ids
  std::optional<double> detector_accuracy;
  std::string provider_id;
  std::string metric;  // TA or NA
  Ratio before;
  Ratio after;

  friend bool operator==(const DefenseRow&, const DefenseRow&) = default;
};

struct CostRow {
  std::string provider_id;
  std::int64_t records = 0;
  std::int64_t skipped = 0;
  Money total;

  friend bool operator==(const CostRow&, const CostRow&) = default;
};

// Everything `dia report` can print. Produced by `dia metrics` / `dia defend`
// and stored as results JSON.
struct Results {
  EvaluationReport report;
  std::vector<DefenseRow> defense;
  std::vector<CostRow> cost;
};

inline std::vector<CostRow> CostRows(const QueryLog& log) {
  std::vector<CostRow> out;
  for (const auto& c : SummarizeCost(log)) {
    out.push_back({c.provider_id, c.records, c.skipped, c.total});
  }
  return out;
}

// Detector accuracy per dataset from a defense log.
inline std::map<std::string, DetectionCounts> DetectionByDataset(
    const DatasetManifest& manifest, const DefenseLog& log) {
  std::map<std::string, DefenseLog> parts;
  for (const auto& e : log) parts[manifest.Get(e.probe_id).dataset_id].push_back(e);
  std::map<std::string, DetectionCounts> out;
  for (const auto& [ds, part] : parts) out[ds] = CountDetections(manifest, part);
  return out;
}

inline std::vector<DefenseRow> CompareDefense(
    const EvaluationReport& before, const EvaluationReport& after,
    const DefensePolicy& policy,
    const std::map<std::string, DetectionCounts>& detection) {
  std::string detectors;
  for (const auto& id : policy.detector_ids) {
    if (!detectors.empty()) detectors += "+";
    detectors += id;
  }
  std::set<CellKey> keys;
  for (const auto& [k, c] : before.cells) keys.insert(k);
  for (const auto& [k, c] : after.cells) keys.insert(k);
  std::vector<DefenseRow> out;
  for (const auto& key : keys) {
    static const CellReport kEmpty;
    auto b = before.cells.find(key);
    auto a = after.cells.find(key);
    const CellReport& cb = b == before.cells.end() ? kEmpty : b->second;
    const CellReport& ca = a == after.cells.end() ? kEmpty : a->second;
    std::optional<double> acc;
    if (auto d = detection.find(key.dataset_id); d != detection.end()) {
      acc = d->second.accuracy();
    }
    // Dataset-major order, matching the printed table.
    out.push_back({key.dataset_id, std::string(ToString(policy.mode)), detectors,
                   acc, key.provider_id, "TA", cb.ta(), ca.ta()});
    out.push_back({key.dataset_id, std::string(ToString(policy.mode)), detectors,
                   acc, key.provider_id, "NA", cb.na(), ca.na()});
  }
  std::stable_sort(out.begin(), out.end(), [](const DefenseRow& x, const DefenseRow& y) {
    return std::tie(x.dataset_id, x.provider_id) < std::tie(y.dataset_id, y.provider_id);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Results JSON

inline nlohmann::ordered_json RatioJson(const Ratio& r) {
  nlohmann::ordered_json j;
  j["numerator"] = r.num;
  j["denominator"] = r.den;
  return j;
}

inline Ratio RatioFromJson(const nlohmann::json& j) {
  return {j.at("numerator").get<std::int64_t>(),
          j.at("denominator").get<std::int64_t>()};
}

inline nlohmann::ordered_json ResultsToJson(const Results& r) {
  nlohmann::ordered_json j;
  j["config"]["beta"] = r.report.config.beta.value();
  j["config"]["gamma"] = r.report.config.gamma.value();
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& [key, cell] : r.report.cells) {
    nlohmann::ordered_json c;
    c["provider_id"] = key.provider_id;
    c["dataset_id"] = key.dataset_id;
    c["counts"] = nlohmann::json(cell.counts);
    c["celebrities"] = nlohmann::ordered_json::object();
    for (const auto& [name, row] : cell.celebrities) {
      c["celebrities"][name] = nlohmann::json(row);
    }
    c["demographics"] = nlohmann::ordered_json::object();
    for (const auto& [tag, row] : cell.demographics) {
      c["demographics"][std::string(ToString(tag))] = nlohmann::json(row);
    }
    j["cells"].push_back(std::move(c));
  }
  j["defense"] = nlohmann::ordered_json::array();
  for (const auto& d : r.defense) {
    nlohmann::ordered_json e;
    e["dataset_id"] = d.dataset_id;
    e["policy"] = d.policy;
    e["detectors"] = d.detectors;
    if (d.detector_accuracy) e["detector_accuracy"] = *d.detector_accuracy;
    e["provider_id"] = d.provider_id;
    e["metric"] = d.metric;
    e["before"] = RatioJson(d.before);
    e["after"] = RatioJson(d.after);
    j["defense"].push_back(std::move(e));
  }
  j["cost"] = nlohmann::ordered_json::array();
  for (const auto& c : r.cost) {
    nlohmann::ordered_json e;
    e["provider_id"] = c.provider_id;
    e["records"] = c.records;
    e["skipped"] = c.skipped;
    e["total_nanodollars"] = c.total.nanos;
    j["cost"].push_back(std::move(e));
  }
  return j;
}

inline Results ResultsFromJson(const nlohmann::json& j) {
  Results r;
  try {
    r.report.config.beta = Percentage(j.at("config").at("beta").get<double>());
    r.report.config.gamma = Percentage(j.at("config").at("gamma").get<double>());
    for (const auto& c : j.at("cells")) {
      CellReport cell;
      cell.counts = c.at("counts").get<CellCounts>();
      for (const auto& [name, row] : c.at("celebrities").items()) {
        cell.celebrities[name] = row.get<CelebrityRow>();
      }
      for (const auto& [tag, row] : c.at("demographics").items()) {
        cell.demographics[ParseDemographic(tag)] = row.get<DemographicRow>();
      }
      r.report.cells[{c.at("provider_id").get<std::string>(),
                      c.at("dataset_id").get<std::string>()}] = std::move(cell);
    }
    if (j.contains("defense")) {
      for (const auto& e : j["defense"]) {
        DefenseRow d;
        d.dataset_id = e.at("dataset_id").get<std::string>();
        d.policy = e.at("policy").get<std::string>();
        d.detectors = e.at("detectors").get<std::string>();
        if (e.contains("detector_accuracy")) {
          d.detector_accuracy = e["detector_accuracy"].get<double>();
        }
        d.provider_id = e.at("provider_id").get<std::string>();
        d.metric = e.at("metric").get<std::string>();
        d.before = RatioFromJson(e.at("before"));
        d.after = RatioFromJson(e.at("after"));
        r.defense.push_back(std::move(d));
      }
    }
    if (j.contains("cost")) {
      for (const auto& e : j["cost"]) {
        CostRow c;
        c.provider_id = e.at("provider_id").get<std::string>();
        c.records = e.at("records").get<std::int64_t>();
        c.skipped = e.at("skipped").get<std::int64_t>();
        c.total.nanos = e.at("total_nanodollars").get<std::int64_t>();
        r.cost.push_back(std::move(c));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("results", e.what());
  }
  return r;
}

inline void SaveResults(const Results& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ResultsToJson(r).dump(2) << "\n";
}

inline Results LoadResults(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("results", "cannot open " + path);
  try {
    return ResultsFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("results", e.what());
  }
}

// ---------------------------------------------------------------------------
// Emission

enum class ReportFormat { kCsv, kJson, kText };
enum class ReportTable { kSummary, kCelebrities, kDemographics, kDefense, kCost };

inline ReportFormat ParseReportFormat(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  if (s == "text") return ReportFormat::kText;
  throw std::invalid_argument("unknown format '" + std::string(s) + "'");
}

inline ReportTable ParseReportTable(std::string_view s) {
  if (s == "summary") return ReportTable::kSummary;
  if (s == "celebrities") return ReportTable::kCelebrities;
  if (s == "demographics") return ReportTable::kDemographics;
  if (s == "defense") return ReportTable::kDefense;
  if (s == "cost") return ReportTable::kCost;
  throw std::invalid_argument("unknown table '" + std::string(s) + "'");
}

// Rate in percent at one decimal, from the counts; "undefined" for 0/0.
inline std::string FormatRate(const Ratio& r) {
  if (r.den == 0) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f",
                100.0 * static_cast<double>(r.num) / static_cast<double>(r.den));
  return buf;
}

inline std::string FormatFixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline constexpr std::string_view kSummaryMetrics[] = {"TA",  "NA",         "DHF",
                                                       "DHC", "DHS",        "DHS_missed",
                                                       "SIC"};

inline Ratio MetricRatio(const CellReport& c, std::string_view metric) {
  if (metric == "TA") return c.ta();
  if (metric == "NA") return c.na();
  if (metric == "DHF") return c.dhf();
  if (metric == "DHC") return c.dhc();
  if (metric == "DHS") return c.dhs();
  if (metric == "DHS_missed") return c.dhs_missed();
  return c.sic();
}

inline std::string OptionalFixed(const std::optional<double>& v, int decimals) {
  return v ? FormatFixed(*v, decimals) : "";
}

// Providers, then datasets, alphabetical (the cell map's order).
inline Table BuildTable(const Results& r, ReportTable which) {
  Table t;
  switch (which) {
    case ReportTable::kSummary:
      t.header = {"provider_id", "dataset_id",  "metric",
                  "numerator",   "denominator", "rate_pct"};
      for (const auto& [key, cell] : r.report.cells) {
        for (auto m : kSummaryMetrics) {
          Ratio x = MetricRatio(cell, m);
          t.rows.push_back({key.provider_id, key.dataset_id, std::string(m),
                            std::to_string(x.num), std::to_string(x.den),
                            FormatRate(x)});
        }
      }
      break;
    case ReportTable::kCelebrities:
      t.header = {"provider_id", "dataset_id", "celebrity", "n_fakes",
                  "ta",          "na",         "dhc",       "dhs",
                  "sic",         "mean_fake_confidence",    "mean_real_confidence"};
      for (const auto& [key, cell] : r.report.cells) {
        for (const auto& [name, row] : cell.celebrities) {
          t.rows.push_back({key.provider_id, key.dataset_id, name,
                            std::to_string(row.n_fakes), std::to_string(row.ta),
                            std::to_string(row.na), std::to_string(row.dhc),
                            std::to_string(row.dhs), row.sic() ? "1" : "0",
                            OptionalFixed(row.mean_fake_confidence(), 2),
                            OptionalFixed(row.mean_real_confidence(), 2)});
        }
      }
      break;
    case ReportTable::kDemographics:
      t.header = {"provider_id", "dataset_id", "demographic_tag", "fakes",
                  "predicted"};
      for (const auto& [key, cell] : r.report.cells) {
        for (const auto& [tag, row] : cell.demographics) {
          t.rows.push_back({key.provider_id, key.dataset_id,
                            std::string(ToString(tag)), std::to_string(row.fakes),
                            std::to_string(row.predicted)});
        }
      }
      break;
    case ReportTable::kDefense:
      t.header = {"dataset_id",  "policy",     "detectors",  "detector_accuracy_pct",
                  "provider_id", "metric",     "before_num", "before_den",
                  "before_pct",  "after_num",  "after_den",  "after_pct"};
      for (const auto& d : r.defense) {
        std::optional<double> acc;
        if (d.detector_accuracy) acc = 100.0 * *d.detector_accuracy;
        t.rows.push_back({d.dataset_id, d.policy, d.detectors, OptionalFixed(acc, 1),
                          d.provider_id, d.metric, std::to_string(d.before.num),
                          std::to_string(d.before.den), FormatRate(d.before),
                          std::to_string(d.after.num), std::to_string(d.after.den),
                          FormatRate(d.after)});
      }
      break;
    case ReportTable::kCost:
      t.header = {"provider_id", "records", "skipped", "total_usd"};
      for (const auto& c : r.cost) {
        t.rows.push_back({c.provider_id, std::to_string(c.records),
                          std::to_string(c.skipped), c.total.ToCentString()});
      }
      break;
  }
  return t;
}

inline std::string EmitCsv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += CsvField(fields[i]);
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

// JSON mirror of a table: an array of objects keyed by the CSV header.
// Count columns become integers; rate columns become numbers or null.
inline nlohmann::ordered_json TableJson(const Table& t) {
  static const std::set<std::string> kText = {
      "provider_id", "dataset_id", "metric", "celebrity",
      "demographic_tag", "policy", "detectors", "total_usd"};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json o;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      const std::string& h = t.header[i];
      const std::string& v = r[i];
      if (kText.contains(h)) {
        o[h] = v;
      } else if (v.empty() || v == "undefined") {
        o[h] = nullptr;
      } else if (v.find('.') == std::string::npos) {
        o[h] = std::stoll(v);
      } else {
        o[h] = std::stod(v);
      }
    }
    rows.push_back(std::move(o));
  }
  return rows;
}

inline std::string EmitJson(const Results& r) {
  nlohmann::ordered_json j;
  j["config"]["beta"] = r.report.config.beta.value();
  j["config"]["gamma"] = r.report.config.gamma.value();
  j["summary"] = TableJson(BuildTable(r, ReportTable::kSummary));
  j["celebrities"] = TableJson(BuildTable(r, ReportTable::kCelebrities));
  j["demographics"] = TableJson(BuildTable(r, ReportTable::kDemographics));
  j["defense"] = TableJson(BuildTable(r, ReportTable::kDefense));
  j["cost"] = TableJson(BuildTable(r, ReportTable::kCost));
  return j.dump(2) + "\n";
}

inline std::string PadRight(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

inline std::string EmitTextTable(const Table& t) {
  std::vector<std::size_t> w(t.header.size(), 0);
  for (std::size_t i = 0; i < t.header.size(); ++i) w[i] = t.header[i].size();
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& f) {
    std::string l;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) l += "  ";
      l += PadRight(f[i], w[i]);
    }
    while (!l.empty() && l.back() == ' ') l.pop_back();
    out += l + '\n';
  };
  line(t.header);
  std::vector<std::string> rule;
  for (auto n : w) rule.push_back(std::string(n, '-'));
  line(rule);
  for (const auto& r : t.rows) line(r);
  return out;
}

// One section per metric, providers as rows and datasets as columns; each
// cell reads "rate% (num/den)".
inline std::string EmitText(const Results& r) {
  std::set<std::string> datasets;
  std::set<std::string> providers;
  for (const auto& [k, c] : r.report.cells) {
    datasets.insert(k.dataset_id);
    providers.insert(k.provider_id);
  }
  std::ostringstream out;
  out << "beta=" << FormatFixed(r.report.config.beta.value(), 1)
      << " gamma=" << FormatFixed(r.report.config.gamma.value(), 1) << "\n";
  for (auto m : kSummaryMetrics) {
    out << "\n== " << m << " ==\n";
    Table t;
    t.header.push_back("provider");
    for (const auto& d : datasets) t.header.push_back(d);
    for (const auto& p : providers) {
      std::vector<std::string> row{p};
      for (const auto& d : datasets) {
        auto it = r.report.cells.find({p, d});
        if (it == r.report.cells.end()) {
          row.push_back("-");
          continue;
        }
        Ratio x = MetricRatio(it->second, m);
        std::string rate = FormatRate(x);
        if (x.den) rate += "%";
        row.push_back(rate + " (" + std::to_string(x.num) + "/" +
                      std::to_string(x.den) + ")");
      }
      t.rows.push_back(std::move(row));
    }
    out << EmitTextTable(t);
  }
  if (!r.defense.empty()) {
    out << "\n== defense ==\n" << EmitTextTable(BuildTable(r, ReportTable::kDefense));
  }
  if (!r.cost.empty()) {
    out << "\n== cost ==\n" << EmitTextTable(BuildTable(r, ReportTable::kCost));
  }
  return out.str();
}

inline std::string EmitReport(const Results& r, ReportFormat format,
                              ReportTable table = ReportTable::kSummary) {
  switch (format) {
    case ReportFormat::kCsv: return EmitCsv(BuildTable(r, table));
    case ReportFormat::kJson: return EmitJson(r);
    case ReportFormat::kText: return EmitText(r);
  }
  return "";
}

}  // namespace dia
