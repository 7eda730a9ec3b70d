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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dia/config.hpp"
#include "dia/core/types.hpp"
#include "dia/defense/combiner.hpp"
#include "dia/defense/defended_campaign.hpp"
#include "dia/defense/image_stats.hpp"
#include "dia/defense/policy.hpp"
#include "dia/manifest.hpp"
#include "dia/metrics/metrics.hpp"
#include "dia/orchestrator/campaign.hpp"
#include "dia/orchestrator/pricing.hpp"
#include "dia/orchestrator/query_log.hpp"
#include "dia/report/report.hpp"
#include "json.hpp"

namespace dia {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

namespace cli_detail {

inline void WriteFile(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << data;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("io", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string Dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

// Training rows CSV: a header line, then one row per probe; the last
// column is the label ("fake"/"real" or 1/0).
inline std::vector<TrainingRow> ParseTrainingRows(const std::string& text) {
  std::vector<TrainingRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() < 2) {
      throw ValidationError("combiner_data", "line " + std::to_string(n) +
                                                 ": need features and a label");
    }
    TrainingRow r;
    const std::string& label = fields.back();
    if (label == "fake" || label == "1") {
      r.fake = true;
    } else if (label == "real" || label == "0") {
      r.fake = false;
    } else {
      throw ValidationError("combiner_data", "line " + std::to_string(n) +
                                                 ": bad label '" + label + "'");
    }
    for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        r.features.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError("combiner_data", "line " + std::to_string(n) +
                                                   ": bad number '" + fields[i] + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string FormatDouble(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace cli_detail

// Entry point for the `dia` tool. Returns the process exit code.
inline int CliMain(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Deepfake impersonation measurement harness", "dia"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;

  // validate
  auto* validate = app.add_subcommand("validate", "Validate a dataset manifest");
  std::string v_manifest;
  validate->add_option("manifest", v_manifest, "Manifest file")->required();

  // campaign
  auto* campaign = app.add_subcommand("campaign", "Run a query campaign");
  std::string c_manifest, c_providers, c_mode = "simulated", c_out, c_cassette,
                                       c_record;
  campaign->add_option("manifest", c_manifest, "Manifest file")->required();
  campaign->add_option("--providers", c_providers, "Providers config")->required();
  campaign->add_option("--mode", c_mode, "simulated | replay | live")
      ->check(CLI::IsMember({"simulated", "replay", "live"}));
  campaign->add_option("--out", c_out, "Query log output")->required();
  campaign->add_option("--cassette", c_cassette, "Cassette to replay");
  campaign->add_option("--record", c_record, "Record responses to a cassette");
  campaign->add_option("--seed", seed, "Random seed");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Aggregate a query log");
  std::string m_log, m_manifest, m_out;
  double beta = 90.0, gamma = 80.0;
  metrics->add_option("querylog", m_log, "Query log")->required();
  metrics->add_option("--manifest", m_manifest, "Manifest file")->required();
  metrics->add_option("--beta", beta, "DHC confidence threshold");
  metrics->add_option("--gamma", gamma, "DHS similarity threshold");
  metrics->add_option("--out", m_out, "Results JSON (stdout when omitted)");

  // defend
  auto* defend = app.add_subcommand("defend", "Run a defended campaign");
  std::string d_manifest, d_policy, d_detectors, d_providers, d_mode = "simulated",
                                                               d_out, d_cassette,
                                                               d_stats = "synthetic",
                                                               d_rows;
  defend->add_option("manifest", d_manifest, "Manifest file")->required();
  defend->add_option("--policy", d_policy, "Defense policy")->required();
  defend->add_option("--detectors", d_detectors, "Detectors config")->required();
  defend->add_option("--providers", d_providers, "Providers config")->required();
  defend->add_option("--mode", d_mode, "simulated | replay | live")
      ->check(CLI::IsMember({"simulated", "replay", "live"}));
  defend->add_option("--cassette", d_cassette, "Cassette to replay");
  defend->add_option("--out", d_out, "Output directory")->required();
  defend->add_option("--image-stats", d_stats, "synthetic | netpbm")
      ->check(CLI::IsMember({"synthetic", "netpbm"}));
  defend->add_option("--training-rows", d_rows,
                     "Also write combiner training rows (3-detector policies)");
  defend->add_option("--beta", beta, "DHC confidence threshold");
  defend->add_option("--gamma", gamma, "DHS similarity threshold");
  defend->add_option("--seed", seed, "Random seed");

  // train-combiner
  auto* train = app.add_subcommand("train-combiner", "Train the DD3 combiner");
  std::string t_rows, t_out;
  CombinerHyper hyper;
  train->add_option("rows", t_rows, "Training rows CSV")->required();
  train->add_option("--out", t_out, "Model output")->required();
  train->add_option("--hidden", hyper.hidden, "Hidden width");
  train->add_option("--lr", hyper.learning_rate, "Learning rate");
  train->add_option("--epochs", hyper.epochs, "Epochs");
  train->add_option("--l2", hyper.l2, "L2 penalty");
  train->add_option("--seed", seed, "Random seed");

  // cost
  auto* cost = app.add_subcommand("cost", "Estimate a monthly bill");
  std::string k_schedule, k_provider, k_mode;
  std::int64_t k_tx = 0;
  cost->add_option("schedule", k_schedule, "Pricing schedule (built-in when omitted)");
  cost->add_option("--provider", k_provider, "Provider id")->required();
  cost->add_option("--tx", k_tx, "Transactions in the month")->required();
  cost->add_option("--tier-mode", k_mode, "marginal | flat")
      ->check(CLI::IsMember({"marginal", "flat"}));

  // report
  auto* report = app.add_subcommand("report", "Print a results file");
  std::string r_results, r_format = "text", r_table = "summary", r_out;
  report->add_option("results", r_results, "Results JSON")->required();
  report->add_option("--format", r_format, "csv | json | text")
      ->check(CLI::IsMember({"csv", "json", "text"}));
  report->add_option("--table", r_table,
                     "summary | celebrities | demographics | defense | cost (csv)")
      ->check(CLI::IsMember({"summary", "celebrities", "demographics", "defense", "cost"}));
  report->add_option("--out", r_out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitRuntime;
  }

  try {
    if (validate->parsed()) {
      DatasetManifest m = LoadManifest(v_manifest);
      out << "ok " << m.dataset_id() << ": " << m.probes().size() << " probes ("
          << m.counts().n_real << " real, " << m.counts().n_fake << " fake, "
          << m.counts().n_celebrities << " celebrities)\n";
      return kExitOk;
    }

    if (campaign->parsed()) {
      DatasetManifest m = LoadManifest(c_manifest);
      RunConfig rc = LoadRunConfig(c_providers, seed);
      rc.campaign.mode = ParseCampaignMode(c_mode);
      BackendOptions opts;
      if (!c_cassette.empty()) {
        opts.cassette = std::make_shared<const Cassette>(Cassette::Load(c_cassette));
      }
      std::unique_ptr<std::ofstream> rec;
      if (!c_record.empty()) {
        rec = std::make_unique<std::ofstream>(c_record);
        if (!*rec) throw std::runtime_error("cannot write " + c_record);
        opts.recorder = std::make_shared<CassetteWriter>(*rec);
      }
      Backends backends = MakeBackends(rc, m, opts);
      QueryLog log = RunCampaign(m, backends, rc.campaign);
      std::ostringstream s;
      WriteQueryLog(s, log);
      WriteFile(c_out, s.str());
      std::size_t skipped = 0;
      for (const auto& r : log) skipped += r.skipped();
      out << "wrote " << log.size() << " records (" << skipped << " skipped) to "
          << c_out << "\n";
      return kExitOk;
    }

    if (metrics->parsed()) {
      DatasetManifest m = LoadManifest(m_manifest);
      QueryLog log = LoadQueryLog(m_log);
      MetricConfig mc{Percentage(beta), Percentage(gamma)};
      Results r;
      r.report = Aggregate(log, m, mc);
      r.cost = CostRows(log);
      std::string doc = ResultsToJson(r).dump(2) + "\n";
      if (m_out.empty()) {
        out << doc;
      } else {
        WriteFile(m_out, doc);
      }
      return kExitOk;
    }

    if (defend->parsed()) {
      DatasetManifest m = LoadManifest(d_manifest);
      nlohmann::json pj;
      try {
        pj = nlohmann::json::parse(ReadFile(d_policy));
      } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("policy", e.what());
      }
      DefensePolicy policy = ParsePolicy(pj, Dir(d_policy));
      DetectorConfig dc = LoadDetectorConfig(d_detectors);
      RunConfig rc = LoadRunConfig(d_providers, seed);
      rc.campaign.mode = ParseCampaignMode(d_mode);
      BackendOptions opts;
      if (!d_cassette.empty()) {
        opts.cassette = std::make_shared<const Cassette>(Cassette::Load(d_cassette));
      }
      std::unique_ptr<ImageStatsSource> stats;
      if (d_stats == "netpbm") {
        stats = std::make_unique<NetpbmImageStats>();
      } else {
        stats = std::make_unique<SyntheticImageStats>(seed);
      }
      MetricConfig mc{Percentage(beta), Percentage(gamma)};

      Backends backends = MakeBackends(rc, m, opts);
      QueryLog baseline = RunCampaign(m, backends, rc.campaign);
      DefendedRun run = RunDefendedCampaign(m, backends, rc.campaign, policy,
                                            dc.channels, stats.get(),
                                            dc.max_in_flight);
      Results r;
      EvaluationReport before = Aggregate(baseline, m, mc);
      r.report = Aggregate(run.queries, m, mc);
      r.defense = CompareDefense(before, r.report, policy,
                                 DetectionByDataset(m, run.defense));
      r.cost = CostRows(run.queries);

      std::filesystem::create_directories(d_out);
      std::ostringstream q, b, d;
      WriteQueryLog(q, run.queries);
      WriteQueryLog(b, baseline);
      WriteDefenseLog(d, run.defense);
      WriteFile(d_out + "/queries.jsonl", q.str());
      WriteFile(d_out + "/baseline_queries.jsonl", b.str());
      WriteFile(d_out + "/defense.jsonl", d.str());
      WriteFile(d_out + "/results.json", ResultsToJson(r).dump(2) + "\n");

      if (!d_rows.empty()) {
        if (policy.detector_ids.size() != 3) {
          throw ValidationError("policy", "--training-rows needs a 3-detector policy");
        }
        std::string csv =
            "s1,s2,s3,mean_r,mean_g,mean_b,var_r,var_g,var_b,label\n";
        for (const auto& e : run.defense) {
          if (!e.errors.empty()) continue;
          const ProbeImage& p = m.Get(e.probe_id);
          auto st = stats->Stats(p);
          if (!st) continue;
          std::vector<double> s;
          for (const auto& id : policy.detector_ids) s.push_back(e.scores.at(id));
          for (double v : Dd3Features(s, *st)) csv += FormatDouble(v) + ",";
          csv += p.kind == ProbeKind::kFake ? "fake\n" : "real\n";
        }
        WriteFile(d_rows, csv);
      }
      out << EmitTextTable(BuildTable(r, ReportTable::kDefense));
      return kExitOk;
    }

    if (train->parsed()) {
      hyper.seed = seed;
      auto rows = ParseTrainingRows(ReadFile(t_rows));
      TrainResult tr = TrainCombiner(rows, hyper);
      SaveCombiner(tr.model, t_out);
      out << "final_loss " << FormatFixed(tr.loss_curve.back(), 6)
          << " training_accuracy " << FormatFixed(tr.training_accuracy, 4)
          << " parameters " << tr.model.parameter_count() << "\n";
      return kExitOk;
    }

    if (cost->parsed()) {
      PricingSchedule s =
          k_schedule.empty() ? DefaultPricingSchedule() : LoadPricingSchedule(k_schedule);
      if (k_mode == "flat") s.mode = TierMode::kFlatByVolume;
      if (k_mode == "marginal") s.mode = TierMode::kMarginal;
      if (k_tx < 0) throw ValidationError("cost", "--tx must be >= 0");
      out << EstimateCost(s, k_provider, k_tx).ToCentString() << "\n";
      return kExitOk;
    }

    if (report->parsed()) {
      Results r = LoadResults(r_results);
      std::string doc = EmitReport(r, ParseReportFormat(r_format),
                                   ParseReportTable(r_table));
      if (r_out.empty()) {
        out << doc;
      } else {
        WriteFile(r_out, doc);
      }
      return kExitOk;
    }
  } catch (const ManifestError& e) {
    err << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "validation failed [" << e.rule() << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const UnknownProviderError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CampaignConfigError& e) {
    err << "validation failed [config]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const LogManifestMismatch& e) {
    err << "validation failed: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitRuntime;
}

}  // namespace dia
