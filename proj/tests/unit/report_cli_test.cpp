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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dia/cli/cli.hpp"
#include "dia/report/report.hpp"

namespace dia {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Results HandResults() {
  Results r;
  CellReport aws;
  aws.counts.fakes = 8;
  aws.counts.ta = 3;
  aws.counts.na = 5;
  aws.counts.dhf = 2;
  aws.counts.dhf_paired = 6;
  aws.counts.dhc = 1;
  aws.counts.dhs = 2;
  aws.counts.cr_missed = 3;
  aws.celebrities["a"].ta = 1;
  aws.celebrities["a"].n_fakes = 5;
  aws.celebrities["b"].n_fakes = 3;
  aws.demographics[Demographic::kAsian] = {3, 2};
  CellReport ms;
  ms.counts.fakes = 3;
  ms.counts.na = 1;
  ms.counts.dhf = 1;
  ms.counts.dhf_paired = 1;
  ms.counts.dhs = 1;
  ms.counts.cr_missed = 2;
  ms.celebrities["c"].n_fakes = 3;
  r.report.cells[{"aws", "ds1"}] = aws;
  r.report.cells[{"ms", "ds1"}] = ms;
  r.report.cells[{"nav", "ds2"}] = CellReport{};
  r.defense.push_back({"ds1", "DD1", "clrnet", 0.979, "aws", "NA", {5, 8}, {0, 8}});
  r.cost.push_back({"aws", 20, 1, Money{19'000'000}});
  return r;
}

TEST(Report, SummaryCsvMatchesGolden) {
  auto csv = EmitReport(HandResults(), ReportFormat::kCsv, ReportTable::kSummary);
  EXPECT_EQ(csv, Slurp(std::string(DIA_FIXTURES_DIR) + "/report/summary_golden.csv"));
}

TEST(Report, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(EmitReport(Results{}, ReportFormat::kCsv),
            "provider_id,dataset_id,metric,numerator,denominator,rate_pct\n");
}

TEST(Report, CsvAndJsonAgree) {
  Results r = HandResults();
  std::istringstream csv(EmitReport(r, ReportFormat::kCsv));
  auto j = nlohmann::json::parse(EmitJson(r));
  std::string line;
  std::getline(csv, line);
  std::size_t i = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    ASSERT_EQ(f.size(), 6u);
    const auto& row = j["summary"].at(i++);
    EXPECT_EQ(row["provider_id"], f[0]);
    EXPECT_EQ(row["metric"], f[2]);
    EXPECT_EQ(row["numerator"].get<std::int64_t>(), std::stoll(f[3]));
    EXPECT_EQ(row["denominator"].get<std::int64_t>(), std::stoll(f[4]));
    if (f[5] == "undefined") {
      EXPECT_TRUE(row["rate_pct"].is_null());
    } else {
      EXPECT_EQ(FormatFixed(row["rate_pct"].get<double>(), 1), f[5]);
    }
  }
  EXPECT_EQ(i, j["summary"].size());
}

TEST(Report, TextHasEverySection) {
  std::string text = EmitText(HandResults());
  for (const char* s : {"== TA ==", "== NA ==", "== DHF ==", "== DHC ==", "== DHS ==",
                        "== DHS_missed ==", "== SIC ==", "== defense ==", "== cost =="}) {
    EXPECT_NE(text.find(s), std::string::npos) << s;
  }
  EXPECT_NE(text.find("37.5% (3/8)"), std::string::npos);
  EXPECT_NE(text.find("undefined (0/0)"), std::string::npos);
}

TEST(Report, ResultsJsonRoundTrip) {
  Results r = HandResults();
  Results back = ResultsFromJson(nlohmann::json::parse(ResultsToJson(r).dump()));
  EXPECT_EQ(back.report, r.report);
  EXPECT_EQ(back.defense, r.defense);
  EXPECT_EQ(back.cost, r.cost);
}

TEST(Report, DefenseAndCostTables) {
  auto defense = EmitReport(HandResults(), ReportFormat::kCsv, ReportTable::kDefense);
  EXPECT_NE(defense.find("ds1,DD1,clrnet,97.9,aws,NA,5,8,62.5,0,8,0.0"), std::string::npos);
  auto cost = EmitReport(HandResults(), ReportFormat::kCsv, ReportTable::kCost);
  EXPECT_EQ(cost, "provider_id,records,skipped,total_usd\naws,20,1,0.02\n");
}

TEST(Report, CsvQuotesFields) {
  EXPECT_EQ(CsvField("plain"), "plain");
  EXPECT_EQ(CsvField("a,b"), "\"a,b\"");
  EXPECT_EQ(CsvField("say \"hi\""), "\"say \"\"hi\"\"\"");
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dia");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = CliMain(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string TempDir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("dia_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

std::string Data(const std::string& name) { return std::string(DIA_DATA_DIR) + "/" + name; }

TEST(Cli, CostPrintsDollars) {
  auto r = Cli({"cost", "--provider", "aws", "--tx", "1000"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.00\n");
  EXPECT_EQ(Cli({"cost", "--provider", "aws", "--tx", "2000000"}).out, "1800.00\n");
  EXPECT_EQ(Cli({"cost", "--provider", "aws", "--tx", "2000000", "--tier-mode", "flat"}).out,
            "1600.00\n");
  EXPECT_EQ(Cli({"cost", Data("pricing.json"), "--provider", "ms-free", "--tx", "30000"}).out,
            "0.00\n");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(Cli({"cost", "--provider", "nobody", "--tx", "1"}).code, 1);
  EXPECT_EQ(Cli({"cost", "--provider", "aws", "--tx", "-5"}).code, 1);
  EXPECT_EQ(Cli({"cost", "--provider", "aws", "--tx", "1", "--bogus"}).code, 2);
  EXPECT_EQ(Cli({}).code, 2);
  EXPECT_EQ(Cli({"frobnicate"}).code, 2);
  EXPECT_EQ(Cli({"validate", "/nonexistent/manifest.json"}).code, 1);
  auto help = Cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("campaign"), std::string::npos);
}

TEST(Cli, ValidateNamesTheRule) {
  auto dir = TempDir("validate");
  std::string path = dir + "/bad.json";
  std::ofstream(path) << R"({"dataset_id":"d","description":"","probes":[
      {"probe_id":"f1","uri":"f1.png","kind":"Fake","method":"Synthesis",
       "target":"x","reference":"y","reference2":"z"}]})";
  auto r = Cli({"validate", path});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("synthesis_forbids_target"), std::string::npos) << r.err;

  auto ok = Cli({"validate", Data("sample_manifest.json")});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("20 real, 48 fake"), std::string::npos) << ok.out;
}

TEST(Cli, CampaignMetricsReportEndToEnd) {
  auto dir = TempDir("e2e");
  auto run = [&](const std::string& tag) {
    auto r = Cli({"campaign", Data("sample_manifest.json"), "--providers",
                  Data("providers.json"), "--out", dir + "/log" + tag + ".jsonl",
                  "--record", dir + "/tape" + tag + ".jsonl", "--seed", "5"});
    EXPECT_EQ(r.code, 0) << r.err;
  };
  run("1");
  run("2");
  std::string log = Slurp(dir + "/log1.jsonl");
  ASSERT_FALSE(log.empty());
  EXPECT_EQ(log, Slurp(dir + "/log2.jsonl"));

  auto replay = Cli({"campaign", Data("sample_manifest.json"), "--providers",
                     Data("providers.json"), "--mode", "replay", "--cassette",
                     dir + "/tape1.jsonl", "--out", dir + "/replay.jsonl", "--seed", "5"});
  EXPECT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(Slurp(dir + "/replay.jsonl"), log);

  auto metrics = Cli({"metrics", dir + "/log1.jsonl", "--manifest",
                      Data("sample_manifest.json")});
  EXPECT_EQ(metrics.code, 0) << metrics.err;
  auto j = nlohmann::json::parse(metrics.out);
  EXPECT_EQ(j["config"]["beta"], 90.0);
  EXPECT_EQ(j["config"]["gamma"], 80.0);
  EXPECT_EQ(j["cells"].size(), 9u);  // three providers by three fake datasets

  ASSERT_EQ(Cli({"metrics", dir + "/log1.jsonl", "--manifest", Data("sample_manifest.json"),
                 "--out", dir + "/results.json"})
                .code,
            0);
  auto csv = Cli({"report", dir + "/results.json", "--format", "csv"});
  EXPECT_EQ(csv.code, 0);
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 1 + 9 * 7);
  auto text = Cli({"report", dir + "/results.json"});
  EXPECT_NE(text.out.find("== SIC =="), std::string::npos);

  // A log that names probes the manifest lacks is a validation failure.
  std::string other = dir + "/other.json";
  std::ofstream(other) << R"({"dataset_id":"d","description":"","probes":[
      {"probe_id":"zz","uri":"zz.png","kind":"Real","target":"x"}]})";
  EXPECT_EQ(Cli({"metrics", dir + "/log1.jsonl", "--manifest", other}).code, 1);
}

TEST(Cli, DefendAndTrainCombiner) {
  auto dir = TempDir("defend");
  auto r = Cli({"defend", Data("sample_manifest.json"), "--policy", Data("policy_dd2.json"),
                "--detectors", Data("detectors.json"), "--providers", Data("providers.json"),
                "--out", dir + "/run", "--training-rows", dir + "/rows.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("DD2"), std::string::npos);
  for (const char* f : {"queries.jsonl", "baseline_queries.jsonl", "defense.jsonl",
                        "results.json"}) {
    EXPECT_TRUE(fs::exists(dir + "/run/" + f)) << f;
  }
  auto t = Cli({"train-combiner", dir + "/rows.csv", "--out", dir + "/model.json",
                "--epochs", "200"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("parameters 89"), std::string::npos) << t.out;

  std::string policy = dir + "/dd3.json";
  std::ofstream(policy) << R"({"mode":"DD3","detectors":["clrnet","abnet","xception"],)"
                        << R"("combiner":"model.json"})";
  auto d3 = Cli({"defend", Data("sample_manifest.json"), "--policy", policy, "--detectors",
                 Data("detectors.json"), "--providers", Data("providers.json"), "--out",
                 dir + "/run3"});
  EXPECT_EQ(d3.code, 0) << d3.err;
  EXPECT_NE(d3.out.find("DD3"), std::string::npos);
}

}  // namespace
}  // namespace dia
