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
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/defense/detector.hpp"
#include "dia/defense/image_stats.hpp"
#include "dia/defense/policy.hpp"
#include "dia/manifest.hpp"
#include "dia/orchestrator/campaign.hpp"
#include "dia/orchestrator/query_log.hpp"
#include "json.hpp"

namespace dia {

enum class Decision { kAdmit, kBlock, kBlockUnscored };

inline std::string_view ToString(Decision d) {
  switch (d) {
    case Decision::kAdmit: return "admit";
    case Decision::kBlock: return "block";
    case Decision::kBlockUnscored: return "block_unscored";
  }
  return "block";
}

inline Decision ParseDecision(std::string_view s) {
  if (s == "admit") return Decision::kAdmit;
  if (s == "block") return Decision::kBlock;
  if (s == "block_unscored") return Decision::kBlockUnscored;
  throw ValidationError("defense_log", "unknown decision '" + std::string(s) + "'");
}

struct DefenseLogEntry {
  std::string probe_id;
  std::map<std::string, double> scores;
  std::map<std::string, std::string> errors;
  std::optional<double> combined;
  Decision decision = Decision::kBlock;

  bool admitted() const { return decision == Decision::kAdmit; }
  bool operator==(const DefenseLogEntry&) const = default;
};

using DefenseLog = std::vector<DefenseLogEntry>;

inline std::string EncodeDefenseEntry(const DefenseLogEntry& e) {
  nlohmann::ordered_json j;
  j["probe_id"] = e.probe_id;
  j["scores"] = nlohmann::ordered_json::object();
  for (const auto& [id, s] : e.scores) j["scores"][id] = s;
  if (!e.errors.empty()) {
    for (const auto& [id, msg] : e.errors) j["errors"][id] = msg;
  }
  if (e.combined) j["combined"] = *e.combined;
  j["decision"] = ToString(e.decision);
  return j.dump();
}

inline DefenseLogEntry DecodeDefenseEntry(const std::string& line) {
  DefenseLogEntry e;
  try {
    auto j = nlohmann::json::parse(line);
    e.probe_id = j.at("probe_id").get<std::string>();
    e.scores = j.at("scores").get<std::map<std::string, double>>();
    if (j.contains("errors")) {
      e.errors = j["errors"].get<std::map<std::string, std::string>>();
    }
    if (j.contains("combined")) e.combined = j["combined"].get<double>();
    e.decision = ParseDecision(j.at("decision").get<std::string>());
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("defense_log", ex.what());
  }
  return e;
}

inline void WriteDefenseLog(std::ostream& out, const DefenseLog& log) {
  for (const auto& e : log) out << EncodeDefenseEntry(e) << '\n';
}

inline DefenseLog LoadDefenseLog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("defense_log", "cannot open " + path);
  DefenseLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) log.push_back(DecodeDefenseEntry(line));
  }
  return log;
}

using DetectorChannels = std::map<std::string, std::shared_ptr<DetectorChannel>>;

// Scores one probe and decides. Any detector error, or missing image
// statistics under DD3, blocks the probe (reject-closed).
inline DefenseLogEntry DefendProbe(const ProbeImage& probe,
                                   const DefensePolicy& policy,
                                   const DetectorChannels& channels,
                                   ImageStatsSource* stats) {
  DefenseLogEntry e;
  e.probe_id = probe.probe_id;
  std::vector<double> scores;
  for (const auto& id : policy.detector_ids) {
    try {
      DetectorScore s = channels.at(id)->Score(probe);
      e.scores[id] = s.p_fake;
      scores.push_back(s.p_fake);
    } catch (const DetectorError& err) {
      e.errors[id] = err.what();
    } catch (const std::exception& err) {
      e.errors[id] = std::string("crash: ") + err.what();
    }
  }
  if (!e.errors.empty()) {
    e.decision = Decision::kBlockUnscored;
    return e;
  }
  Verdict v = Verdict::kBlock;
  switch (policy.mode) {
    case DefenseMode::kDD1:
      v = Dd1Verdict(scores[0], policy.threshold);
      break;
    case DefenseMode::kDD2:
      v = Dd2Verdict(scores, policy.threshold);
      break;
    case DefenseMode::kDD3: {
      std::optional<ImageStats> s = stats ? stats->Stats(probe) : std::nullopt;
      if (!s) {
        e.errors["image_stats"] = "unreadable image";
        e.decision = Decision::kBlockUnscored;
        return e;
      }
      e.combined = policy.combiner->Predict(Dd3Features(scores, *s));
      v = Dd3Verdict(*e.combined, policy.threshold);
      break;
    }
  }
  e.decision = v == Verdict::kAdmit ? Decision::kAdmit : Decision::kBlock;
  return e;
}

// Scores every probe with up to `max_in_flight` concurrent requests. The
// log comes back in probe_id order regardless of completion order.
inline DefenseLog DefendProbes(const DatasetManifest& manifest,
                               const DefensePolicy& policy,
                               const DetectorChannels& channels,
                               ImageStatsSource* stats, int max_in_flight = 4) {
  ValidatePolicy(policy);
  for (const auto& id : policy.detector_ids) {
    if (!channels.contains(id)) {
      throw ValidationError("policy", "no detector configured for '" + id + "'");
    }
  }
  std::vector<const ProbeImage*> probes;
  for (const auto& p : manifest.probes()) probes.push_back(&p);
  std::sort(probes.begin(), probes.end(),
            [](const ProbeImage* a, const ProbeImage* b) {
              return a->probe_id < b->probe_id;
            });
  DefenseLog log(probes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < probes.size(); i = next++) {
      log[i] = DefendProbe(*probes[i], policy, channels, stats);
    }
  };
  std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, max_in_flight)),
                                          1, std::max<std::size_t>(1, probes.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return log;
}

struct DefendedRun {
  QueryLog queries;
  DefenseLog defense;
};

// Blocked probes get one CR record per provider with no prediction, zero
// cost and skip_reason defense_blocked; they stay in metric denominators.
inline DefendedRun RunDefendedCampaign(const DatasetManifest& manifest,
                                       const Backends& backends,
                                       const CampaignConfig& config,
                                       const DefensePolicy& policy,
                                       const DetectorChannels& channels,
                                       ImageStatsSource* stats,
                                       int detector_in_flight = 4) {
  DefendedRun run;
  run.defense = DefendProbes(manifest, policy, channels, stats, detector_in_flight);
  std::set<std::string> admitted;
  for (const auto& e : run.defense) {
    if (e.admitted()) admitted.insert(e.probe_id);
  }
  run.queries = RunCampaign(manifest, backends, config, &admitted);
  std::int64_t stamp = config.epoch_ms;
  if (config.mode == CampaignMode::kLive) {
    stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
  }
  for (const auto& e : run.defense) {
    if (e.admitted()) continue;
    for (const auto& provider : config.provider_ids) {
      QueryRecord r;
      r.probe_id = e.probe_id;
      r.provider_id = provider;
      r.request_kind = RequestKind::kCR;
      r.skip_reason = std::string(skip_reason::kDefenseBlocked);
      r.timestamp_ms = stamp;
      run.queries.push_back(std::move(r));
    }
  }
  SortLog(run.queries);
  return run;
}

// Confusion counts of a defense log against manifest labels; "positive"
// means fake, a blocked probe counts as predicted fake.
struct DetectionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0, unscored = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  double accuracy() const {
    return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
  }
  double fnr() const {
    return tp + fn ? static_cast<double>(fn) / static_cast<double>(tp + fn) : 0.0;
  }
  double fpr() const {
    return fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
  }
};

inline DetectionCounts CountDetections(const DatasetManifest& manifest,
                                       const DefenseLog& log) {
  DetectionCounts c;
  for (const auto& e : log) {
    const ProbeImage& p = manifest.Get(e.probe_id);
    bool fake = p.kind == ProbeKind::kFake;
    bool blocked = !e.admitted();
    if (e.decision == Decision::kBlockUnscored) ++c.unscored;
    if (fake && blocked) ++c.tp;
    else if (fake) ++c.fn;
    else if (blocked) ++c.fp;
    else ++c.tn;
  }
  return c;
}

}  // namespace dia
