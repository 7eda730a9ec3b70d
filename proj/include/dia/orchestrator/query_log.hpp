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
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "json.hpp"

namespace dia {

// Canonical log order: (provider_id, probe_id, request_kind), CR before FS.
inline bool LogOrder(const QueryRecord& a, const QueryRecord& b) {
  return std::tie(a.provider_id, a.probe_id, a.request_kind) <
         std::tie(b.provider_id, b.probe_id, b.request_kind);
}

inline void SortLog(QueryLog& log) {
  std::stable_sort(log.begin(), log.end(), LogOrder);
}

// One log line, compact JSON with the fixed key order
// probe_id, provider_id, request_kind, name?, confidence?, similarity?,
// latency_ms, unit_cost, skip_reason?, timestamp.
inline std::string EncodeQueryRecord(const QueryRecord& r) {
  nlohmann::ordered_json j;
  j["probe_id"] = r.probe_id;
  j["provider_id"] = r.provider_id;
  j["request_kind"] = ToString(r.request_kind);
  if (r.prediction.match) {
    j["name"] = r.prediction.match->name.canonical_name();
    j["confidence"] = r.prediction.match->confidence.value();
  }
  if (r.similarity) j["similarity"] = r.similarity->value();
  j["latency_ms"] = r.latency_ms;
  j["unit_cost"] = r.unit_cost.dollars();
  if (r.skip_reason) j["skip_reason"] = *r.skip_reason;
  j["timestamp"] = FormatUtcMillis(r.timestamp_ms);
  return j.dump();
}

inline QueryRecord DecodeQueryRecord(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  QueryRecord r;
  r.probe_id = j.at("probe_id").get<std::string>();
  r.provider_id = j.at("provider_id").get<std::string>();
  r.request_kind = ParseRequestKind(j.at("request_kind").get<std::string>());
  if (j.contains("name")) {
    r.prediction.match = Match{NormalizeIdentity(j["name"].get<std::string>()),
                               Percentage(j.at("confidence").get<double>())};
  } else if (j.contains("confidence")) {
    throw ValidationError("query_log", "confidence without name");
  }
  if (j.contains("similarity")) {
    if (r.request_kind != RequestKind::kFS) {
      throw ValidationError("query_log", "similarity on a CR record");
    }
    r.similarity = Percentage(j["similarity"].get<double>());
  }
  r.latency_ms = j.at("latency_ms").get<double>();
  if (!(r.latency_ms >= 0.0)) {
    throw ValidationError("query_log", "negative latency");
  }
  r.unit_cost = Money::FromDollars(j.at("unit_cost").get<double>());
  if (j.contains("skip_reason")) {
    r.skip_reason = j["skip_reason"].get<std::string>();
  }
  if (!ParseUtcMillis(j.at("timestamp").get<std::string>(), r.timestamp_ms)) {
    throw ValidationError("query_log", "bad timestamp");
  }
  return r;
}

inline void WriteQueryLog(std::ostream& out, const QueryLog& log) {
  for (const auto& r : log) out << EncodeQueryRecord(r) << '\n';
}

inline QueryLog ReadQueryLog(std::istream& in) {
  QueryLog log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.push_back(DecodeQueryRecord(line));
    } catch (const std::exception& e) {
      throw ValidationError("query_log",
                            "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

inline QueryLog LoadQueryLog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("query_log", "cannot open " + path);
  return ReadQueryLog(in);
}

}  // namespace dia
