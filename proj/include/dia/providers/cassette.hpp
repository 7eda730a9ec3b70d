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

#include <chrono>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <tuple>
#include <variant>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "dia/providers/backend.hpp"
#include "json.hpp"

namespace dia {

struct CassetteKey {
  std::string provider_id;
  std::string probe_id;
  RequestKind request_kind = RequestKind::kCR;
  std::string counterpart_probe_id;  // FS only; empty for CR

  friend auto operator<=>(const CassetteKey&, const CassetteKey&) = default;
};

struct CassetteEntry {
  CassetteKey key;
  std::variant<Prediction, Percentage> response;
  double latency_ms = 0.0;
  std::int64_t recorded_at_ms = 0;
};

// One cassette line, compact JSON, fixed key order.
inline std::string EncodeCassetteLine(const CassetteEntry& e) {
  nlohmann::ordered_json j;
  j["provider_id"] = e.key.provider_id;
  j["probe_id"] = e.key.probe_id;
  j["request_kind"] = ToString(e.key.request_kind);
  if (!e.key.counterpart_probe_id.empty()) {
    j["counterpart_probe_id"] = e.key.counterpart_probe_id;
  }
  nlohmann::ordered_json r = nlohmann::ordered_json::object();
  if (const auto* p = std::get_if<Prediction>(&e.response)) {
    if (p->match) {
      r["name"] = p->match->name.canonical_name();
      r["confidence"] = p->match->confidence.value();
    }
  } else {
    r["similarity"] = std::get<Percentage>(e.response).value();
  }
  j["response"] = std::move(r);
  j["latency_ms"] = e.latency_ms;
  j["recorded_at"] = FormatUtcMillis(e.recorded_at_ms);
  return j.dump();
}

inline CassetteEntry DecodeCassetteLine(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  CassetteEntry e;
  e.key.provider_id = j.at("provider_id").get<std::string>();
  e.key.probe_id = j.at("probe_id").get<std::string>();
  e.key.request_kind = ParseRequestKind(j.at("request_kind").get<std::string>());
  if (j.contains("counterpart_probe_id")) {
    e.key.counterpart_probe_id = j["counterpart_probe_id"].get<std::string>();
  }
  const auto& r = j.at("response");
  if (e.key.request_kind == RequestKind::kCR) {
    Prediction p;
    if (r.contains("name")) {
      p.match = Match{NormalizeIdentity(r["name"].get<std::string>()),
                      Percentage(r.at("confidence").get<double>())};
    }
    e.response = p;
  } else {
    e.response = Percentage(r.at("similarity").get<double>());
  }
  e.latency_ms = j.at("latency_ms").get<double>();
  if (!ParseUtcMillis(j.at("recorded_at").get<std::string>(),
                      e.recorded_at_ms)) {
    throw ValidationError("cassette", "bad recorded_at");
  }
  return e;
}

// Recorded provider responses with exact-key lookup. The stream is
// append-only, so a later line for the same key supersedes earlier ones.
class Cassette {
 public:
  static Cassette Parse(std::istream& in) {
    Cassette c;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        CassetteEntry e = DecodeCassetteLine(line);
        c.entries_[e.key] = std::move(e);
      } catch (const std::exception& ex) {
        throw ValidationError("cassette", "line " + std::to_string(n) + ": " +
                                              ex.what());
      }
    }
    return c;
  }

  static Cassette Load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cassette", "cannot open " + path);
    return Parse(in);
  }

  void Put(CassetteEntry e) { entries_[e.key] = std::move(e); }

  const CassetteEntry* Find(const CassetteKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<CassetteKey, CassetteEntry> entries_;
};

// Answers purely from a cassette; never touches the network.
class ReplayProvider : public RecognizerBackend {
 public:
  ReplayProvider(std::string provider_id,
                 std::shared_ptr<const Cassette> cassette)
      : provider_id_(std::move(provider_id)), cassette_(std::move(cassette)) {}

  const std::string& provider_id() const override { return provider_id_; }

  Timed<Prediction> RecognizeCelebrity(const ProbeImage& probe) override {
    const CassetteEntry& e =
        Lookup({provider_id_, probe.probe_id, RequestKind::kCR, ""});
    const auto* p = std::get_if<Prediction>(&e.response);
    if (p == nullptr) {
      throw ProviderError(ProviderErrorKind::kBadResponse,
                          "cassette CR entry holds a similarity");
    }
    return {*p, e.latency_ms};
  }

  Timed<Percentage> FaceSimilarity(const ProbeImage& real_probe,
                                   const ProbeImage& fake_probe) override {
    const CassetteEntry& e = Lookup({provider_id_, fake_probe.probe_id,
                                     RequestKind::kFS, real_probe.probe_id});
    const auto* s = std::get_if<Percentage>(&e.response);
    if (s == nullptr) {
      throw ProviderError(ProviderErrorKind::kBadResponse,
                          "cassette FS entry holds a prediction");
    }
    return {*s, e.latency_ms};
  }

 private:
  const CassetteEntry& Lookup(const CassetteKey& key) const {
    const CassetteEntry* e = cassette_->Find(key);
    if (e == nullptr) {
      throw ProviderError(ProviderErrorKind::kCassetteMiss,
                          "no cassette entry for " + key.provider_id + "/" +
                              key.probe_id + "/" +
                              std::string(ToString(key.request_kind)));
    }
    return *e;
  }

  std::string provider_id_;
  std::shared_ptr<const Cassette> cassette_;
};

// Thread-safe line appender shared by recording backends.
class CassetteWriter {
 public:
  explicit CassetteWriter(std::ostream& out) : out_(out) {}

  void Append(const CassetteEntry& e) {
    std::string line = EncodeCassetteLine(e);
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ostream& out_;
};

// Forwards to an inner backend and records every successful response.
class RecordingProvider : public RecognizerBackend {
 public:
  RecordingProvider(std::shared_ptr<RecognizerBackend> inner,
                    std::shared_ptr<CassetteWriter> writer)
      : inner_(std::move(inner)), writer_(std::move(writer)) {}

  const std::string& provider_id() const override {
    return inner_->provider_id();
  }

  Timed<Prediction> RecognizeCelebrity(const ProbeImage& probe) override {
    auto r = inner_->RecognizeCelebrity(probe);
    writer_->Append({{provider_id(), probe.probe_id, RequestKind::kCR, ""},
                     r.value, r.latency_ms, NowMs()});
    return r;
  }

  Timed<Percentage> FaceSimilarity(const ProbeImage& real_probe,
                                   const ProbeImage& fake_probe) override {
    auto r = inner_->FaceSimilarity(real_probe, fake_probe);
    writer_->Append({{provider_id(), fake_probe.probe_id, RequestKind::kFS,
                      real_probe.probe_id},
                     r.value, r.latency_ms, NowMs()});
    return r;
  }

 private:
  static std::int64_t NowMs() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  std::shared_ptr<RecognizerBackend> inner_;
  std::shared_ptr<CassetteWriter> writer_;
};

}  // namespace dia
