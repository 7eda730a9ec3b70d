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
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dia/core/types.hpp"
#include "json.hpp"

namespace dia {

struct ManifestIssue {
  std::string probe_id;  // empty for manifest-level issues
  std::string rule;
  std::string message;
};

class ManifestError : public std::runtime_error {
 public:
  explicit ManifestError(std::vector<ManifestIssue> issues)
      : std::runtime_error(Describe(issues)), issues_(std::move(issues)) {}

  const std::vector<ManifestIssue>& issues() const { return issues_; }

 private:
  static std::string Describe(const std::vector<ManifestIssue>& issues) {
    std::string out = "manifest invalid (" + std::to_string(issues.size()) +
                      " issue" + (issues.size() == 1 ? "" : "s") + ")";
    for (const auto& i : issues) {
      out += "\n  [" + i.rule + "]";
      if (!i.probe_id.empty()) out += " probe " + i.probe_id + ":";
      out += " " + i.message;
    }
    return out;
  }

  std::vector<ManifestIssue> issues_;
};

struct ManifestCounts {
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t n_celebrities = 0;

  friend bool operator==(const ManifestCounts&, const ManifestCounts&) = default;
};

// A validated dataset. Immutable after construction; safe to share across
// threads for reading.
class DatasetManifest {
 public:
  // Validates everything and indexes the probes. Throws ManifestError.
  DatasetManifest(std::string dataset_id, std::string description,
                  std::vector<ProbeImage> probes,
                  std::map<std::string, IdentityRef> aliases = {},
                  std::map<std::string, Demographic> identity_tags = {},
                  std::optional<ManifestCounts> declared_counts = std::nullopt)
      : dataset_id_(std::move(dataset_id)),
        description_(std::move(description)),
        probes_(std::move(probes)),
        aliases_(std::move(aliases)),
        identity_tags_(std::move(identity_tags)) {
    std::vector<ManifestIssue> issues;
    BuildIndex(issues);
    if (declared_counts && !(*declared_counts == counts_)) {
      issues.push_back({"", "counts_mismatch",
                        "declared counts {" +
                            std::to_string(declared_counts->n_real) + ", " +
                            std::to_string(declared_counts->n_fake) + ", " +
                            std::to_string(declared_counts->n_celebrities) +
                            "} but probes give {" +
                            std::to_string(counts_.n_real) + ", " +
                            std::to_string(counts_.n_fake) + ", " +
                            std::to_string(counts_.n_celebrities) + "}"});
    }
    if (!issues.empty()) throw ManifestError(std::move(issues));
  }

  const std::string& dataset_id() const { return dataset_id_; }
  const std::string& description() const { return description_; }
  const std::vector<ProbeImage>& probes() const { return probes_; }
  const ManifestCounts& counts() const { return counts_; }
  const std::map<std::string, IdentityRef>& aliases() const { return aliases_; }
  const std::map<std::string, Demographic>& identity_tags() const {
    return identity_tags_;
  }
  const std::map<IdentityRef, std::vector<std::string>>& real_index() const {
    return real_index_;
  }

  const ProbeImage* Find(std::string_view probe_id) const {
    auto it = by_id_.find(std::string(probe_id));
    return it == by_id_.end() ? nullptr : &probes_[it->second];
  }

  const ProbeImage& Get(std::string_view probe_id) const {
    const ProbeImage* p = Find(probe_id);
    if (p == nullptr) {
      throw std::out_of_range("unknown probe_id '" + std::string(probe_id) +
                              "'");
    }
    return *p;
  }

  // Maps a provider-reported name through the alias table.
  IdentityRef Resolve(const IdentityRef& reported) const {
    auto it = aliases_.find(reported.canonical_name());
    return it == aliases_.end() ? reported : it->second;
  }

  Demographic TagOf(const IdentityRef& id) const {
    auto it = identity_tags_.find(id.canonical_name());
    return it == identity_tags_.end() ? Demographic::kUnknown : it->second;
  }

  // Every identity named anywhere in the manifest, sorted.
  std::vector<IdentityRef> Identities() const {
    std::set<IdentityRef> ids;
    for (const auto& p : probes_) {
      for (const auto* r : {&p.target, &p.reference, &p.reference2}) {
        if (*r) ids.insert(**r);
      }
    }
    std::vector<IdentityRef> out;
    for (const auto& id : ids) out.push_back(id.WithTag(TagOf(id)));
    return out;
  }

 private:
  void BuildIndex(std::vector<ManifestIssue>& issues) {
    std::set<IdentityRef> celebrities;
    for (std::size_t i = 0; i < probes_.size(); ++i) {
      const ProbeImage& p = probes_[i];
      for (const auto& rule : ProbeViolations(p)) {
        issues.push_back({p.probe_id, rule, "kind/method/role table violated"});
      }
      if (!by_id_.emplace(p.probe_id, i).second) {
        issues.push_back({p.probe_id, "duplicate_probe_id",
                          "probe_id appears more than once"});
      }
      if (p.kind == ProbeKind::kReal) {
        ++counts_.n_real;
        if (p.target) real_index_[*p.target].push_back(p.probe_id);
      } else {
        ++counts_.n_fake;
      }
      if (p.target) celebrities.insert(*p.target);
      if (p.method == GenerationMethod::kSynthesis) {
        if (p.reference) celebrities.insert(*p.reference);
        if (p.reference2) celebrities.insert(*p.reference2);
      }
    }
    counts_.n_celebrities = celebrities.size();
    for (auto& [id, ids] : real_index_) std::sort(ids.begin(), ids.end());

    for (const ProbeImage& p : probes_) {
      if (p.kind != ProbeKind::kFake || !p.target || p.no_real_reference) {
        continue;
      }
      if (!real_index_.contains(*p.target)) {
        issues.push_back({p.probe_id, "fake_target_without_real",
                          "target '" + p.target->canonical_name() +
                              "' has no real probe and the fake is not "
                              "flagged no_real_reference"});
      }
    }
  }

  std::string dataset_id_;
  std::string description_;
  std::vector<ProbeImage> probes_;
  std::map<std::string, IdentityRef> aliases_;
  std::map<std::string, Demographic> identity_tags_;
  ManifestCounts counts_;
  std::map<IdentityRef, std::vector<std::string>> real_index_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Representative real probe for a fake: the first real probe of the fake's
// target by sorted probe_id. Absent for synthesis fakes and for targets
// flagged no_real_reference.
inline std::optional<std::string> PairFakeWithReal(
    const DatasetManifest& manifest, std::string_view fake_probe_id) {
  const ProbeImage& fake = manifest.Get(fake_probe_id);
  if (fake.kind != ProbeKind::kFake) {
    throw std::invalid_argument("probe '" + fake.probe_id + "' is not a fake");
  }
  if (!fake.target || fake.no_real_reference) return std::nullopt;
  auto it = manifest.real_index().find(*fake.target);
  if (it == manifest.real_index().end() || it->second.empty()) {
    return std::nullopt;
  }
  return it->second.front();
}

namespace manifest_detail {

inline const std::set<std::string>& ProbeKeys() {
  static const std::set<std::string> keys = {
      "probe_id",  "uri",        "kind",            "method",
      "dataset_id", "target",    "reference",       "reference2",
      "source_video_id", "demographic_tag", "no_real_reference"};
  return keys;
}

inline std::optional<IdentityRef> OptIdentity(const nlohmann::json& j,
                                              const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return NormalizeIdentity(j.at(key).get<std::string>());
}

}  // namespace manifest_detail

// Parses a manifest document. Collects every issue before throwing.
inline DatasetManifest ParseManifest(const std::string& text) {
  using nlohmann::json;
  std::vector<ManifestIssue> issues;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError({{"", "syntax", e.what()}});
  }
  if (!doc.is_object()) {
    throw ManifestError({{"", "schema", "top level must be an object"}});
  }
  static const std::set<std::string> kTopKeys = {
      "dataset_id", "description", "counts", "probes", "aliases"};
  for (const auto& [k, v] : doc.items()) {
    if (!kTopKeys.contains(k)) {
      issues.push_back({"", "schema", "unknown top-level key '" + k + "'"});
    }
  }
  if (!doc.contains("dataset_id") || !doc["dataset_id"].is_string()) {
    issues.push_back({"", "schema", "dataset_id must be a string"});
  }
  if (!doc.contains("probes") || !doc["probes"].is_array()) {
    issues.push_back({"", "schema", "probes must be an array"});
  }
  if (!issues.empty()) throw ManifestError(std::move(issues));

  std::string dataset_id = doc["dataset_id"].get<std::string>();
  std::string description = doc.value("description", std::string());

  std::vector<ProbeImage> probes;
  std::map<std::string, Demographic> tags;
  std::size_t index = 0;
  for (const json& jp : doc["probes"]) {
    std::string where = "#" + std::to_string(index++);
    try {
      if (!jp.is_object()) throw ValidationError("schema", "probe not an object");
      for (const auto& [k, v] : jp.items()) {
        if (!manifest_detail::ProbeKeys().contains(k)) {
          throw ValidationError("schema", "unknown probe key '" + k + "'");
        }
      }
      ProbeImage p;
      p.probe_id = jp.at("probe_id").get<std::string>();
      where = p.probe_id;
      p.uri = jp.value("uri", std::string());
      p.kind = ParseProbeKind(jp.at("kind").get<std::string>());
      p.method = ParseGenerationMethod(
          jp.value("method", std::string("NotApplicable")));
      p.dataset_id = jp.value("dataset_id", dataset_id);
      if (jp.contains("dataset_id") && jp["dataset_id"].is_null()) {
        p.dataset_id = dataset_id;
      }
      p.target = manifest_detail::OptIdentity(jp, "target");
      p.reference = manifest_detail::OptIdentity(jp, "reference");
      p.reference2 = manifest_detail::OptIdentity(jp, "reference2");
      if (jp.contains("source_video_id") && !jp["source_video_id"].is_null()) {
        p.source_video_id = jp["source_video_id"].get<std::string>();
      }
      p.no_real_reference = jp.value("no_real_reference", false);
      if (jp.contains("demographic_tag") && !jp["demographic_tag"].is_null()) {
        Demographic d = ParseDemographic(jp["demographic_tag"].get<std::string>());
        if (const auto& subject = p.subject()) {
          auto [it, inserted] = tags.emplace(subject->canonical_name(), d);
          if (!inserted && it->second != d) {
            throw ValidationError("demographic_tag_conflict",
                                  "identity '" + subject->canonical_name() +
                                      "' already tagged " +
                                      std::string(ToString(it->second)));
          }
        }
      }
      probes.push_back(std::move(p));
    } catch (const ValidationError& e) {
      issues.push_back({where, e.rule(), e.what()});
    } catch (const json::exception& e) {
      issues.push_back({where, "schema", e.what()});
    }
  }

  std::map<std::string, IdentityRef> aliases;
  if (doc.contains("aliases")) {
    if (!doc["aliases"].is_object()) {
      issues.push_back({"", "schema", "aliases must be an object"});
    } else {
      for (const auto& [raw, canon] : doc["aliases"].items()) {
        try {
          aliases.emplace(NormalizeIdentity(raw).canonical_name(),
                          NormalizeIdentity(canon.get<std::string>()));
        } catch (const std::exception& e) {
          issues.push_back({"", "schema", std::string("alias: ") + e.what()});
        }
      }
    }
  }

  std::optional<ManifestCounts> declared;
  if (doc.contains("counts")) {
    try {
      const json& c = doc["counts"];
      declared = ManifestCounts{c.at("n_real").get<std::size_t>(),
                                c.at("n_fake").get<std::size_t>(),
                                c.at("n_celebrities").get<std::size_t>()};
    } catch (const json::exception& e) {
      issues.push_back({"", "schema", std::string("counts: ") + e.what()});
    }
  }

  std::optional<DatasetManifest> m;
  try {
    m.emplace(std::move(dataset_id), std::move(description), std::move(probes),
              std::move(aliases), std::move(tags), declared);
  } catch (const ManifestError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!issues.empty()) throw ManifestError(std::move(issues));
  return std::move(*m);
}

inline DatasetManifest LoadManifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError({{"", "unreadable", "cannot open " + path}});
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str());
}

// Canonical form: fixed key order, absent optionals omitted, two-space
// indentation, trailing newline. Canonical documents round-trip exactly.
inline std::string SerializeManifest(const DatasetManifest& m) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["dataset_id"] = m.dataset_id();
  doc["description"] = m.description();
  doc["counts"] = {{"n_real", m.counts().n_real},
                   {"n_fake", m.counts().n_fake},
                   {"n_celebrities", m.counts().n_celebrities}};
  ordered_json probes = ordered_json::array();
  for (const ProbeImage& p : m.probes()) {
    ordered_json jp;
    jp["probe_id"] = p.probe_id;
    jp["uri"] = p.uri;
    jp["kind"] = ToString(p.kind);
    jp["method"] = ToString(p.method);
    jp["dataset_id"] = p.dataset_id;
    if (p.target) jp["target"] = p.target->canonical_name();
    if (p.reference) jp["reference"] = p.reference->canonical_name();
    if (p.reference2) jp["reference2"] = p.reference2->canonical_name();
    if (p.source_video_id) jp["source_video_id"] = *p.source_video_id;
    if (const auto& s = p.subject()) {
      auto it = m.identity_tags().find(s->canonical_name());
      if (it != m.identity_tags().end()) jp["demographic_tag"] = ToString(it->second);
    }
    if (p.no_real_reference) jp["no_real_reference"] = true;
    probes.push_back(std::move(jp));
  }
  doc["probes"] = std::move(probes);
  ordered_json aliases = ordered_json::object();
  for (const auto& [raw, id] : m.aliases()) aliases[raw] = id.canonical_name();
  doc["aliases"] = std::move(aliases);
  return doc.dump(2) + "\n";
}

}  // namespace dia
