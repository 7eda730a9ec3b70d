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

// Providers and detectors config files.
//
// providers.json:
//   {"fs_policy": "OnCrMiss", "billing": "per_response",
//    "retry": {"max_attempts": 3, "base_backoff_s": 1, "multiplier": 2,
//              "jitter_fraction": 0.1},
//    "pricing": "pricing.json" | {...},
//    "month_to_date": {"aws": 0},
//    "providers": {"aws": {"max_in_flight": 4,
//                          "rate": {"capacity": 1, "refill_per_second": 0.3},
//                          "simulated": {...}, "live": {...}}}}
//
// detectors.json:
//   {"max_in_flight": 4,
//    "detectors": {"d1": {"kind": "fixed_rates", "fnr": 0.021, "fpr": 0.0,
//                         "seed": 7},
//                  "d2": {"kind": "subprocess", "command": ["python3", "x.py"],
//                         "timeout_s": 10}}}

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dia/defense/defended_campaign.hpp"
#include "dia/defense/detector.hpp"
#include "dia/defense/subprocess.hpp"
#include "dia/manifest.hpp"
#include "dia/orchestrator/campaign.hpp"
#include "dia/orchestrator/pricing.hpp"
#include "dia/providers/cassette.hpp"
#include "dia/providers/live.hpp"
#include "dia/providers/simulated.hpp"
#include "json.hpp"

namespace dia {

struct SimulatedSpec {
  double report_threshold = 0.0;
  std::size_t dim = 32;
  std::uint64_t gallery_seed = 0;
  std::uint64_t rng_seed = 0;
  double noise_scale = 0.0;
  std::map<Demographic, double> bias_weights;
  FidelityWeights fidelity = DefaultFidelity();
  double similarity_floor = 0.0;
  std::vector<std::string> extra_identities;  // distractors beyond the manifest
};

struct ProviderSpec {
  std::string provider_id;
  std::optional<SimulatedSpec> simulated;
  std::optional<LiveEndpointConfig> live;
};

struct RunConfig {
  CampaignConfig campaign;
  std::map<std::string, ProviderSpec> providers;
};

namespace config_detail {

inline void CheckKeys(const nlohmann::json& j, const std::set<std::string>& allowed,
                      const std::string& where) {
  if (!j.is_object()) throw ValidationError("config", where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) {
      throw ValidationError("config", "unknown key '" + k + "' in " + where);
    }
  }
}

inline std::string Resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || path[0] == '/' || base_dir.empty()) return path;
  return base_dir + "/" + path;
}

inline SimulatedSpec ParseSimulated(const nlohmann::json& j, std::uint64_t seed) {
  CheckKeys(j,
            {"report_threshold", "dim", "gallery_seed", "rng_seed", "noise_scale",
             "bias_weights", "fidelity", "similarity_floor", "extra_identities"},
            "simulated");
  SimulatedSpec s;
  s.report_threshold = j.value("report_threshold", 0.0);
  s.dim = j.value("dim", std::size_t{32});
  s.gallery_seed = j.value("gallery_seed", seed);
  s.rng_seed = j.value("rng_seed", seed);
  s.noise_scale = j.value("noise_scale", 0.0);
  s.similarity_floor = j.value("similarity_floor", 0.0);
  if (j.contains("bias_weights")) {
    for (const auto& [tag, w] : j["bias_weights"].items()) {
      s.bias_weights[ParseDemographic(tag)] = w.get<double>();
    }
  }
  if (j.contains("fidelity")) {
    for (const auto& [m, w] : j["fidelity"].items()) {
      s.fidelity[ParseGenerationMethod(m)] = w.get<double>();
    }
  }
  if (j.contains("extra_identities")) {
    s.extra_identities = j["extra_identities"].get<std::vector<std::string>>();
  }
  if (s.dim == 0) throw ValidationError("config", "simulated dim must be > 0");
  return s;
}

inline LiveEndpointConfig ParseLive(const std::string& id, const nlohmann::json& j) {
  CheckKeys(j,
            {"cr_url", "fs_url", "headers", "cr_body", "image_field",
             "fs_source_field", "fs_target_field", "mapping"},
            "live");
  LiveEndpointConfig c;
  c.provider_id = id;
  c.cr_url = j.at("cr_url").get<std::string>();
  c.fs_url = j.at("fs_url").get<std::string>();
  if (j.contains("headers")) {
    for (const auto& [k, v] : j["headers"].items()) {
      c.headers.emplace_back(k, v.get<std::string>());
    }
  }
  std::string body = j.value("cr_body", std::string("octet_stream"));
  if (body == "octet_stream") {
    c.cr_body = BodyEncoding::kOctetStream;
  } else if (body == "json_base64") {
    c.cr_body = BodyEncoding::kJsonBase64;
  } else {
    throw ValidationError("config", "unknown cr_body '" + body + "'");
  }
  c.image_field = j.value("image_field", c.image_field);
  c.fs_source_field = j.value("fs_source_field", c.fs_source_field);
  c.fs_target_field = j.value("fs_target_field", c.fs_target_field);
  const auto& m = j.at("mapping");
  CheckKeys(m, {"name", "confidence", "confidence_scale", "similarity",
                "similarity_scale"},
            "mapping");
  c.mapping.name_path = m.at("name").get<std::string>();
  c.mapping.confidence_path = m.at("confidence").get<std::string>();
  c.mapping.confidence_scale = m.value("confidence_scale", 1.0);
  c.mapping.similarity_path = m.at("similarity").get<std::string>();
  c.mapping.similarity_scale = m.value("similarity_scale", 1.0);
  return c;
}

}  // namespace config_detail

inline RunConfig ParseRunConfig(const nlohmann::json& j, std::uint64_t seed,
                                const std::string& base_dir = "") {
  using namespace config_detail;
  RunConfig rc;
  try {
    CheckKeys(j, {"fs_policy", "billing", "retry", "pricing", "month_to_date",
                  "providers", "epoch"},
              "providers config");
    CampaignConfig& c = rc.campaign;
    c.seed = seed;
    if (j.contains("fs_policy")) {
      c.fs_policy = ParseFsPolicy(j["fs_policy"].get<std::string>());
    }
    std::string billing = j.value("billing", std::string("per_response"));
    if (billing == "per_response") {
      c.billing = BillingPolicy::kPerResponse;
    } else if (billing == "per_attempt") {
      c.billing = BillingPolicy::kPerAttempt;
    } else {
      throw ValidationError("config", "unknown billing '" + billing + "'");
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      CheckKeys(r, {"max_attempts", "base_backoff_s", "multiplier", "jitter_fraction"},
                "retry");
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.base_backoff_s = r.value("base_backoff_s", c.retry.base_backoff_s);
      c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
      c.retry.jitter_fraction = r.value("jitter_fraction", c.retry.jitter_fraction);
    }
    if (j.contains("pricing")) {
      if (j["pricing"].is_string()) {
        c.pricing = LoadPricingSchedule(Resolve(base_dir, j["pricing"].get<std::string>()));
      } else {
        c.pricing = ParsePricingSchedule(j["pricing"]);
      }
    }
    if (j.contains("month_to_date")) {
      c.month_to_date = j["month_to_date"].get<std::map<std::string, std::int64_t>>();
    }
    if (j.contains("epoch")) {
      if (!ParseUtcMillis(j["epoch"].get<std::string>(), c.epoch_ms)) {
        throw ValidationError("config", "bad epoch timestamp");
      }
    }
    for (const auto& [id, p] : j.at("providers").items()) {
      CheckKeys(p, {"max_in_flight", "rate", "simulated", "live"}, "provider " + id);
      c.provider_ids.push_back(id);
      ProviderLimits lim;
      lim.max_in_flight = p.value("max_in_flight", lim.max_in_flight);
      if (p.contains("rate")) {
        CheckKeys(p["rate"], {"capacity", "refill_per_second"}, "rate");
        lim.rate.capacity = p["rate"].value("capacity", lim.rate.capacity);
        lim.rate.refill_per_second =
            p["rate"].value("refill_per_second", lim.rate.refill_per_second);
      }
      c.limits[id] = lim;
      ProviderSpec spec;
      spec.provider_id = id;
      if (p.contains("simulated")) spec.simulated = ParseSimulated(p["simulated"], seed);
      if (p.contains("live")) spec.live = ParseLive(id, p["live"]);
      rc.providers[id] = std::move(spec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config", e.what());
  } catch (const CampaignConfigError& e) {
    throw ValidationError("config", e.what());
  }
  return rc;
}

inline RunConfig LoadRunConfig(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config", e.what());
  }
  return ParseRunConfig(j, seed, std::filesystem::path(path).parent_path().string());
}

inline ProviderProfile BuildProfile(const std::string& id, const SimulatedSpec& s,
                                    const DatasetManifest& manifest) {
  auto identities = manifest.Identities();
  for (const auto& name : s.extra_identities) {
    identities.push_back(NormalizeIdentity(name));
  }
  ProviderProfile p;
  p.provider_id = id;
  p.report_threshold = Percentage(s.report_threshold);
  p.gallery = MakeGallery(identities, s.dim, s.gallery_seed);
  p.bias_weights = s.bias_weights;
  p.rng_seed = s.rng_seed;
  p.noise_scale = s.noise_scale;
  p.fidelity = s.fidelity;
  p.similarity_floor = Percentage(s.similarity_floor);
  return p;
}

struct BackendOptions {
  std::shared_ptr<const Cassette> cassette;          // replay
  std::shared_ptr<CassetteWriter> recorder;          // live/simulated + record
  std::function<std::shared_ptr<HttpTransport>(const std::string&)> transport;
};

// Backends for the chosen mode. Replay backends never see a transport.
inline Backends MakeBackends(const RunConfig& rc, const DatasetManifest& manifest,
                             const BackendOptions& opts) {
  Backends out;
  for (const auto& id : rc.campaign.provider_ids) {
    const ProviderSpec& spec = rc.providers.at(id);
    std::shared_ptr<RecognizerBackend> b;
    switch (rc.campaign.mode) {
      case CampaignMode::kReplay:
        if (!opts.cassette) throw ValidationError("config", "replay needs a cassette");
        b = std::make_shared<ReplayProvider>(id, opts.cassette);
        break;
      case CampaignMode::kSimulated:
        if (!spec.simulated) {
          throw ValidationError("config", "provider '" + id + "' has no simulated profile");
        }
        b = std::make_shared<SimulatedProvider>(BuildProfile(id, *spec.simulated, manifest));
        break;
      case CampaignMode::kLive: {
        if (!spec.live) {
          throw ValidationError("config", "provider '" + id + "' has no live endpoint");
        }
        auto transport = opts.transport
                             ? opts.transport(id)
                             : std::make_shared<HttplibTransport>();
        b = std::make_shared<LiveProvider>(*spec.live, transport);
        break;
      }
    }
    if (opts.recorder && rc.campaign.mode != CampaignMode::kReplay) {
      b = std::make_shared<RecordingProvider>(b, opts.recorder);
    }
    out[id] = std::move(b);
  }
  return out;
}

struct DetectorConfig {
  DetectorChannels channels;
  int max_in_flight = 4;
};

inline DetectorConfig ParseDetectorConfig(const nlohmann::json& j,
                                          const std::string& base_dir = "") {
  using config_detail::CheckKeys;
  DetectorConfig dc;
  try {
    CheckKeys(j, {"max_in_flight", "detectors"}, "detectors config");
    dc.max_in_flight = j.value("max_in_flight", dc.max_in_flight);
    for (const auto& [id, d] : j.at("detectors").items()) {
      std::string kind = d.at("kind").get<std::string>();
      std::shared_ptr<DetectorChannel> ch;
      if (kind == "oracle") {
        CheckKeys(d, {"kind"}, "detector " + id);
        ch = std::make_shared<OracleDetector>(id);
      } else if (kind == "constant") {
        CheckKeys(d, {"kind", "p_fake"}, "detector " + id);
        ch = std::make_shared<ConstantDetector>(id, d.at("p_fake").get<double>());
      } else if (kind == "fixed_rates") {
        CheckKeys(d, {"kind", "fnr", "fpr", "seed"}, "detector " + id);
        ch = std::make_shared<FixedRatesDetector>(
            id, d.value("fnr", 0.0), d.value("fpr", 0.0),
            d.value("seed", std::uint64_t{0}));
      } else if (kind == "subprocess") {
        CheckKeys(d, {"kind", "command", "timeout_s"}, "detector " + id);
        SubprocessOptions o;
        o.argv = d.at("command").get<std::vector<std::string>>();
        if (!o.argv.empty() && o.argv[0].find('/') != std::string::npos) {
          o.argv[0] = config_detail::Resolve(base_dir, o.argv[0]);
        }
        o.timeout_s = d.value("timeout_s", o.timeout_s);
        auto sub = std::make_shared<SubprocessDetector>(o);
        if (sub->detector_id() != id) {
          throw ValidationError("config", "detector '" + id + "' announced id '" +
                                              sub->detector_id() + "'");
        }
        ch = sub;
      } else {
        throw ValidationError("config", "unknown detector kind '" + kind + "'");
      }
      dc.channels[id] = std::move(ch);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config", e.what());
  }
  return dc;
}

inline DetectorConfig LoadDetectorConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config", e.what());
  }
  return ParseDetectorConfig(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace dia
