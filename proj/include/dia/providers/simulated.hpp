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

// Deterministic stand-in for a commercial recognizer. Every identity owns a
// unit embedding; probes are mapped to latent embeddings (fakes mix their
// target and reference identities) and recognition is nearest-neighbor
// cosine similarity behind a report threshold.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "dia/providers/backend.hpp"

namespace dia {

using Embedding = std::vector<double>;

struct GalleryEntry {
  IdentityRef identity;
  Embedding embedding;
};

// Target-mixing weight per generation method.
using FidelityWeights = std::map<GenerationMethod, double>;

inline FidelityWeights DefaultFidelity() {
  return {{GenerationMethod::kReenactment, 0.9},
          {GenerationMethod::kReplacement, 0.6},
          {GenerationMethod::kSynthesis, 0.5}};
}

struct ProviderProfile {
  std::string provider_id;
  Percentage report_threshold{0.0};
  std::vector<GalleryEntry> gallery;
  std::map<Demographic, double> bias_weights;
  std::uint64_t rng_seed = 0;

  // Simulator knobs.
  double noise_scale = 0.0;
  FidelityWeights fidelity = DefaultFidelity();
  Percentage similarity_floor{0.0};
};

namespace sim_detail {

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void Normalize(Embedding& v) {
  double n = std::sqrt(Dot(v, v));
  if (n == 0.0) return;
  for (double& x : v) x /= n;
}

inline std::mt19937_64 KeyedEngine(std::uint64_t seed, std::string_view key) {
  std::string buf = std::to_string(seed) + ":" + std::string(key);
  return std::mt19937_64(Fnv1a64(buf));
}

inline Embedding RandomUnit(std::size_t dim, std::uint64_t seed,
                            std::string_view key) {
  auto eng = KeyedEngine(seed, key);
  std::normal_distribution<double> g(0.0, 1.0);
  Embedding v(dim);
  for (double& x : v) x = g(eng);
  Normalize(v);
  return v;
}

// Ties within this tolerance are broken by gallery order (sorted names).
inline constexpr double kTieTolerance = 1e-12;

}  // namespace sim_detail

// Random unit embeddings, one per identity, keyed by (seed, name).
inline std::vector<GalleryEntry> MakeGallery(
    const std::vector<IdentityRef>& identities, std::size_t dim,
    std::uint64_t seed) {
  std::vector<GalleryEntry> out;
  for (const auto& id : identities) {
    out.push_back({id, sim_detail::RandomUnit(dim, seed,
                                              "gallery:" + id.canonical_name())});
  }
  return out;
}

// Standard basis embeddings: every pair of identities is orthogonal.
inline std::vector<GalleryEntry> MakeOrthogonalGallery(
    const std::vector<IdentityRef>& identities) {
  std::vector<GalleryEntry> out;
  for (std::size_t i = 0; i < identities.size(); ++i) {
    Embedding e(identities.size(), 0.0);
    e[i] = 1.0;
    out.push_back({identities[i], std::move(e)});
  }
  return out;
}

// Throws ValidationError on a malformed profile; sorts the gallery by name.
inline ProviderProfile ValidateProfile(ProviderProfile profile) {
  if (profile.provider_id.empty()) {
    throw ValidationError("profile", "provider_id is empty");
  }
  std::sort(profile.gallery.begin(), profile.gallery.end(),
            [](const GalleryEntry& a, const GalleryEntry& b) {
              return a.identity < b.identity;
            });
  for (std::size_t i = 0; i < profile.gallery.size(); ++i) {
    const auto& e = profile.gallery[i];
    if (i > 0 && profile.gallery[i - 1].identity == e.identity) {
      throw ValidationError("profile", "duplicate gallery identity '" +
                                           e.identity.canonical_name() + "'");
    }
    if (e.embedding.size() != profile.gallery.front().embedding.size() ||
        e.embedding.empty()) {
      throw ValidationError("profile", "gallery embeddings differ in dimension");
    }
    double norm = std::sqrt(sim_detail::Dot(e.embedding, e.embedding));
    if (std::abs(norm - 1.0) > 1e-9) {
      throw ValidationError("profile", "embedding of '" +
                                           e.identity.canonical_name() +
                                           "' is not unit norm");
    }
  }
  for (const auto& [method, w] : profile.fidelity) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw ValidationError("profile", "fidelity weight outside [0, 1]");
    }
  }
  for (const auto& [tag, w] : profile.bias_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("profile", "bias weight must be finite and >= 0");
    }
  }
  if (!(profile.noise_scale >= 0.0)) {
    throw ValidationError("profile", "noise_scale must be >= 0");
  }
  return profile;
}

namespace sim_detail {

inline const Embedding* Lookup(const ProviderProfile& profile,
                               const IdentityRef& id) {
  auto it = std::lower_bound(
      profile.gallery.begin(), profile.gallery.end(), id,
      [](const GalleryEntry& e, const IdentityRef& x) { return e.identity < x; });
  if (it == profile.gallery.end() || !(it->identity == id)) return nullptr;
  return &it->embedding;
}

inline std::size_t Dimension(const ProviderProfile& profile) {
  return profile.gallery.empty() ? 16 : profile.gallery.front().embedding.size();
}

}  // namespace sim_detail

// Latent embedding of a probe as the simulated recognizer sees it. Total and
// deterministic in (probe_id, rng_seed). The profile's gallery must be sorted
// (ValidateProfile does this).
inline Embedding SimulateLatent(const ProbeImage& probe,
                                const ProviderProfile& profile,
                                const FidelityWeights& fidelity) {
  using sim_detail::Lookup;
  const std::size_t dim = sim_detail::Dimension(profile);

  auto mix = [&](const IdentityRef& a, const IdentityRef& b,
                 double w) -> std::optional<Embedding> {
    const Embedding* ea = Lookup(profile, a);
    const Embedding* eb = Lookup(profile, b);
    if (ea == nullptr || eb == nullptr) return std::nullopt;
    Embedding out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      out[i] = w * (*ea)[i] + (1.0 - w) * (*eb)[i];
    }
    sim_detail::Normalize(out);
    return out;
  };

  std::optional<Embedding> base;
  if (probe.kind == ProbeKind::kReal) {
    if (probe.target) {
      if (const Embedding* e = Lookup(profile, *probe.target)) base = *e;
    }
  } else if (probe.method == GenerationMethod::kSynthesis) {
    if (probe.reference && probe.reference2) {
      base = mix(*probe.reference, *probe.reference2, 0.5);
    }
  } else if (probe.target && probe.reference) {
    auto it = fidelity.find(probe.method);
    double w = it == fidelity.end() ? 0.5 : it->second;
    base = mix(*probe.target, *probe.reference, w);
  }

  if (!base) {
    return sim_detail::RandomUnit(dim, profile.rng_seed,
                                  "out-of-gallery:" + probe.probe_id);
  }
  if (profile.noise_scale > 0.0) {
    auto eng = sim_detail::KeyedEngine(profile.rng_seed, "noise:" + probe.probe_id);
    std::normal_distribution<double> g(0.0, 1.0);
    const double s = profile.noise_scale / std::sqrt(static_cast<double>(dim));
    for (double& x : *base) x += s * g(eng);
    sim_detail::Normalize(*base);
  }
  return *base;
}

class SimulatedProvider : public RecognizerBackend {
 public:
  explicit SimulatedProvider(ProviderProfile profile)
      : profile_(ValidateProfile(std::move(profile))) {}

  const std::string& provider_id() const override {
    return profile_.provider_id;
  }
  const ProviderProfile& profile() const { return profile_; }

  struct Neighbor {
    std::size_t index;
    double cosine;
  };

  // Brute-force nearest gallery identity; ties go to the smaller name.
  std::optional<Neighbor> Nearest(const Embedding& latent) const {
    std::optional<Neighbor> best;
    for (std::size_t i = 0; i < profile_.gallery.size(); ++i) {
      double c = sim_detail::Dot(latent, profile_.gallery[i].embedding);
      if (!best || c > best->cosine + sim_detail::kTieTolerance) {
        best = Neighbor{i, c};
      }
    }
    return best;
  }

  // Confidence before the report threshold is applied, or nullopt when the
  // gallery is empty.
  std::optional<Match> ScoredMatch(const ProbeImage& probe) const {
    auto nn = Nearest(Latent(probe));
    if (!nn) return std::nullopt;
    const IdentityRef& id = profile_.gallery[nn->index].identity;
    double bias = 1.0;
    if (auto tag = id.demographic_tag()) {
      auto it = profile_.bias_weights.find(*tag);
      if (it != profile_.bias_weights.end()) bias = it->second;
    }
    double score = std::min(100.0, 100.0 * std::max(0.0, nn->cosine) * bias);
    return Match{id.WithTag(std::nullopt), Percentage(RoundTo(score, 2))};
  }

  Timed<Prediction> RecognizeCelebrity(const ProbeImage& probe) override {
    Prediction p;
    auto m = ScoredMatch(probe);
    if (m && m->confidence >= profile_.report_threshold) p.match = *m;
    return {p, Latency("CR:" + probe.probe_id)};
  }

  Timed<Percentage> FaceSimilarity(const ProbeImage& real_probe,
                                   const ProbeImage& fake_probe) override {
    double c = sim_detail::Dot(Latent(real_probe), Latent(fake_probe));
    double s = std::clamp(100.0 * c, profile_.similarity_floor.value(), 100.0);
    return {Percentage(RoundTo(s, 2)),
            Latency("FS:" + fake_probe.probe_id + ":" + real_probe.probe_id)};
  }

  Embedding Latent(const ProbeImage& probe) const {
    return SimulateLatent(probe, profile_, profile_.fidelity);
  }

 private:
  double Latency(std::string_view key) const {
    return RoundTo(50.0 + 150.0 * KeyedUniform(profile_.rng_seed, key), 1);
  }

  ProviderProfile profile_;
};

// Picks the report threshold that makes the recognized fraction of `fakes`
// as close to `target_rate` as the confidence distribution allows.
inline Percentage TuneReportThreshold(const SimulatedProvider& provider,
                                      const std::vector<ProbeImage>& fakes,
                                      double target_rate) {
  std::vector<double> conf;
  conf.reserve(fakes.size());
  for (const auto& p : fakes) {
    auto m = provider.ScoredMatch(p);
    conf.push_back(m ? m->confidence.value() : -1.0);
  }
  if (conf.empty() || target_rate >= 1.0) return Percentage(0.0);
  std::sort(conf.begin(), conf.end(), std::greater<>());
  auto keep = static_cast<std::size_t>(std::llround(target_rate * conf.size()));
  if (keep == 0) return Percentage(std::min(100.0, RoundTo(conf.front(), 2) + 0.01));
  // Recognized iff confidence >= threshold; place the threshold at the
  // keep-th highest confidence.
  double t = conf[keep - 1];
  return Percentage(std::clamp(t, 0.0, 100.0));
}

}  // namespace dia
