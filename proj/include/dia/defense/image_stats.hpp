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

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"

namespace dia {

// Per-channel mean and variance of pixel values scaled to [0, 1].
struct ImageStats {
  std::array<double, 3> mean{};
  std::array<double, 3> variance{};

  std::array<double, 6> Flatten() const {
    return {mean[0], mean[1], mean[2], variance[0], variance[1], variance[2]};
  }
};

// `samples` holds interleaved channel values; one-channel images are
// replicated across all three channels.
inline ImageStats ComputeImageStats(const std::vector<double>& samples,
                                    int channels) {
  ImageStats s;
  if (channels != 1 && channels != 3) {
    throw ValidationError("image", "unsupported channel count");
  }
  std::size_t pixels = samples.size() / static_cast<std::size_t>(channels);
  if (pixels == 0) throw ValidationError("image", "empty image");
  for (int c = 0; c < 3; ++c) {
    int src = channels == 1 ? 0 : c;
    double sum = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) sum += samples[i * channels + src];
    double mean = sum / static_cast<double>(pixels);
    double sq = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) {
      double d = samples[i * channels + src] - mean;
      sq += d * d;
    }
    s.mean[c] = mean;
    s.variance[c] = sq / static_cast<double>(pixels);
  }
  return s;
}

class ImageStatsSource {
 public:
  virtual ~ImageStatsSource() = default;
  // nullopt when the image cannot be read.
  virtual std::optional<ImageStats> Stats(const ProbeImage& probe) = 0;
};

namespace image_detail {

inline bool NextToken(const std::string& data, std::size_t& pos,
                      std::string& token) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  token.clear();
  while (pos < data.size() &&
         !std::isspace(static_cast<unsigned char>(data[pos]))) {
    token += data[pos++];
  }
  return !token.empty();
}

}  // namespace image_detail

// Netpbm P2/P3 (ASCII) and P5/P6 (binary, 8 or 16 bit) reader.
inline std::optional<ImageStats> ParseNetpbmStats(const std::string& data) {
  std::size_t pos = 0;
  std::string tok;
  auto number = [&](long& v) {
    if (!image_detail::NextToken(data, pos, tok)) return false;
    try {
      std::size_t used = 0;
      v = std::stol(tok, &used);
      return used == tok.size() && v >= 0;
    } catch (...) {
      return false;
    }
  };
  if (!image_detail::NextToken(data, pos, tok)) return std::nullopt;
  int channels = 0;
  bool binary = false;
  if (tok == "P2") channels = 1;
  else if (tok == "P3") channels = 3;
  else if (tok == "P5") channels = 1, binary = true;
  else if (tok == "P6") channels = 3, binary = true;
  else return std::nullopt;
  long w = 0, h = 0, maxval = 0;
  if (!number(w) || !number(h) || !number(maxval)) return std::nullopt;
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) return std::nullopt;
  std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                      static_cast<std::size_t>(channels);
  std::vector<double> samples;
  samples.reserve(count);
  if (binary) {
    ++pos;  // single whitespace after maxval
    std::size_t width = maxval > 255 ? 2 : 1;
    if (data.size() < pos + count * width) return std::nullopt;
    for (std::size_t i = 0; i < count; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + pos +
                      i * width;
      long v = width == 2 ? (p[0] << 8) | p[1] : p[0];
      samples.push_back(static_cast<double>(v) / static_cast<double>(maxval));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      long v = 0;
      if (!number(v) || v > maxval) return std::nullopt;
      samples.push_back(static_cast<double>(v) / static_cast<double>(maxval));
    }
  }
  return ComputeImageStats(samples, channels);
}

inline std::string PathFromUri(const std::string& uri) {
  const std::string scheme = "file://";
  if (uri.rfind(scheme, 0) == 0) return uri.substr(scheme.size());
  return uri;
}

class NetpbmImageStats : public ImageStatsSource {
 public:
  std::optional<ImageStats> Stats(const ProbeImage& probe) override {
    std::ifstream in(PathFromUri(probe.uri), std::ios::binary);
    if (!in) return std::nullopt;
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return ParseNetpbmStats(data);
  }
};

// Deterministic stand-in for runs without image files. Independent of the
// probe's label.
class SyntheticImageStats : public ImageStatsSource {
 public:
  explicit SyntheticImageStats(std::uint64_t seed) : seed_(seed) {}

  std::optional<ImageStats> Stats(const ProbeImage& probe) override {
    ImageStats s;
    for (int c = 0; c < 3; ++c) {
      std::string k = probe.probe_id + ":" + std::to_string(c);
      s.mean[c] = 0.3 + 0.4 * KeyedUniform(seed_, "image-mean:" + k);
      s.variance[c] = 0.01 + 0.04 * KeyedUniform(seed_, "image-var:" + k);
    }
    return s;
  }

 private:
  std::uint64_t seed_;
};

}  // namespace dia
