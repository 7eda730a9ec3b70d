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

// Detector plugin protocol, version 1. Line-delimited compact JSON over the
// detector's stdin/stdout, one response line per request line, in order:
//
//   {"op":"hello"}                                 -> {"detector_id":"d","protocol":1}
//   {"op":"score","probe_id":"p","image_path":"x"} -> {"probe_id":"p","detector_id":"d","p_fake":0.5}
//
// Anything else on the response side is a protocol violation.

#pragma once

#include <set>
#include <string>

#include "dia/defense/detector.hpp"
#include "json.hpp"

namespace dia::protocol {

inline constexpr int kVersion = 1;

inline std::string EncodeHello() { return R"({"op":"hello"})"; }

inline std::string EncodeScoreRequest(const std::string& probe_id,
                                      const std::string& image_path) {
  nlohmann::ordered_json j;
  j["op"] = "score";
  j["probe_id"] = probe_id;
  j["image_path"] = image_path;
  return j.dump();
}

inline std::string EncodeHelloResponse(const std::string& detector_id) {
  nlohmann::ordered_json j;
  j["detector_id"] = detector_id;
  j["protocol"] = kVersion;
  return j.dump();
}

inline std::string EncodeScoreResponse(const std::string& probe_id,
                                       const DetectorScore& score) {
  nlohmann::ordered_json j;
  j["probe_id"] = probe_id;
  j["detector_id"] = score.detector_id;
  j["p_fake"] = score.p_fake;
  return j.dump();
}

namespace detail {

inline nlohmann::json ParseObject(const std::string& line,
                                  const std::set<std::string>& keys) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation, "not an object");
  }
  if (j.contains("error") && j.size() == 1) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "detector reported error: " + j["error"].dump());
  }
  std::set<std::string> got;
  for (const auto& [k, v] : j.items()) got.insert(k);
  if (got != keys) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "unexpected key set in " + line);
  }
  return j;
}

}  // namespace detail

// Returns the detector_id announced by the handshake.
inline std::string ParseHelloResponse(const std::string& line) {
  auto j = detail::ParseObject(line, {"detector_id", "protocol"});
  if (!j["detector_id"].is_string() ||
      j["detector_id"].get<std::string>().empty()) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "detector_id must be a non-empty string");
  }
  if (!j["protocol"].is_number_integer() || j["protocol"].get<int>() != kVersion) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "unsupported protocol version");
  }
  return j["detector_id"].get<std::string>();
}

inline DetectorScore ParseScoreResponse(const std::string& line,
                                        const std::string& expected_probe_id,
                                        const std::string& expected_detector_id) {
  auto j = detail::ParseObject(line, {"probe_id", "detector_id", "p_fake"});
  if (!j["probe_id"].is_string() ||
      j["probe_id"].get<std::string>() != expected_probe_id) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "response for wrong probe_id");
  }
  if (!j["detector_id"].is_string() ||
      j["detector_id"].get<std::string>() != expected_detector_id) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "response from wrong detector_id");
  }
  if (!j["p_fake"].is_number()) {
    throw DetectorError(DetectorErrorKind::kProtocolViolation,
                        "p_fake is not a number");
  }
  return DetectorScore::Make(expected_detector_id, j["p_fake"].get<double>());
}

}  // namespace dia::protocol
