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
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dia/core/types.hpp"
#include "dia/core/util.hpp"
#include "dia/providers/backend.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dia {

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string content_type;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// The only component that talks to the network. Connection failures throw
// ProviderError(kNetwork).
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse Post(const HttpRequest& request) = 0;
};

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(30))
      : timeout_(timeout) {}

  HttpResponse Post(const HttpRequest& request) override {
    auto scheme_end = request.url.find("://");
    auto path_start = request.url.find('/', scheme_end == std::string::npos
                                                ? 0
                                                : scheme_end + 3);
    std::string origin = request.url.substr(0, path_start);
    std::string path = path_start == std::string::npos
                           ? "/"
                           : request.url.substr(path_start);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto res = client.Post(path, headers, request.body, request.content_type);
    if (!res) {
      throw ProviderError(ProviderErrorKind::kNetwork,
                          "POST " + request.url + " failed: " +
                              httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

// Where the interesting fields live in a provider's response document, as
// JSON pointers, and how to scale confidences onto [0, 100].
struct ResponseMapping {
  std::string name_path;
  std::string confidence_path;
  double confidence_scale = 1.0;
  std::string similarity_path;
  double similarity_scale = 1.0;
};

enum class BodyEncoding { kOctetStream, kJsonBase64 };

struct LiveEndpointConfig {
  std::string provider_id;
  std::string cr_url;
  std::string fs_url;
  std::vector<std::pair<std::string, std::string>> headers;
  BodyEncoding cr_body = BodyEncoding::kOctetStream;
  std::string image_field = "image";
  std::string fs_source_field = "source";
  std::string fs_target_field = "target";
  ResponseMapping mapping;
};

// Replaces every ${NAME} with the environment variable NAME (empty when
// unset). Credentials reach the adapter only this way.
inline std::string ExpandEnv(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "${") == 0) {
      auto end = text.find('}', i + 2);
      if (end != std::string::npos) {
        std::string name = text.substr(i + 2, end - i - 2);
        if (const char* v = std::getenv(name.c_str())) out += v;
        i = end + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

namespace live_detail {

inline const nlohmann::json* At(const nlohmann::json& doc,
                                const std::string& pointer) {
  if (pointer.empty()) return nullptr;
  try {
    nlohmann::json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) return nullptr;
    const auto& v = doc.at(ptr);
    return v.is_null() ? nullptr : &v;
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

inline Percentage Scaled(const nlohmann::json& v, double scale) {
  if (!v.is_number()) {
    throw ProviderError(ProviderErrorKind::kBadResponse, "score is not numeric");
  }
  try {
    return Percentage(RoundTo(v.get<double>() * scale, 2));
  } catch (const ValidationError& e) {
    throw ProviderError(ProviderErrorKind::kBadResponse, e.what());
  }
}

}  // namespace live_detail

// Response document -> Prediction. A missing name means "no celebrity".
inline Prediction MapRecognitionResponse(const std::string& body,
                                         const ResponseMapping& mapping) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::kBadResponse, e.what());
  }
  Prediction p;
  const auto* name = live_detail::At(doc, mapping.name_path);
  if (name == nullptr) return p;
  if (!name->is_string() || name->get<std::string>().empty()) {
    throw ProviderError(ProviderErrorKind::kBadResponse, "bad name field");
  }
  const auto* conf = live_detail::At(doc, mapping.confidence_path);
  if (conf == nullptr) {
    throw ProviderError(ProviderErrorKind::kBadResponse,
                        "name without confidence");
  }
  p.match = Match{NormalizeIdentity(name->get<std::string>()),
                  live_detail::Scaled(*conf, mapping.confidence_scale)};
  return p;
}

// Response document -> similarity. A missing similarity means the provider
// found no matching face, reported as 0.
inline Percentage MapSimilarityResponse(const std::string& body,
                                        const ResponseMapping& mapping) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::kBadResponse, e.what());
  }
  const auto* s = live_detail::At(doc, mapping.similarity_path);
  if (s == nullptr) return Percentage(0.0);
  return live_detail::Scaled(*s, mapping.similarity_scale);
}

// Hook for request signing (e.g. SigV4); runs after headers are attached.
using RequestHook = std::function<void(HttpRequest&)>;
using ImageReader = std::function<std::string(const std::string& uri)>;

inline std::string ReadImageFile(const std::string& uri) {
  std::string path = uri.rfind("file://", 0) == 0 ? uri.substr(7) : uri;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ProviderError(ProviderErrorKind::kUnreadableImage,
                        "cannot read image " + uri);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class LiveProvider : public RecognizerBackend {
 public:
  LiveProvider(LiveEndpointConfig config,
               std::shared_ptr<HttpTransport> transport, RequestHook hook = {},
               ImageReader reader = ReadImageFile)
      : config_(std::move(config)),
        transport_(std::move(transport)),
        hook_(std::move(hook)),
        reader_(std::move(reader)) {}

  const std::string& provider_id() const override {
    return config_.provider_id;
  }

  Timed<Prediction> RecognizeCelebrity(const ProbeImage& probe) override {
    HttpRequest req = Base(config_.cr_url);
    std::string image = reader_(probe.uri);
    if (config_.cr_body == BodyEncoding::kOctetStream) {
      req.content_type = "application/octet-stream";
      req.body = std::move(image);
    } else {
      req.content_type = "application/json";
      nlohmann::json j;
      j[config_.image_field] = httplib::detail::base64_encode(image);
      req.body = j.dump();
    }
    auto [resp, ms] = Send(req);
    return {MapRecognitionResponse(resp.body, config_.mapping), ms};
  }

  Timed<Percentage> FaceSimilarity(const ProbeImage& real_probe,
                                   const ProbeImage& fake_probe) override {
    HttpRequest req = Base(config_.fs_url);
    req.content_type = "application/json";
    nlohmann::json j;
    j[config_.fs_source_field] =
        httplib::detail::base64_encode(reader_(real_probe.uri));
    j[config_.fs_target_field] =
        httplib::detail::base64_encode(reader_(fake_probe.uri));
    req.body = j.dump();
    auto [resp, ms] = Send(req);
    return {MapSimilarityResponse(resp.body, config_.mapping), ms};
  }

 private:
  HttpRequest Base(const std::string& url) const {
    HttpRequest req;
    req.url = url;
    for (const auto& [k, v] : config_.headers) req.headers.emplace_back(k, v);
    return req;
  }

  std::pair<HttpResponse, double> Send(HttpRequest& req) {
    if (hook_) hook_(req);
    auto start = std::chrono::steady_clock::now();
    HttpResponse resp = transport_->Post(req);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    if (resp.status == 429) {
      throw ProviderError(ProviderErrorKind::kQuotaExceeded, "HTTP 429");
    }
    if (resp.status >= 500 || resp.status == 0) {
      throw ProviderError(ProviderErrorKind::kNetwork,
                          "HTTP " + std::to_string(resp.status));
    }
    if (resp.status < 200 || resp.status >= 300) {
      throw ProviderError(ProviderErrorKind::kBadResponse,
                          "HTTP " + std::to_string(resp.status));
    }
    return {std::move(resp), RoundTo(ms, 1)};
  }

  LiveEndpointConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  RequestHook hook_;
  ImageReader reader_;
};

}  // namespace dia
