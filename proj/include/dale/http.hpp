// Copyright 2026 The dale-forge Authors.
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

// Minimal JSON-over-HTTP client used by the remote embedder, generator and
// scorer.

#pragma once

#include <chrono>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "dale/error.hpp"

namespace dale::http {

struct Endpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash, may be empty
};

inline Endpoint parse_endpoint(const std::string& url) {
  if (url.empty()) fail(ErrorCode::kInvalidConfig, "empty endpoint URL");
  const auto scheme = url.find("://");
  const std::size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_begin);
  Endpoint ep;
  std::string base = slash == std::string::npos ? url : url.substr(0, slash);
  if (scheme == std::string::npos) base = "http://" + base;
  ep.base = std::move(base);
  if (slash != std::string::npos) {
    ep.prefix = url.substr(slash);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  return ep;
}

// POSTs `body` to endpoint + path and returns the decoded JSON object.
// Connection failures raise TransportError; HTTP error statuses and bodies
// that are not JSON objects raise ProtocolError.
inline nlohmann::json post_json(const Endpoint& ep, const std::string& path,
                                const nlohmann::json& body,
                                std::chrono::seconds timeout = std::chrono::seconds(120)) {
  httplib::Client client(ep.base);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const std::string full = ep.prefix + path;
  auto res = client.Post(full, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::kTransportError,
         "POST " + ep.base + full + " failed: " + httplib::to_string(res.error()));
  }
  nlohmann::json decoded;
  try {
    decoded = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    if (res->status >= 400) {
      fail(ErrorCode::kProtocolError,
           "POST " + full + " returned HTTP " + std::to_string(res->status));
    }
    fail(ErrorCode::kProtocolError, "POST " + full + " returned a non-JSON body");
  }
  if (res->status >= 400) {
    std::string detail;
    if (decoded.is_object() && decoded.contains("error") && decoded["error"].is_string()) {
      detail = ": " + decoded["error"].get<std::string>();
    }
    fail(ErrorCode::kProtocolError,
         "POST " + full + " returned HTTP " + std::to_string(res->status) + detail);
  }
  if (!decoded.is_object()) fail(ErrorCode::kProtocolError, "POST " + full + " returned a non-object body");
  return decoded;
}

}  // namespace dale::http
