// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/http_client.h"

#include <regex>
#include <stdexcept>

#include "httplib.h"

namespace renuance {

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds) {
  static const std::regex kUrl(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw std::runtime_error("unsupported url: " + url);
  const std::string host = m[1];
  const int port = m[2].matched ? std::stoi(m[2]) : 80;
  const std::string path = m[3].matched ? std::string(m[3]) : "/";

  httplib::Client client(host, port);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  auto res = client.Post(path, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
  if (!res) throw std::runtime_error("request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw std::runtime_error("request to " + url + " returned status " + std::to_string(res->status));
  }
  return nlohmann::json::parse(res->body);
}

}  // namespace renuance
