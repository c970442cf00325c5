// SPDX-License-Identifier: Apache-2.0
#include "chemamp/http.hpp"

#include <chrono>

#include <httplib.h>

#include "chemamp/error.hpp"

namespace chemamp {

std::string post_json(const std::string& url, const std::string& path, const std::string& body,
                      int timeout_ms) {
  httplib::Client client(url);
  if (!client.is_valid()) throw ConfigError("invalid endpoint url '" + url + "'");
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  auto response = client.Post(path, body, "application/json");
  if (!response) {
    throw TransportError("POST " + url + path + " failed: " + httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw ToolFailure("POST " + url + path + " returned status " +
                      std::to_string(response->status) + ": " + response->body);
  }
  return response->body;
}

}  // namespace chemamp
