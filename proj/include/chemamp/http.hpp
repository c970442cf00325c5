// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace chemamp {

/// POSTs a JSON body to `url` + `path` and returns the response body.
/// Connection failures and timeouts throw TransportError; any status other
/// than 200 throws ToolFailure with the status and body.
std::string post_json(const std::string& url, const std::string& path, const std::string& body,
                      int timeout_ms);

}  // namespace chemamp
