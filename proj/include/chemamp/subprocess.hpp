// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace chemamp {

struct LineCommandResult {
  std::string answer;  // first stdout line, without the newline
  std::string stderr_text;
  int exit_status = 0;
};

/// Runs `command` through /bin/sh, writes `input` plus a newline to its stdin,
/// closes stdin and reads the first line of stdout. Throws ToolFailure on
/// timeout, spawn failure or nonzero exit status (the message carries the
/// status and captured stderr).
LineCommandResult run_line_command(const std::string& command, std::string_view input,
                                   int timeout_ms);

}  // namespace chemamp
