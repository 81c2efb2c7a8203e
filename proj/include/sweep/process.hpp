#pragma once

#include <sys/types.h>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sweep {

struct ProcessResult {
  /// Exit status, or 128 + signal number when the child was killed.
  int exit_code = -1;
  std::string out;
  std::string err;

  bool ok() const { return exit_code == 0; }
};

struct ProcessOptions {
  std::optional<std::filesystem::path> cwd;
  std::string input;
};

/// Runs argv[0] (PATH lookup) to completion, capturing both output streams.
/// Throws std::system_error when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

/// `/bin/sh -c command`
ProcessResult run_shell(const std::string& command, const ProcessOptions& options = {});

/// POSIX single-quote quoting; plain words are returned unchanged.
std::string shell_quote(std::string_view word);

/// True when `pid` exists and is not a zombie.
bool process_alive(pid_t pid);

}  // namespace sweep
