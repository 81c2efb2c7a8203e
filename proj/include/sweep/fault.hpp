#pragma once

#include <string>
#include <string_view>

namespace sweep::fault {

/// Exit status used by an injected crash.
inline constexpr int kCrashExitCode = 86;

/// Kills the process with _exit(kCrashExitCode) when armed for `name`.
/// Armed from SWEEPD_CRASH_AT="<name>" or "<name>:<n>" (crash on the n-th
/// hit), or programmatically through arm(). No-op otherwise.
void crash_point(std::string_view name);

/// Overrides the environment; an empty spec disarms.
void arm(const std::string& spec);

}  // namespace sweep::fault
