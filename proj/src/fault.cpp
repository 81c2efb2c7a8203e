#include "sweep/fault.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <optional>

namespace sweep::fault {

namespace {

struct Armed {
  std::string name;
  long hit = 1;
  long seen = 0;
};

std::mutex g_mutex;
bool g_loaded = false;
std::optional<Armed> g_armed;

std::optional<Armed> parse(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  Armed a;
  auto colon = spec.rfind(':');
  a.name = spec.substr(0, colon);
  if (colon != std::string::npos) a.hit = std::max(1L, std::strtol(spec.c_str() + colon + 1, nullptr, 10));
  return a;
}

}  // namespace

void arm(const std::string& spec) {
  std::lock_guard lock(g_mutex);
  g_loaded = true;
  g_armed = parse(spec);
}

void crash_point(std::string_view name) {
  std::lock_guard lock(g_mutex);
  if (!g_loaded) {
    g_loaded = true;
    if (const char* env = std::getenv("SWEEPD_CRASH_AT")) g_armed = parse(env);
  }
  if (!g_armed || g_armed->name != name) return;
  if (++g_armed->seen < g_armed->hit) return;
  std::fprintf(stderr, "injected crash at %.*s\n", static_cast<int>(name.size()), name.data());
  std::fflush(stderr);
  _exit(kCrashExitCode);
}

}  // namespace sweep::fault
