#pragma once

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <stdlib.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sweep/catalog.hpp"
#include "sweep/file_store.hpp"
#include "sweep/process.hpp"
#include "sweep/worker.hpp"

namespace testing {

namespace fs = std::filesystem;
using sweep::json;

inline const std::string kSourceDir = SWEEP_SOURCE_DIR;
inline const std::string kXsub = SWEEP_XSUB_BIN;
inline const std::string kSweepd = SWEEPD_BIN;

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "sweep-test-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw std::runtime_error("mkdtemp");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    sweep::set_tree_writable(path_, true);
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, std::string_view content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string stub(std::string_view name) {
  return kSourceDir + "/tests/stubs/" + std::string(name);
}

inline std::string oracle(std::string_view name) {
  return kSourceDir + "/tests/oracles/" + std::string(name);
}

/// "python3 .../sum_sim.py <extra>"
inline std::string sum_command(const std::string& extra = {}) {
  std::string cmd = "python3 " + stub("sum_sim.py");
  if (!extra.empty()) cmd += " " + extra;
  return cmd;
}

inline std::string xsub_command(const fs::path& state_dir) {
  return kXsub + " --state-dir " + sweep::shell_quote(state_dir.string());
}

inline sweep::Simulator sum_simulator(sweep::Catalog& catalog, const std::string& name = "sum",
                                      const std::string& extra = {},
                                      sweep::InputMode mode = sweep::InputMode::arguments) {
  sweep::Simulator sim;
  sim.name = name;
  sim.command = sum_command((mode == sweep::InputMode::json_file ? "--json " : "") + extra);
  sim.input_mode = mode;
  sweep::ParameterDefinition p1{"p1", sweep::ParameterKind::floating, {}, {}, 0};
  sweep::ParameterDefinition p2{"p2", sweep::ParameterKind::floating, {}, {}, 1};
  sim.parameter_definitions = {p1, p2};
  return catalog.add_simulator(sim).value;
}

inline sweep::Host local_host(sweep::Catalog& catalog, const fs::path& work, const std::string& xsub,
                              int capacity = 4, const std::string& name = "local") {
  sweep::Host h;
  h.name = name;
  h.work_base_dir = work.string();
  h.xsub_path = xsub;
  h.max_concurrent_jobs = capacity;
  h.polling_interval_seconds = 1;
  return catalog.add_host(h);
}

/// Backend factory handing every host the same instance.
inline sweep::BackendFactory shared_backend(std::shared_ptr<sweep::SchedulerBackend> backend) {
  return [backend](const sweep::Host&, std::shared_ptr<sweep::Transport>) { return backend; };
}

inline sweep::WorkerConfig fast_config() {
  sweep::WorkerConfig c;
  c.poll_interval_seconds = 0.05;
  c.max_dispatch_per_cycle = 100;
  c.shutdown_grace_seconds = 10;
  return c;
}

inline bool all_terminal(const sweep::Catalog& catalog) {
  for (const auto& r : catalog.runs()) {
    auto s = r.job.status;
    if (s != sweep::JobStatus::finished && s != sweep::JobStatus::failed &&
        s != sweep::JobStatus::cancelled) {
      return false;
    }
  }
  for (const auto& a : catalog.analyses()) {
    auto s = a.job.status;
    if (s != sweep::JobStatus::finished && s != sweep::JobStatus::failed &&
        s != sweep::JobStatus::cancelled) {
      return false;
    }
  }
  return true;
}

/// Cycles a real-time worker until every job is terminal.
inline int drive(sweep::Worker& worker, const sweep::Catalog& catalog, int max_cycles = 2000) {
  for (int i = 1; i <= max_cycles; ++i) {
    worker.cycle();
    if (all_terminal(catalog)) return i;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return -1;
}

inline sweep::ProcessResult sweepd(const std::vector<std::string>& args) {
  std::vector<std::string> argv{kSweepd};
  argv.insert(argv.end(), args.begin(), args.end());
  return sweep::run_process(argv);
}

/// Starts `argv` in the background with stdout and stderr appended to `log`.
inline pid_t spawn(const std::vector<std::string>& argv, const fs::path& log) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, 1, 2);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw std::runtime_error("posix_spawn failed");
  return pid;
}

/// Exit status, or 128 + signal.
inline int wait_exit(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

/// Lines of a nonce log grouped by job directory name.
inline std::map<std::string, int> nonce_counts(const fs::path& log) {
  std::map<std::string, int> counts;
  std::ifstream in(log);
  std::string dir, nonce;
  while (in >> dir >> nonce) ++counts[dir];
  return counts;
}

}  // namespace testing
