#include <fcntl.h>
#include <signal.h>
#include <sys/file.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "sweep/errors.hpp"
#include "sweep/process.hpp"
#include "sweep/scheduler.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

std::optional<json> read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

/// Any non-zombie process left in group `pgid`.
bool group_alive(pid_t pgid) {
  if (pgid <= 0) return false;
  if (::kill(-pgid, 0) != 0 && errno == ESRCH) return false;
  for (const auto& entry : fs::directory_iterator("/proc")) {
    const auto name = entry.path().filename().string();
    if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
    std::ifstream stat(entry.path() / "stat");
    std::string content((std::istreambuf_iterator<char>(stat)), std::istreambuf_iterator<char>());
    auto close = content.rfind(')');
    if (close == std::string::npos) continue;
    std::istringstream rest(content.substr(close + 2));
    char state = 0;
    long ppid = 0, pgrp = 0;
    rest >> state >> ppid >> pgrp;
    if (pgrp == pgid && state != 'Z' && state != 'X') return true;
  }
  return false;
}

bool valid_job_id(std::string_view id) {
  return id.size() > 2 && id.substr(0, 2) == "f-" &&
         id.substr(2).find_first_not_of("0123456789") == std::string_view::npos;
}

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    auto w = ::write(fd, data, n);
    if (w <= 0) {
      if (w < 0 && errno == EINTR) continue;
      return;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

ForkBackend::ForkBackend(fs::path state_dir) : state_dir_(std::move(state_dir)) {
  fs::create_directories(state_dir_);
}

std::string ForkBackend::next_job_id() {
  auto lock_path = state_dir_ / "counter.lock";
  int fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::submit_rejected, "cannot open " + lock_path.string());
  while (::flock(fd, LOCK_EX) != 0 && errno == EINTR) {
  }
  std::uint64_t n = 0;
  {
    std::ifstream in(state_dir_ / "counter");
    in >> n;
  }
  ++n;
  {
    auto tmp = state_dir_ / "counter.tmp";
    std::ofstream out(tmp, std::ios::trunc);
    out << n << '\n';
    out.close();
    fs::rename(tmp, state_dir_ / "counter");
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  char buf[32];
  std::snprintf(buf, sizeof buf, "f-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

std::string ForkBackend::submit(const SchedulerRequest& request) {
  std::error_code ec;
  if (!fs::is_regular_file(request.script_path, ec)) {
    throw Error(ErrorCode::submit_rejected, "script not found: " + request.script_path);
  }
  if (!fs::is_directory(request.work_dir, ec)) {
    throw Error(ErrorCode::submit_rejected, "work directory not found: " + request.work_dir);
  }
  const auto job_id = next_job_id();

  // Everything the forked children touch is prepared up front.
  const std::string done_path = (state_dir_ / (job_id + ".done")).string();
  const std::string done_tmp = done_path + ".tmp";
  const std::string log_path = request.script_path + ".out";
  const std::string script = request.script_path;
  const std::string work_dir = request.work_dir;

  pid_t leader = ::fork();
  if (leader < 0) throw Error(ErrorCode::submit_rejected, "fork failed");
  if (leader == 0) {
    ::setsid();
    ::close_range(3, ~0U, 0);
    pid_t monitor = ::fork();
    if (monitor != 0) _exit(monitor < 0 ? 1 : 0);
    // Monitor: runs the script, records its exit status.
    for (int sig : {SIGTERM, SIGINT, SIGHUP}) ::signal(sig, SIG_IGN);
    pid_t job = ::fork();
    if (job == 0) {
      for (int sig : {SIGTERM, SIGINT, SIGHUP}) ::signal(sig, SIG_DFL);
      int in = ::open("/dev/null", O_RDONLY);
      int out = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (in >= 0) ::dup2(in, 0);
      if (out >= 0) {
        ::dup2(out, 1);
        ::dup2(out, 2);
      }
      ::signal(SIGPIPE, SIG_DFL);
      if (::chdir(work_dir.c_str()) != 0) _exit(127);
      ::execl("/bin/bash", "bash", script.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    int status = 0;
    int code = 127;
    if (job > 0) {
      while (::waitpid(job, &status, 0) < 0 && errno == EINTR) {
      }
      code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    char digits[16];
    int len = 0;
    unsigned v = static_cast<unsigned>(code);
    do {
      digits[len++] = static_cast<char>('0' + v % 10);
      v /= 10;
    } while (v && len < 15);
    char line[20];
    for (int i = 0; i < len; ++i) line[i] = digits[len - 1 - i];
    line[len] = '\n';
    int fd = ::open(done_tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      write_all(fd, line, static_cast<std::size_t>(len + 1));
      ::close(fd);
      ::rename(done_tmp.c_str(), done_path.c_str());
    }
    _exit(0);
  }
  int status = 0;
  while (::waitpid(leader, &status, 0) < 0 && errno == EINTR) {
  }

  json record{{"pgid", leader},
              {"script", request.script_path},
              {"work_dir", request.work_dir},
              {"parameters", request.parameters}};
  auto tmp = state_dir_ / (job_id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << record.dump() << '\n';
  }
  fs::rename(tmp, state_dir_ / (job_id + ".json"));
  return job_id;
}

std::optional<pid_t> ForkBackend::process_group(const std::string& job_id) const {
  if (!valid_job_id(job_id)) return std::nullopt;
  auto record = read_json(state_dir_ / (job_id + ".json"));
  if (!record) return std::nullopt;
  return record->value("pgid", pid_t{0});
}

SchedulerJobStatus ForkBackend::status(const std::string& job_id) {
  SchedulerJobStatus s{job_id, SchedulerState::finished};
  auto pgid = process_group(job_id);
  if (!pgid) return s;
  if (fs::exists(state_dir_ / (job_id + ".done"))) return s;
  if (group_alive(*pgid)) s.state = SchedulerState::running;
  return s;
}

void ForkBackend::remove(const std::string& job_id) {
  auto pgid = process_group(job_id);
  if (!pgid) return;
  auto done = state_dir_ / (job_id + ".done");
  if (!fs::exists(done) && group_alive(*pgid)) {
    ::kill(-*pgid, SIGTERM);
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (group_alive(*pgid) && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (group_alive(*pgid)) ::kill(-*pgid, SIGKILL);
  }
  if (!fs::exists(done)) {
    std::ofstream out(done);
    out << "deleted\n";
  }
}

std::optional<std::string> ForkBackend::recover(const SchedulerRequest& request) {
  std::optional<std::string> found;
  for (const auto& entry : fs::directory_iterator(state_dir_)) {
    if (entry.path().extension() != ".json") continue;
    auto record = read_json(entry.path());
    if (!record || record->value("work_dir", std::string()) != request.work_dir) continue;
    auto id = entry.path().stem().string();
    if (!found || id > *found) found = id;
  }
  return found;
}

}  // namespace sweep
