#include "sweep/worker.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "sweep/errors.hpp"
#include "sweep/fault.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

double monotonic_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string make_owner() {
  char host[256] = {};
  ::gethostname(host, sizeof host - 1);
  std::random_device rd;
  char buf[64];
  std::snprintf(buf, sizeof buf, ":%d:%08x", static_cast<int>(::getpid()), rd());
  return std::string(host) + buf;
}

/// Exclusive flock held for the dispatch step of one host, so concurrent
/// workers never overshoot its capacity.
class HostLock {
 public:
  explicit HostLock(const fs::path& path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::validation, "cannot open " + path.string());
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw Error(ErrorCode::validation, "cannot lock " + path.string());
      }
    }
  }
  ~HostLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  HostLock(const HostLock&) = delete;
  HostLock& operator=(const HostLock&) = delete;

 private:
  int fd_ = -1;
};

std::string describe(const JobHandle& h, std::string_view step, const std::string& message) {
  return std::string(step) + " " + std::string(to_string(h.kind)) + " " + h.id + ": " + message;
}

}  // namespace

void validate(const WorkerConfig& config) {
  if (!(config.poll_interval_seconds > 0)) {
    throw Error(ErrorCode::validation, "poll_interval_seconds must be positive");
  }
  if (config.max_dispatch_per_cycle < 1) {
    throw Error(ErrorCode::validation, "max_dispatch_per_cycle must be positive");
  }
  if (!(config.shutdown_grace_seconds > 0)) {
    throw Error(ErrorCode::validation, "shutdown_grace_seconds must be positive");
  }
}

WorkerConfig worker_config_from_json(const json& j) {
  WorkerConfig c;
  if (!j.is_object()) throw Error(ErrorCode::validation, "worker config must be an object");
  try {
    c.poll_interval_seconds = j.value("poll_interval_seconds", c.poll_interval_seconds);
    c.max_dispatch_per_cycle = j.value("max_dispatch_per_cycle", c.max_dispatch_per_cycle);
    c.shutdown_grace_seconds = j.value("shutdown_grace_seconds", c.shutdown_grace_seconds);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("worker config: ") + e.what());
  }
  validate(c);
  return c;
}

CycleReport& CycleReport::operator+=(const CycleReport& other) {
  dispatched += other.dispatched;
  polled += other.polled;
  collected += other.collected;
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  return *this;
}

json CycleReport::to_json() const {
  return {{"dispatched", dispatched},
          {"polled", polled},
          {"collected", collected},
          {"errors", errors}};
}

std::shared_ptr<SchedulerBackend> default_backend(const Host& host,
                                                  std::shared_ptr<Transport> transport) {
  if (host.scheduler_template == SchedulerTemplate::none) {
    return std::make_shared<WrapperBackend>(std::move(transport), host.xsub_path);
  }
  return std::make_shared<BatchBackend>(std::move(transport), host.scheduler_template);
}

std::shared_ptr<Transport> default_transport(const Host& host) {
  return std::shared_ptr<Transport>(make_transport(host));
}

Worker::Worker(Catalog& catalog, WorkerConfig config, BackendFactory backends,
               TransportFactory transports)
    : catalog_(catalog),
      config_(config),
      backends_(std::move(backends)),
      transports_(std::move(transports)),
      clock_(monotonic_seconds),
      owner_(make_owner()) {
  validate(config_);
}

Worker::Slot& Worker::slot_for(const Host& host) {
  json fingerprint = host;
  auto& slot = slots_[host.id];
  if (!slot || slot->fingerprint != fingerprint) {
    auto fresh = std::make_unique<Slot>();
    fresh->host = host;
    fresh->fingerprint = fingerprint;
    fresh->transport = transports_(host);
    fresh->backend = backends_(host, fresh->transport);
    fresh->executor =
        std::make_unique<Executor>(catalog_, host, fresh->transport, *fresh->backend, owner_);
    if (slot) fresh->next_due = slot->next_due;
    slot = std::move(fresh);
  }
  return *slot;
}

std::vector<JobHandle> Worker::host_jobs(const std::string& host_id,
                                         std::initializer_list<JobStatus> statuses) const {
  std::vector<JobHandle> out;
  for (auto kind : {JobKind::run, JobKind::analysis}) {
    for (auto status : statuses) {
      Query q;
      q.where("host_id", host_id).where("status", std::string(to_string(status)));
      for (auto& h : catalog_.jobs(kind, q)) out.push_back(std::move(h));
    }
  }
  return out;
}

CycleReport Worker::host_cycle(Slot& slot) {
  CycleReport report;
  auto& exec = *slot.executor;
  const auto& host = slot.host;
  const auto now = now_epoch_seconds();

  auto live_foreign = [&](const JobHandle& h) {
    return h.job.lease && h.job.lease->owner != owner_ && !lease_is_stale(*h.job.lease, now);
  };

  // 1. dispatch
  try {
    HostLock lock(catalog_.data_root() / "locks" / (host.id + ".lock"));
    auto inflight = host_jobs(host.id, {JobStatus::submitted, JobStatus::running}).size();
    auto created = host_jobs(host.id, {JobStatus::created});
    std::size_t free = host.max_concurrent_jobs > static_cast<int>(inflight)
                           ? static_cast<std::size_t>(host.max_concurrent_jobs) - inflight
                           : 0;
    std::size_t budget =
        std::min(free, static_cast<std::size_t>(config_.max_dispatch_per_cycle));
    for (auto& h : created) {
      if (budget == 0) break;
      if (live_foreign(h)) continue;
      try {
        auto r = exec.dispatch(h);
        if (r.outcome == Outcome::done) {
          ++report.dispatched;
          --budget;
        } else if (r.outcome == Outcome::error) {
          report.errors.push_back(describe(h, "dispatch", r.message));
        }
      } catch (const std::exception& e) {
        report.errors.push_back(describe(h, "dispatch", e.what()));
      }
    }
  } catch (const std::exception& e) {
    report.errors.push_back("dispatch on host " + host.name + ": " + e.what());
  }

  // 2. poll
  std::vector<JobHandle> finished;
  try {
    for (auto& h : host_jobs(host.id, {JobStatus::submitted, JobStatus::running})) {
      if (live_foreign(h) || !h.job.job_id) continue;
      try {
        auto st = slot.backend->status(*h.job.job_id);
        ++report.polled;
        fault::crash_point("poll.after_status");
        if (st.state != SchedulerState::queued && h.job.status == JobStatus::submitted) {
          catalog_.apply(h, Event::started());
          fault::crash_point("poll.after_started");
        }
        if (st.state == SchedulerState::finished) finished.push_back(h);
      } catch (const std::exception& e) {
        report.errors.push_back(describe(h, "poll", e.what()));
      }
    }
  } catch (const std::exception& e) {
    report.errors.push_back("poll on host " + host.name + ": " + e.what());
  }

  // 3. collect
  for (auto& h : finished) {
    try {
      auto r = exec.collect(h);
      if (r.outcome == Outcome::done) ++report.collected;
      if (!r.message.empty()) report.errors.push_back(describe(h, "collect", r.message));
    } catch (const std::exception& e) {
      report.errors.push_back(describe(h, "collect", e.what()));
    }
  }

  // 4. cleanup
  try {
    for (auto& h : host_jobs(host.id, {JobStatus::finished, JobStatus::failed,
                                       JobStatus::cancelled})) {
      try {
        if (h.job.status == JobStatus::cancelled) {
          auto r = exec.delete_cancelled(h);
          if (r.outcome == Outcome::error) report.errors.push_back(describe(h, "xdel", r.message));
        } else if (h.job.result_digest && !h.job.remote_cleaned && !live_foreign(h)) {
          auto r = exec.cleanup_remote(h);
          if (r.outcome == Outcome::error) {
            report.errors.push_back(describe(h, "cleanup", r.message));
          }
        }
      } catch (const std::exception& e) {
        report.errors.push_back(describe(h, "cleanup", e.what()));
      }
    }
  } catch (const std::exception& e) {
    report.errors.push_back("cleanup on host " + host.name + ": " + e.what());
  }
  return report;
}

CycleReport Worker::cycle() {
  CycleReport report;
  std::vector<Slot*> due;
  try {
    const double now = clock_();
    for (const auto& host : catalog_.hosts()) {
      try {
        auto& slot = slot_for(host);
        if (slot.next_due && now < *slot.next_due) continue;
        slot.next_due = now + host.polling_interval_seconds;
        due.push_back(&slot);
      } catch (const std::exception& e) {
        report.errors.push_back("host " + host.name + ": " + e.what());
      }
    }
  } catch (const std::exception& e) {
    report.errors.push_back(std::string("hosts: ") + e.what());
    return report;
  }

  std::vector<CycleReport> partial(due.size());
  std::vector<std::thread> threads;
  threads.reserve(due.size());
  for (std::size_t i = 0; i < due.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        partial[i] = host_cycle(*due[i]);
      } catch (const std::exception& e) {
        partial[i].errors.push_back("host " + due[i]->host.name + ": " + e.what());
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& p : partial) report += p;
  return report;
}

std::size_t Worker::repair() {
  std::set<std::string> referenced;
  std::set<std::string> held;
  const auto now = now_epoch_seconds();
  for (auto kind : {JobKind::run, JobKind::analysis}) {
    for (const auto& h : catalog_.jobs(kind)) {
      if (h.job.result_dir) referenced.insert(*h.job.result_dir);
      if (h.job.lease && !lease_is_stale(*h.job.lease, now)) held.insert(h.id);
    }
  }
  std::size_t removed = 0;
  auto& files = catalog_.files();
  for (const auto& rel : files.sealed_dirs()) {
    if (referenced.count(rel)) continue;
    if (held.count(fs::path(rel).filename().string())) continue;
    files.remove(rel);
    ++removed;
  }
  catalog_.documents().repair_indexes();
  const auto staging = files.root() / ".staging";
  std::error_code ec;
  if (fs::exists(staging, ec)) {
    for (const auto& entry : fs::directory_iterator(staging, ec)) {
      if (held.count(entry.path().filename().string())) continue;
      set_tree_writable(entry.path(), true);
      fs::remove_all(entry.path(), ec);
    }
  }
  return removed;
}

bool Worker::idle() const {
  for (auto kind : {JobKind::run, JobKind::analysis}) {
    for (auto status : {JobStatus::created, JobStatus::submitted, JobStatus::running}) {
      Query q;
      q.where("status", std::string(to_string(status)));
      q.limit = 1;
      if (catalog_.documents().count(collection_of(kind), q) > 0) return false;
    }
  }
  return true;
}

long run_loop(Worker& worker, const LoopOptions& options, const std::atomic<bool>& stop,
              const std::function<void(const CycleReport&)>& on_cycle) {
  std::mutex m;
  std::condition_variable cv;
  bool finished = false;
  const double grace = worker.config().shutdown_grace_seconds;

  std::thread watchdog([&] {
    std::unique_lock lock(m);
    while (!finished && !stop.load()) cv.wait_for(lock, std::chrono::milliseconds(50));
    if (finished) return;
    if (!cv.wait_for(lock, std::chrono::duration<double>(grace), [&] { return finished; })) {
      std::fprintf(stderr, "{\"event\":\"shutdown_timeout\",\"grace_seconds\":%g}\n", grace);
      std::_Exit(1);
    }
  });

  long cycles = 0;
  while (!stop.load()) {
    auto report = worker.cycle();
    ++cycles;
    if (on_cycle) on_cycle(report);
    if (options.max_cycles && cycles >= *options.max_cycles) break;
    if (options.until_idle && worker.idle()) break;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration<double>(worker.config().poll_interval_seconds);
    while (!stop.load() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  {
    std::lock_guard lock(m);
    finished = true;
  }
  cv.notify_all();
  watchdog.join();
  return cycles;
}

}  // namespace sweep
