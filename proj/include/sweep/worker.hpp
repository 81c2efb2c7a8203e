#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sweep/catalog.hpp"
#include "sweep/executor.hpp"
#include "sweep/scheduler.hpp"
#include "sweep/transport.hpp"

namespace sweep {

struct WorkerConfig {
  double poll_interval_seconds = 5;
  int max_dispatch_per_cycle = 16;
  double shutdown_grace_seconds = 30;
};

/// Throws Error(validation) unless every field is positive.
void validate(const WorkerConfig& config);
/// Reads the optional keys "poll_interval_seconds", "max_dispatch_per_cycle"
/// and "shutdown_grace_seconds".
WorkerConfig worker_config_from_json(const json& j);

struct CycleReport {
  int dispatched = 0;
  int polled = 0;
  int collected = 0;
  std::vector<std::string> errors;

  CycleReport& operator+=(const CycleReport& other);
  json to_json() const;
};

using TransportFactory = std::function<std::shared_ptr<Transport>(const Host&)>;
using BackendFactory =
    std::function<std::shared_ptr<SchedulerBackend>(const Host&, std::shared_ptr<Transport>)>;

/// Wrapper protocol for hosts without a scheduler template, batch
/// directives otherwise.
std::shared_ptr<SchedulerBackend> default_backend(const Host& host,
                                                  std::shared_ptr<Transport> transport);
std::shared_ptr<Transport> default_transport(const Host& host);

/// The daemon that moves jobs through their lifecycle. Each cycle visits
/// every host whose polling interval has elapsed, in parallel, and per host:
///   1. dispatches created jobs up to the free capacity,
///   2. polls submitted/running jobs, applying "started",
///   3. collects the jobs the scheduler reports finished,
///   4. removes remote leftovers and scheduler entries of cancelled jobs.
class Worker {
 public:
  explicit Worker(Catalog& catalog, WorkerConfig config = {},
                  BackendFactory backends = default_backend,
                  TransportFactory transports = default_transport);

  /// Monotonic seconds by default; simulated runs pass the backend clock.
  void set_clock(std::function<double()> clock) { clock_ = std::move(clock); }
  const std::string& owner() const { return owner_; }
  const WorkerConfig& config() const { return config_; }

  CycleReport cycle();

  /// Startup reconciliation: drops sealed directories no document
  /// references, stale index entries and staging leftovers. Returns the
  /// number of directories removed.
  std::size_t repair();

  /// True when no job is created, submitted or running.
  bool idle() const;

 private:
  struct Slot {
    Host host;
    json fingerprint;
    std::shared_ptr<Transport> transport;
    std::shared_ptr<SchedulerBackend> backend;
    std::unique_ptr<Executor> executor;
    std::optional<double> next_due;
  };

  Slot& slot_for(const Host& host);
  CycleReport host_cycle(Slot& slot);
  std::vector<JobHandle> host_jobs(const std::string& host_id,
                                   std::initializer_list<JobStatus> statuses) const;

  Catalog& catalog_;
  WorkerConfig config_;
  BackendFactory backends_;
  TransportFactory transports_;
  std::function<double()> clock_;
  std::string owner_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

struct LoopOptions {
  std::optional<long> max_cycles;
  bool until_idle = false;
};

/// Runs cycles poll_interval_seconds apart until `stop` is set (or the
/// options end the loop). Once stop is requested the current cycle may run
/// for shutdown_grace_seconds before the process exits hard. Returns the
/// number of cycles run.
long run_loop(Worker& worker, const LoopOptions& options, const std::atomic<bool>& stop,
              const std::function<void(const CycleReport&)>& on_cycle = {});

}  // namespace sweep
