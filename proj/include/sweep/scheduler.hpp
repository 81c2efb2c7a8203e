#pragma once

#include <sys/types.h>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sweep/model.hpp"
#include "sweep/transport.hpp"

namespace sweep {

enum class SchedulerState { queued, running, finished };

std::string_view to_string(SchedulerState state);
SchedulerState parse_scheduler_state(std::string_view text);

struct SchedulerRequest {
  std::string script_path;
  /// Backend-specific knobs such as mpi_procs, omp_threads, walltime.
  json parameters = json::object();
  std::string work_dir;
};

struct SchedulerJobStatus {
  std::string job_id;
  SchedulerState state = SchedulerState::finished;
};

/// Uniform submit/status/delete surface over job schedulers. Every
/// implementation maps its dialect onto queued/running/finished and reports
/// job ids it does not know as finished.
class SchedulerBackend {
 public:
  virtual ~SchedulerBackend() = default;

  /// Throws Error(submit_rejected).
  virtual std::string submit(const SchedulerRequest& request) = 0;
  /// Throws Error(backend_unreachable).
  virtual SchedulerJobStatus status(const std::string& job_id) = 0;
  /// Idempotent. Queued jobs are dropped, running jobs are signalled.
  virtual void remove(const std::string& job_id) = 0;
  /// Job id of an earlier submit() for this work directory, if one completed.
  virtual std::optional<std::string> recover(const SchedulerRequest& request) = 0;
};

// Wire format of the host-side wrapper (one JSON object per line).
std::string format_submit_reply(std::string_view job_id);
std::string format_status_reply(SchedulerState state);
/// Last non-empty line of `out` as {"job_id": "..."}; throws Error(submit_rejected).
std::string parse_submit_reply(std::string_view out);
/// Throws Error(backend_unreachable).
SchedulerState parse_status_reply(std::string_view out);

/// Directive lines placed after the shebang of a job script.
std::string scheduler_header(SchedulerTemplate dialect, const json& parameters,
                             std::string_view work_dir);

/// Talks to the wrapper executable installed on a host:
///   <wrapper> xsub <script> --work-dir D --params-json J  -> {"job_id":"..."}
///   <wrapper> xstat <job_id>                              -> {"status":"queued|running|finished"}
///   <wrapper> xdel <job_id>                               -> exit 0
/// The submit reply is also persisted next to the work directory as
/// "<work_dir>.xsub.json" so an interrupted dispatcher can recover it.
class WrapperBackend : public SchedulerBackend {
 public:
  WrapperBackend(std::shared_ptr<Transport> transport, std::string wrapper_command)
      : transport_(std::move(transport)), wrapper_(std::move(wrapper_command)) {}

  std::string submit(const SchedulerRequest& request) override;
  SchedulerJobStatus status(const std::string& job_id) override;
  void remove(const std::string& job_id) override;
  std::optional<std::string> recover(const SchedulerRequest& request) override;

  static std::string submit_record_path(std::string_view work_dir);

 private:
  std::shared_ptr<Transport> transport_;
  std::string wrapper_;
};

/// Runs each job as a detached local process group. State lives in a
/// directory so separate wrapper invocations share one job table:
///   <state>/counter          last issued sequence number
///   <state>/<job>.json       {pid, script, work_dir}
///   <state>/<job>.done       exit status once the job ended
/// Job ids are "f-000001", "f-000002", ... per state directory.
class ForkBackend : public SchedulerBackend {
 public:
  explicit ForkBackend(std::filesystem::path state_dir);

  std::string submit(const SchedulerRequest& request) override;
  SchedulerJobStatus status(const std::string& job_id) override;
  void remove(const std::string& job_id) override;
  std::optional<std::string> recover(const SchedulerRequest& request) override;

  /// Process group of a live job, if any.
  std::optional<pid_t> process_group(const std::string& job_id) const;

 private:
  std::string next_job_id();
  std::filesystem::path state_dir_;
};

/// Deterministic in-process scheduler with a virtual clock. A job occupies
/// one of `capacity` slots for its duration (request parameter "duration",
/// else the default); the script is executed when the job completes, so
/// its outputs exist by the time the job reports finished.
class SimulatedBackend : public SchedulerBackend {
 public:
  explicit SimulatedBackend(int capacity = 1, double default_duration = 1.0,
                            bool execute_scripts = true);

  std::string submit(const SchedulerRequest& request) override;
  SchedulerJobStatus status(const std::string& job_id) override;
  void remove(const std::string& job_id) override;
  std::optional<std::string> recover(const SchedulerRequest& request) override;

  void advance_time(double seconds);
  double now() const;
  /// When set, every status() call first advances the clock by this much.
  void set_auto_advance(double seconds);
  std::size_t submitted_count() const;

 private:
  struct Job {
    std::string id;
    SchedulerRequest request;
    double duration = 0;
    SchedulerState state = SchedulerState::queued;
    double started_at = 0;
  };

  void schedule_locked();
  void finish_locked(Job& job);

  mutable std::mutex mutex_;
  int capacity_;
  double default_duration_;
  bool execute_scripts_;
  double now_ = 0;
  double auto_advance_ = 0;
  std::uint64_t sequence_ = 0;
  std::vector<Job> jobs_;
};

/// Torque (qsub/qstat/qdel) or Slurm (sbatch/squeue/scancel) driven over a
/// transport. The job script carries the directives from scheduler_header.
class BatchBackend : public SchedulerBackend {
 public:
  BatchBackend(std::shared_ptr<Transport> transport, SchedulerTemplate dialect)
      : transport_(std::move(transport)), dialect_(dialect) {}

  std::string submit(const SchedulerRequest& request) override;
  SchedulerJobStatus status(const std::string& job_id) override;
  void remove(const std::string& job_id) override;
  std::optional<std::string> recover(const SchedulerRequest& request) override;

  static std::string parse_submit_output(SchedulerTemplate dialect, std::string_view out);
  /// Maps `qstat -f`/`squeue -o %T` output; empty output means finished.
  static SchedulerState parse_status_output(SchedulerTemplate dialect, std::string_view out);

 private:
  std::shared_ptr<Transport> transport_;
  SchedulerTemplate dialect_;
};

}  // namespace sweep
