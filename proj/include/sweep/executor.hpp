#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweep/catalog.hpp"
#include "sweep/scheduler.hpp"
#include "sweep/transport.hpp"

namespace sweep {

/// Command line for a Run. Arguments mode appends the parameter values in
/// definition position order and then the seed; json_file mode returns the
/// bare command. String values are shell-quoted.
std::string render_command(const Simulator& simulator, const ParameterSet& parameter_set,
                           const Run& run);

/// The `_input.json` document of a json_file-mode Run: every value plus "_seed".
json run_input_document(const ParameterSet& parameter_set, const Run& run);

/// Everything needed to run one job on a host, independent of whether it is
/// a Run or an Analysis.
struct JobPlan {
  JobKind kind = JobKind::run;
  std::string id;
  std::string command_line;
  std::string print_version_command;
  /// Written as `_input.json` when present.
  std::optional<json> input;
  /// (run id, local result directory) copied to `_input/<run id>/`.
  std::vector<std::pair<std::string, std::filesystem::path>> input_trees;
  /// Relative file-store directory receiving the results.
  std::string result_dir;
};

/// Host-side locations for one job under the host's work_base_dir.
struct WorkPaths {
  std::string work_dir;  // <base>/<id>
  std::string script;    // <base>/<id>.sh
  std::string archive;   // <base>/<id>.tar.gz

  static WorkPaths for_job(const Host& host, std::string_view id);
};

struct JobScript {
  std::string text;
  std::string archive_name;
};

/// Deterministic job script: runs the command in the work directory, then
/// writes _status.json {"exit_code": N, "finished_at": "<iso8601>"},
/// _time.txt (elapsed seconds) and _version.txt, and packs the work
/// directory into <id>.tar.gz beside it. Exits with the command's status.
JobScript generate_job_script(const JobPlan& plan, const Host& host);
JobScript generate_job_script(const Simulator& simulator, const ParameterSet& parameter_set,
                              const Run& run, const Host& host);

/// Writes `_input.json` (if the plan has one) and copies input trees into
/// an existing work directory.
void stage_input(Transport& transport, const JobPlan& plan, const std::string& work_dir);

/// Contents parsed from the reserved files of a collected work directory.
struct CollectedStatus {
  int exit_code = 0;
  std::optional<double> elapsed_seconds;
  std::string version;
};

/// Parses _status.json/_time.txt/_version.txt. Throws
/// Error(malformed_status_file) when _status.json is absent or invalid.
CollectedStatus read_reserved_files(const std::filesystem::path& dir);

enum class Outcome { done, skipped, error };

struct StepResult {
  Outcome outcome = Outcome::skipped;
  std::string message;
};

/// A claim on a job is considered abandoned once it expired or its owning
/// process on this machine is gone.
bool lease_is_stale(const Lease& lease, double now);

/// Drives the per-job sequence on one host: prepare the work directory,
/// stage inputs, upload the script, submit; later download, unpack, parse,
/// seal and record.
class Executor {
 public:
  Executor(Catalog& catalog, Host host, std::shared_ptr<Transport> transport,
           SchedulerBackend& backend, std::string owner);

  const Host& host() const { return host_; }
  const std::string& owner() const { return owner_; }

  JobPlan plan(const JobHandle& handle);

  /// created -> submitted. Losing a race, or a live foreign claim, is a
  /// no-op (skipped). Transport or submit failures leave the job created
  /// with a note and report `error`.
  StepResult dispatch(JobHandle& handle);

  /// submitted|running -> finished|failed; call once the scheduler reports
  /// the job finished.
  StepResult collect(JobHandle& handle);

  /// Removes the remote work directory of a sealed job.
  StepResult cleanup_remote(JobHandle& handle);

  /// Deletes the scheduler job of a cancelled job.
  StepResult delete_cancelled(JobHandle& handle);

  double lease_seconds = 600;

 private:
  Lease make_lease(std::string op) const;
  bool may_claim(const JobRecord& job, double now) const;
  bool claim(JobHandle& handle, const std::string& op);
  void release_with_note(JobHandle& handle, const std::string& note);
  StepResult fail_collect(JobHandle& handle, JobRecord record, const std::string& note);

  Catalog& catalog_;
  Host host_;
  std::shared_ptr<Transport> transport_;
  SchedulerBackend& backend_;
  std::string owner_;
};

}  // namespace sweep
