#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sweep/values.hpp"

namespace sweep {

enum class InputMode { arguments, json_file };
enum class AnalyzerScope { on_run, on_parameter_set };
enum class TransportKind { local, ssh };
enum class SchedulerTemplate { none, torque, slurm };

enum class JobStatus { created, submitted, running, finished, failed, cancelled };

inline constexpr JobStatus kAllStatuses[] = {JobStatus::created,  JobStatus::submitted,
                                             JobStatus::running,  JobStatus::finished,
                                             JobStatus::failed,   JobStatus::cancelled};

std::string_view to_string(InputMode mode);
std::string_view to_string(AnalyzerScope scope);
std::string_view to_string(TransportKind kind);
std::string_view to_string(SchedulerTemplate t);
std::string_view to_string(JobStatus status);
InputMode parse_input_mode(std::string_view text);
AnalyzerScope parse_scope(std::string_view text);
TransportKind parse_transport(std::string_view text);
SchedulerTemplate parse_scheduler_template(std::string_view text);
JobStatus parse_status(std::string_view text);

bool is_terminal(JobStatus status);

/// Files the job script writes into every work directory.
inline constexpr std::string_view kStatusFile = "_status.json";
inline constexpr std::string_view kTimeFile = "_time.txt";
inline constexpr std::string_view kVersionFile = "_version.txt";
inline constexpr std::string_view kInputFile = "_input.json";
inline constexpr std::string_view kOutputFile = "_output.json";
inline constexpr std::string_view kInputDir = "_input";

/// UTC, millisecond precision: 2026-01-02T03:04:05.678Z
std::string now_iso8601();
double now_epoch_seconds();

/// Exclusive ownership of a job while one worker dispatches or collects it.
struct Lease {
  std::string owner;
  std::string hostname;
  std::int64_t pid = 0;
  double expires_at = 0;
  std::string op;
};

/// Lifecycle and provenance shared by Runs and Analyses.
struct JobRecord {
  JobStatus status = JobStatus::created;
  std::string host_id;
  std::optional<std::string> job_id;
  std::optional<std::string> submitted_at;
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
  std::optional<double> elapsed_seconds;
  std::optional<int> exit_code;
  std::optional<std::string> simulator_version;
  std::optional<std::string> result_dir;
  std::optional<std::string> result_digest;
  std::vector<std::string> notes;
  std::optional<Lease> lease;
  bool remote_cleaned = false;
  bool scheduler_deleted = false;
};

enum class EventKind { submitted, started, succeeded, failed, cancelled };

inline constexpr EventKind kAllEvents[] = {EventKind::submitted, EventKind::started,
                                           EventKind::succeeded, EventKind::failed,
                                           EventKind::cancelled};

std::string_view to_string(EventKind kind);

struct Event {
  EventKind kind;
  std::string job_id;         // submitted
  std::optional<int> exit_code;  // succeeded / failed
  std::string note;           // failed: infrastructure error description

  static Event submitted(std::string id) { return {EventKind::submitted, std::move(id), {}, {}}; }
  static Event started() { return {EventKind::started, {}, {}, {}}; }
  static Event succeeded() { return {EventKind::succeeded, {}, 0, {}}; }
  static Event failed(std::optional<int> code, std::string note = {}) {
    return {EventKind::failed, {}, code, std::move(note)};
  }
  static Event cancelled() { return {EventKind::cancelled, {}, {}, {}}; }
};

bool is_legal(JobStatus from, EventKind event);

/// Applies `event` to a copy of `record`. Throws Error(illegal_transition)
/// when the edge is not in the lifecycle graph; `record` is never touched.
JobRecord transition(const JobRecord& record, const Event& event);

struct Simulator {
  std::string id;
  std::string name;
  std::string command;
  std::vector<ParameterDefinition> parameter_definitions;
  InputMode input_mode = InputMode::arguments;
  std::string description;
  std::string print_version_command;
  std::string created_at;
};

struct ParameterSet {
  std::string id;
  std::string simulator_id;
  ValueMap values;
  std::string canonical_key;
  std::string created_at;
};

struct Run {
  std::string id;
  std::string parameter_set_id;
  std::string simulator_id;
  std::int64_t seed = 0;
  std::string created_at;
  std::int64_t revision = 0;
  JobRecord job;
};

struct Analyzer {
  std::string id;
  std::string simulator_id;
  std::string name;
  std::string command;
  std::vector<ParameterDefinition> parameter_definitions;
  InputMode input_mode = InputMode::json_file;
  AnalyzerScope scope = AnalyzerScope::on_run;
  std::string description;
  std::string print_version_command;
  std::string created_at;
};

struct Analysis {
  std::string id;
  std::string analyzer_id;
  std::string simulator_id;
  AnalyzerScope scope = AnalyzerScope::on_run;
  std::string target_id;
  std::string parameter_set_id;
  ValueMap parameters;
  std::vector<std::string> input_run_ids;
  std::string created_at;
  std::int64_t revision = 0;
  JobRecord job;
};

struct Host {
  std::string id;
  std::string name;
  std::string address = "local";
  int port = 22;
  std::string user;
  TransportKind transport = TransportKind::local;
  std::string xsub_path = "sweep-xsub";
  std::string work_base_dir;
  int polling_interval_seconds = 5;
  int max_concurrent_jobs = 1;
  SchedulerTemplate scheduler_template = SchedulerTemplate::none;
  json scheduler_parameters = json::object();
  std::string created_at;
};

/// Throws Error(validation) on an invalid host description.
void validate(const Host& host);
void validate(const Simulator& simulator);
void validate(const Analyzer& analyzer);

/// Reserved file names mentioned by a command string; used to warn at
/// registration time.
std::vector<std::string> reserved_name_warnings(std::string_view command);

void to_json(json& j, const Lease& v);
void from_json(const json& j, Lease& v);
void to_json(json& j, const JobRecord& v);
void from_json(const json& j, JobRecord& v);
void to_json(json& j, const Simulator& v);
void from_json(const json& j, Simulator& v);
void to_json(json& j, const ParameterSet& v);
void from_json(const json& j, ParameterSet& v);
void to_json(json& j, const Run& v);
void from_json(const json& j, Run& v);
void to_json(json& j, const Analyzer& v);
void from_json(const json& j, Analyzer& v);
void to_json(json& j, const Analysis& v);
void from_json(const json& j, Analysis& v);
void to_json(json& j, const Host& v);
void from_json(const json& j, Host& v);

}  // namespace sweep
