#include "sweep/model.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::pair<std::string_view, Enum> (&table)[N],
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw Error(ErrorCode::validation, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::pair<std::string_view, InputMode> kInputModes[] = {
    {"arguments", InputMode::arguments}, {"json_file", InputMode::json_file}};
constexpr std::pair<std::string_view, AnalyzerScope> kScopes[] = {
    {"on_run", AnalyzerScope::on_run}, {"on_parameter_set", AnalyzerScope::on_parameter_set}};
constexpr std::pair<std::string_view, TransportKind> kTransports[] = {
    {"local", TransportKind::local}, {"ssh", TransportKind::ssh}};
constexpr std::pair<std::string_view, SchedulerTemplate> kTemplates[] = {
    {"none", SchedulerTemplate::none},
    {"torque", SchedulerTemplate::torque},
    {"slurm", SchedulerTemplate::slurm}};
constexpr std::pair<std::string_view, JobStatus> kStatuses[] = {
    {"created", JobStatus::created},     {"submitted", JobStatus::submitted},
    {"running", JobStatus::running},     {"finished", JobStatus::finished},
    {"failed", JobStatus::failed},       {"cancelled", JobStatus::cancelled}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (j.contains(key) && !j.at(key).is_null()) {
    v = j.at(key).get<T>();
  } else {
    v.reset();
  }
}

ValueMap infer_values(const json& j) {
  ValueMap out;
  for (const auto& [name, v] : j.items()) {
    if (v.is_boolean()) {
      out.emplace(name, v.get<bool>());
    } else if (v.is_number_float()) {
      out.emplace(name, v.get<double>());
    } else if (v.is_number_integer()) {
      out.emplace(name, v.get<std::int64_t>());
    } else if (v.is_string()) {
      out.emplace(name, v.get<std::string>());
    } else {
      throw Error(ErrorCode::type_mismatch, "non-scalar stored value for '" + name + "'");
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(InputMode mode) { return name_of(mode, kInputModes); }
std::string_view to_string(AnalyzerScope scope) { return name_of(scope, kScopes); }
std::string_view to_string(TransportKind kind) { return name_of(kind, kTransports); }
std::string_view to_string(SchedulerTemplate t) { return name_of(t, kTemplates); }
std::string_view to_string(JobStatus status) { return name_of(status, kStatuses); }

InputMode parse_input_mode(std::string_view text) { return parse_enum(text, kInputModes, "input mode"); }
AnalyzerScope parse_scope(std::string_view text) { return parse_enum(text, kScopes, "analyzer scope"); }
TransportKind parse_transport(std::string_view text) { return parse_enum(text, kTransports, "transport"); }
SchedulerTemplate parse_scheduler_template(std::string_view text) {
  return parse_enum(text, kTemplates, "scheduler template");
}
JobStatus parse_status(std::string_view text) { return parse_enum(text, kStatuses, "status"); }

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::submitted: return "submitted";
    case EventKind::started: return "started";
    case EventKind::succeeded: return "succeeded";
    case EventKind::failed: return "failed";
    case EventKind::cancelled: return "cancelled";
  }
  return "?";
}

bool is_terminal(JobStatus status) {
  return status == JobStatus::finished || status == JobStatus::failed ||
         status == JobStatus::cancelled;
}

std::string now_iso8601() {
  using namespace std::chrono;
  auto now = system_clock::now();
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

double now_epoch_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

bool is_legal(JobStatus from, EventKind event) {
  switch (from) {
    case JobStatus::created:
      return event == EventKind::submitted || event == EventKind::cancelled;
    case JobStatus::submitted:
      return event == EventKind::started || event == EventKind::cancelled;
    case JobStatus::running:
      return event == EventKind::succeeded || event == EventKind::failed;
    case JobStatus::finished:
    case JobStatus::failed:
    case JobStatus::cancelled:
      return false;
  }
  return false;
}

JobRecord transition(const JobRecord& record, const Event& event) {
  if (!is_legal(record.status, event.kind)) {
    throw Error(ErrorCode::illegal_transition,
                "cannot apply '" + std::string(to_string(event.kind)) + "' to a job in status '" +
                    std::string(to_string(record.status)) + "'");
  }
  JobRecord next = record;
  const auto now = now_iso8601();
  switch (event.kind) {
    case EventKind::submitted:
      if (event.job_id.empty()) {
        throw Error(ErrorCode::illegal_transition, "submitted event requires a job id");
      }
      next.status = JobStatus::submitted;
      next.job_id = event.job_id;
      next.submitted_at = now;
      break;
    case EventKind::started:
      next.status = JobStatus::running;
      next.started_at = now;
      break;
    case EventKind::succeeded:
      next.status = JobStatus::finished;
      next.exit_code = 0;
      next.finished_at = now;
      break;
    case EventKind::failed:
      if (event.exit_code && *event.exit_code == 0) {
        throw Error(ErrorCode::illegal_transition, "failed event cannot carry exit code 0");
      }
      next.status = JobStatus::failed;
      next.exit_code = event.exit_code;
      next.finished_at = now;
      if (!event.note.empty()) next.notes.push_back(event.note);
      break;
    case EventKind::cancelled:
      next.status = JobStatus::cancelled;
      next.finished_at = now;
      break;
  }
  return next;
}

void validate(const Host& host) {
  if (host.name.empty()) throw Error(ErrorCode::validation, "host name is required");
  if (host.max_concurrent_jobs < 1) {
    throw Error(ErrorCode::validation, "max_concurrent_jobs must be >= 1");
  }
  if (host.polling_interval_seconds < 1) {
    throw Error(ErrorCode::validation, "polling_interval_seconds must be >= 1");
  }
  if (host.work_base_dir.empty()) throw Error(ErrorCode::validation, "work_base_dir is required");
  if (host.xsub_path.empty()) throw Error(ErrorCode::validation, "xsub_path is required");
  if (host.port < 1 || host.port > 65535) throw Error(ErrorCode::validation, "invalid port");
  if (!host.scheduler_parameters.is_object()) {
    throw Error(ErrorCode::validation, "scheduler_parameters must be an object");
  }
}

void validate(const Simulator& simulator) {
  if (simulator.name.empty()) throw Error(ErrorCode::validation, "simulator name is required");
  if (simulator.command.empty()) throw Error(ErrorCode::validation, "command must be non-empty");
  validate_definitions(simulator.parameter_definitions);
}

void validate(const Analyzer& analyzer) {
  if (analyzer.name.empty()) throw Error(ErrorCode::validation, "analyzer name is required");
  if (analyzer.command.empty()) throw Error(ErrorCode::validation, "command must be non-empty");
  if (analyzer.simulator_id.empty()) throw Error(ErrorCode::validation, "simulator_id is required");
  validate_definitions(analyzer.parameter_definitions);
}

std::vector<std::string> reserved_name_warnings(std::string_view command) {
  std::vector<std::string> out;
  for (auto name : {kStatusFile, kTimeFile, kVersionFile}) {
    if (command.find(name) != std::string_view::npos) {
      out.push_back("command references '" + std::string(name) +
                    "', which the job script overwrites after the command exits");
    }
  }
  return out;
}

void to_json(json& j, const Lease& v) {
  j = json{{"owner", v.owner},
           {"hostname", v.hostname},
           {"pid", v.pid},
           {"expires_at", v.expires_at},
           {"op", v.op}};
}

void from_json(const json& j, Lease& v) {
  v.owner = j.at("owner").get<std::string>();
  v.hostname = j.value("hostname", std::string());
  v.pid = j.value("pid", std::int64_t{0});
  v.expires_at = j.value("expires_at", 0.0);
  v.op = j.value("op", std::string());
}

void to_json(json& j, const JobRecord& v) {
  if (!j.is_object()) j = json::object();
  j["status"] = to_string(v.status);
  j["host_id"] = v.host_id;
  put_optional(j, "job_id", v.job_id);
  put_optional(j, "submitted_at", v.submitted_at);
  put_optional(j, "started_at", v.started_at);
  put_optional(j, "finished_at", v.finished_at);
  put_optional(j, "elapsed_seconds", v.elapsed_seconds);
  put_optional(j, "exit_code", v.exit_code);
  put_optional(j, "simulator_version", v.simulator_version);
  put_optional(j, "result_dir", v.result_dir);
  put_optional(j, "result_digest", v.result_digest);
  j["notes"] = v.notes;
  j["lease"] = v.lease ? json(*v.lease) : json(nullptr);
  j["remote_cleaned"] = v.remote_cleaned;
  j["scheduler_deleted"] = v.scheduler_deleted;
}

void from_json(const json& j, JobRecord& v) {
  v.status = parse_status(j.at("status").get<std::string>());
  v.host_id = j.value("host_id", std::string());
  get_optional(j, "job_id", v.job_id);
  get_optional(j, "submitted_at", v.submitted_at);
  get_optional(j, "started_at", v.started_at);
  get_optional(j, "finished_at", v.finished_at);
  get_optional(j, "elapsed_seconds", v.elapsed_seconds);
  get_optional(j, "exit_code", v.exit_code);
  get_optional(j, "simulator_version", v.simulator_version);
  get_optional(j, "result_dir", v.result_dir);
  get_optional(j, "result_digest", v.result_digest);
  v.notes = j.value("notes", std::vector<std::string>{});
  get_optional(j, "lease", v.lease);
  v.remote_cleaned = j.value("remote_cleaned", false);
  v.scheduler_deleted = j.value("scheduler_deleted", false);
}

void to_json(json& j, const Simulator& v) {
  j = json{{"id", v.id},
           {"name", v.name},
           {"command", v.command},
           {"parameter_definitions", v.parameter_definitions},
           {"input_mode", to_string(v.input_mode)},
           {"description", v.description},
           {"print_version_command", v.print_version_command},
           {"created_at", v.created_at}};
}

void from_json(const json& j, Simulator& v) {
  v.id = j.value("id", std::string());
  v.name = j.at("name").get<std::string>();
  v.command = j.at("command").get<std::string>();
  v.parameter_definitions =
      j.value("parameter_definitions", std::vector<ParameterDefinition>{});
  v.input_mode = parse_input_mode(j.value("input_mode", std::string("arguments")));
  v.description = j.value("description", std::string());
  v.print_version_command = j.value("print_version_command", std::string());
  v.created_at = j.value("created_at", std::string());
}

void to_json(json& j, const ParameterSet& v) {
  j = json{{"id", v.id},
           {"simulator_id", v.simulator_id},
           {"values", values_to_json(v.values)},
           {"canonical_key", v.canonical_key},
           {"created_at", v.created_at}};
}

void from_json(const json& j, ParameterSet& v) {
  v.id = j.value("id", std::string());
  v.simulator_id = j.at("simulator_id").get<std::string>();
  v.values = infer_values(j.at("values"));
  v.canonical_key = j.value("canonical_key", std::string());
  v.created_at = j.value("created_at", std::string());
}

void to_json(json& j, const Run& v) {
  j = json{{"id", v.id},
           {"parameter_set_id", v.parameter_set_id},
           {"simulator_id", v.simulator_id},
           {"seed", v.seed},
           {"created_at", v.created_at},
           {"_rev", v.revision}};
  to_json(j, v.job);
}

void from_json(const json& j, Run& v) {
  v.id = j.value("id", std::string());
  v.parameter_set_id = j.at("parameter_set_id").get<std::string>();
  v.simulator_id = j.value("simulator_id", std::string());
  v.seed = j.at("seed").get<std::int64_t>();
  v.created_at = j.value("created_at", std::string());
  v.revision = j.value("_rev", std::int64_t{0});
  from_json(j, v.job);
}

void to_json(json& j, const Analyzer& v) {
  j = json{{"id", v.id},
           {"simulator_id", v.simulator_id},
           {"name", v.name},
           {"command", v.command},
           {"parameter_definitions", v.parameter_definitions},
           {"input_mode", to_string(v.input_mode)},
           {"scope", to_string(v.scope)},
           {"description", v.description},
           {"print_version_command", v.print_version_command},
           {"created_at", v.created_at}};
}

void from_json(const json& j, Analyzer& v) {
  v.id = j.value("id", std::string());
  v.simulator_id = j.at("simulator_id").get<std::string>();
  v.name = j.at("name").get<std::string>();
  v.command = j.at("command").get<std::string>();
  v.parameter_definitions =
      j.value("parameter_definitions", std::vector<ParameterDefinition>{});
  v.input_mode = parse_input_mode(j.value("input_mode", std::string("json_file")));
  v.scope = parse_scope(j.value("scope", std::string("on_run")));
  v.description = j.value("description", std::string());
  v.print_version_command = j.value("print_version_command", std::string());
  v.created_at = j.value("created_at", std::string());
}

void to_json(json& j, const Analysis& v) {
  j = json{{"id", v.id},
           {"analyzer_id", v.analyzer_id},
           {"simulator_id", v.simulator_id},
           {"scope", to_string(v.scope)},
           {"target_id", v.target_id},
           {"parameter_set_id", v.parameter_set_id},
           {"parameters", values_to_json(v.parameters)},
           {"input_run_ids", v.input_run_ids},
           {"created_at", v.created_at},
           {"_rev", v.revision}};
  to_json(j, v.job);
}

void from_json(const json& j, Analysis& v) {
  v.id = j.value("id", std::string());
  v.analyzer_id = j.at("analyzer_id").get<std::string>();
  v.simulator_id = j.value("simulator_id", std::string());
  v.scope = parse_scope(j.at("scope").get<std::string>());
  v.target_id = j.at("target_id").get<std::string>();
  v.parameter_set_id = j.value("parameter_set_id", std::string());
  v.parameters = infer_values(j.value("parameters", json::object()));
  v.input_run_ids = j.value("input_run_ids", std::vector<std::string>{});
  v.created_at = j.value("created_at", std::string());
  v.revision = j.value("_rev", std::int64_t{0});
  from_json(j, v.job);
}

void to_json(json& j, const Host& v) {
  j = json{{"id", v.id},
           {"name", v.name},
           {"address", v.address},
           {"port", v.port},
           {"user", v.user},
           {"transport", to_string(v.transport)},
           {"xsub_path", v.xsub_path},
           {"work_base_dir", v.work_base_dir},
           {"polling_interval_seconds", v.polling_interval_seconds},
           {"max_concurrent_jobs", v.max_concurrent_jobs},
           {"scheduler_template", to_string(v.scheduler_template)},
           {"scheduler_parameters", v.scheduler_parameters},
           {"created_at", v.created_at}};
}

void from_json(const json& j, Host& v) {
  Host defaults;
  v.id = j.value("id", std::string());
  v.name = j.at("name").get<std::string>();
  v.address = j.value("address", defaults.address);
  v.port = j.value("port", defaults.port);
  v.user = j.value("user", std::string());
  v.transport = parse_transport(j.value("transport", std::string("local")));
  v.xsub_path = j.value("xsub_path", defaults.xsub_path);
  v.work_base_dir = j.value("work_base_dir", std::string());
  v.polling_interval_seconds = j.value("polling_interval_seconds", defaults.polling_interval_seconds);
  v.max_concurrent_jobs = j.value("max_concurrent_jobs", defaults.max_concurrent_jobs);
  v.scheduler_template = parse_scheduler_template(j.value("scheduler_template", std::string("none")));
  v.scheduler_parameters = j.value("scheduler_parameters", json::object());
  v.created_at = j.value("created_at", std::string());
}

}  // namespace sweep
