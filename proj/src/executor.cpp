#include "sweep/executor.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sweep/analysis.hpp"
#include "sweep/errors.hpp"
#include "sweep/fault.hpp"
#include "sweep/process.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxNotes = 20;

std::string this_hostname() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "localhost";
  return buf;
}

/// Quotes a host path for bash while keeping a leading "~/" expandable.
std::string script_path(std::string_view path) {
  if (path.rfind("~/", 0) == 0) return "\"$HOME\"/" + shell_quote(path.substr(2));
  return shell_quote(path);
}

std::optional<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
    s.pop_back();
  }
  auto b = s.find_first_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b);
}

void add_note(JobRecord& record, const std::string& note) {
  record.notes.push_back(note);
  if (record.notes.size() > kMaxNotes) {
    record.notes.erase(record.notes.begin(),
                       record.notes.begin() + static_cast<std::ptrdiff_t>(record.notes.size() - kMaxNotes));
  }
}

}  // namespace

std::string render_command(const Simulator& simulator, const ParameterSet& parameter_set,
                           const Run& run) {
  std::string line = simulator.command;
  if (simulator.input_mode == InputMode::json_file) return line;
  for (const auto& def : by_position(simulator.parameter_definitions)) {
    auto it = parameter_set.values.find(def.name);
    if (it == parameter_set.values.end()) continue;
    line += ' ';
    line += shell_quote(render_value(it->second));
  }
  line += ' ';
  line += std::to_string(run.seed);
  return line;
}

json run_input_document(const ParameterSet& parameter_set, const Run& run) {
  json doc = values_to_json(parameter_set.values);
  doc["_seed"] = run.seed;
  return doc;
}

WorkPaths WorkPaths::for_job(const Host& host, std::string_view id) {
  WorkPaths p;
  p.work_dir = host_path(host.work_base_dir, id);
  p.script = p.work_dir + ".sh";
  p.archive = p.work_dir + ".tar.gz";
  return p;
}

JobScript generate_job_script(const JobPlan& plan, const Host& host) {
  const auto paths = WorkPaths::for_job(host, plan.id);
  const auto id = shell_quote(plan.id);
  std::string s = "#!/bin/bash\n";
  s += scheduler_header(host.scheduler_template, host.scheduler_parameters, paths.work_dir);
  s += "# sweepd " + std::string(to_string(plan.kind)) + " " + plan.id + "\n";
  s += "cd " + script_path(paths.work_dir) + " || exit 99\n";
  s += "_sweep_start=$(date +%s%N)\n";
  s += "( " + plan.command_line + " ) < /dev/null\n";
  s += "_sweep_rc=$?\n";
  s += "_sweep_end=$(date +%s%N)\n";
  s += "rm -rf _status.json _time.txt _version.txt\n";
  s += "_sweep_ns=$((_sweep_end - _sweep_start))\n";
  s += "printf '%d.%03d\\n' $((_sweep_ns / 1000000000)) $(((_sweep_ns / 1000000) % 1000)) > _time.txt\n";
  if (plan.print_version_command.empty()) {
    s += ": > _version.txt\n";
  } else {
    s += "( " + plan.print_version_command + " ) > _version.txt 2>/dev/null < /dev/null || true\n";
  }
  s += "printf '{\"exit_code\": %d, \"finished_at\": \"%s\"}\\n' \"$_sweep_rc\" "
       "\"$(date -u +%Y-%m-%dT%H:%M:%SZ)\" > _status.json\n";
  s += "cd " + script_path(host.work_base_dir) + " && tar -czf " + id + ".tar.gz.tmp " + id +
       " && mv -f " + id + ".tar.gz.tmp " + id + ".tar.gz\n";
  s += "exit $_sweep_rc\n";
  return {s, plan.id + ".tar.gz"};
}

JobScript generate_job_script(const Simulator& simulator, const ParameterSet& parameter_set,
                              const Run& run, const Host& host) {
  JobPlan plan;
  plan.kind = JobKind::run;
  plan.id = run.id;
  plan.command_line = render_command(simulator, parameter_set, run);
  plan.print_version_command = simulator.print_version_command;
  return generate_job_script(plan, host);
}

void stage_input(Transport& transport, const JobPlan& plan, const std::string& work_dir) {
  if (plan.input) {
    transport.write_file(host_path(work_dir, kInputFile), plan.input->dump() + "\n");
  }
  for (const auto& [run_id, local] : plan.input_trees) {
    transport.upload_tree(local, host_path(host_path(work_dir, kInputDir), run_id));
  }
}

CollectedStatus read_reserved_files(const fs::path& dir) {
  CollectedStatus out;
  auto status = slurp(dir / std::string(kStatusFile));
  if (!status) throw Error(ErrorCode::malformed_status_file, "_status.json is missing");
  try {
    auto j = json::parse(*status);
    if (!j.is_object() || !j.contains("exit_code") || !j.at("exit_code").is_number_integer()) {
      throw std::runtime_error("no integer exit_code");
    }
    out.exit_code = j.at("exit_code").get<int>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::malformed_status_file, std::string("_status.json: ") + e.what());
  }
  if (auto t = slurp(dir / std::string(kTimeFile))) {
    auto text = trim(*t);
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (!text.empty() && end && *end == '\0') out.elapsed_seconds = v;
  }
  if (auto v = slurp(dir / std::string(kVersionFile))) out.version = trim(*v);
  return out;
}

bool lease_is_stale(const Lease& lease, double now) {
  if (lease.expires_at < now) return true;
  if (lease.hostname == this_hostname() && lease.pid > 0 &&
      !process_alive(static_cast<pid_t>(lease.pid))) {
    return true;
  }
  return false;
}

Executor::Executor(Catalog& catalog, Host host, std::shared_ptr<Transport> transport,
                   SchedulerBackend& backend, std::string owner)
    : catalog_(catalog),
      host_(std::move(host)),
      transport_(std::move(transport)),
      backend_(backend),
      owner_(std::move(owner)) {}

JobPlan Executor::plan(const JobHandle& handle) {
  if (handle.kind == JobKind::analysis) return analysis_plan(catalog_, handle.doc.get<Analysis>());
  auto run = handle.doc.get<Run>();
  auto ps = catalog_.parameter_set(run.parameter_set_id);
  auto sim = catalog_.simulator(ps.simulator_id);
  JobPlan plan;
  plan.kind = JobKind::run;
  plan.id = run.id;
  plan.command_line = render_command(sim, ps, run);
  plan.print_version_command = sim.print_version_command;
  if (sim.input_mode == InputMode::json_file) plan.input = run_input_document(ps, run);
  plan.result_dir = FileStore::run_dir(run.simulator_id, run.parameter_set_id, run.id);
  return plan;
}

Lease Executor::make_lease(std::string op) const {
  Lease l;
  l.owner = owner_;
  l.hostname = this_hostname();
  l.pid = ::getpid();
  l.expires_at = now_epoch_seconds() + lease_seconds;
  l.op = std::move(op);
  return l;
}

bool Executor::may_claim(const JobRecord& job, double now) const {
  return !job.lease || job.lease->owner == owner_ || lease_is_stale(*job.lease, now);
}

bool Executor::claim(JobHandle& handle, const std::string& op) {
  auto next = handle.job;
  next.lease = make_lease(op);
  return catalog_.update_job(handle, next);
}

void Executor::release_with_note(JobHandle& handle, const std::string& note) {
  for (int attempt = 0; attempt < 5; ++attempt) {
    auto next = handle.job;
    next.lease.reset();
    add_note(next, note);
    if (catalog_.update_job(handle, next)) return;
    handle = catalog_.load_job(handle.kind, handle.id);
    if (!handle.job.lease || handle.job.lease->owner != owner_) return;
  }
}

StepResult Executor::dispatch(JobHandle& handle) {
  handle = catalog_.load_job(handle.kind, handle.id);
  if (handle.job.status != JobStatus::created) return {Outcome::skipped, {}};
  if (!may_claim(handle.job, now_epoch_seconds())) return {Outcome::skipped, {}};

  const auto paths = WorkPaths::for_job(host_, handle.id);
  const SchedulerRequest request{paths.script, host_.scheduler_parameters, paths.work_dir};

  // A previous dispatcher died mid-way; adopt its submission if it got that far.
  if (handle.job.lease && handle.job.lease->op == "dispatch") {
    std::optional<std::string> prior;
    try {
      prior = backend_.recover(request);
    } catch (const Error&) {
    }
    if (prior) {
      auto next = transition(handle.job, Event::submitted(*prior));
      next.lease.reset();
      if (!catalog_.update_job(handle, next)) return {Outcome::skipped, {}};
      return {Outcome::done, "adopted " + *prior};
    }
  }

  if (!claim(handle, "dispatch")) return {Outcome::skipped, {}};
  fault::crash_point("dispatch.after_claim");

  JobPlan job_plan;
  try {
    job_plan = plan(handle);
    transport_->remove_all(paths.work_dir);
    transport_->remove_all(paths.archive);
    transport_->remove_all(WrapperBackend::submit_record_path(paths.work_dir));
    transport_->make_dirs(paths.work_dir);
    stage_input(*transport_, job_plan, paths.work_dir);
    auto script = generate_job_script(job_plan, host_);
    transport_->write_file(paths.script, script.text, true);
  } catch (const std::exception& e) {
    release_with_note(handle, std::string("dispatch: ") + e.what());
    return {Outcome::error, e.what()};
  }
  fault::crash_point("dispatch.after_stage");

  std::string job_id;
  try {
    job_id = backend_.submit(request);
  } catch (const std::exception& e) {
    release_with_note(handle, std::string("submit: ") + e.what());
    return {Outcome::error, e.what()};
  }
  fault::crash_point("dispatch.after_submit");

  auto next = transition(handle.job, Event::submitted(job_id));
  next.lease.reset();
  if (handle.kind == JobKind::analysis) {
    json ids = json::array();
    for (const auto& [run_id, _] : job_plan.input_trees) ids.push_back(run_id);
    handle.doc["input_run_ids"] = ids;
  }
  if (!catalog_.update_job(handle, next)) {
    // Changed under us (cancelled); do not leave the submission behind.
    try {
      backend_.remove(job_id);
    } catch (const Error&) {
    }
    return {Outcome::skipped, "document changed during dispatch"};
  }
  fault::crash_point("dispatch.after_cas");
  return {Outcome::done, {}};
}

StepResult Executor::fail_collect(JobHandle& handle, JobRecord record, const std::string& note) {
  if (record.status == JobStatus::submitted) record = transition(record, Event::started());
  record = transition(record, Event::failed(std::nullopt, note));
  record.lease.reset();
  if (!catalog_.update_job(handle, record)) return {Outcome::skipped, {}};
  return {Outcome::done, note};
}

StepResult Executor::collect(JobHandle& handle) {
  handle = catalog_.load_job(handle.kind, handle.id);
  if (handle.job.status != JobStatus::submitted && handle.job.status != JobStatus::running) {
    return {Outcome::skipped, {}};
  }
  if (!may_claim(handle.job, now_epoch_seconds())) return {Outcome::skipped, {}};
  if (!claim(handle, "collect")) return {Outcome::skipped, {}};
  fault::crash_point("collect.after_claim");

  const auto paths = WorkPaths::for_job(host_, handle.id);
  const auto rel = catalog_.result_dir_for(handle);
  auto& files = catalog_.files();
  const auto staging = files.root() / ".staging" / handle.id;
  struct StagingGuard {
    fs::path dir;
    ~StagingGuard() {
      std::error_code ec;
      set_tree_writable(dir, true);
      fs::remove_all(dir, ec);
    }
  } guard{staging};
  set_tree_writable(staging, true);
  fs::remove_all(staging);
  fs::create_directories(staging / "unpack");
  const auto archive = staging / (handle.id + ".tar.gz");

  bool downloaded = false;
  try {
    downloaded = transport_->download(paths.archive, archive);
  } catch (const std::exception& e) {
    release_with_note(handle, std::string("collect: ") + e.what());
    return {Outcome::error, e.what()};
  }
  if (!downloaded) {
    return fail_collect(handle, handle.job, "archive_missing: " + paths.archive + " not found");
  }
  fault::crash_point("collect.after_download");

  auto untar = run_process({"tar", "-xzf", archive.string(), "-C", (staging / "unpack").string(),
                            "--no-same-owner"});
  const auto unpacked = staging / "unpack" / handle.id;
  if (!untar.ok() || !fs::is_directory(unpacked)) {
    return fail_collect(handle, handle.job, "corrupt_archive: " + trim(untar.err));
  }

  CollectedStatus status;
  std::string malformed;
  try {
    status = read_reserved_files(unpacked);
  } catch (const Error& e) {
    malformed = std::string("malformed_status_file: ") + e.what();
  }

  if (files.is_sealed(rel)) files.remove(rel);  // left by an interrupted attempt
  auto dir = files.reserve(rel);
  fs::remove(dir);
  fs::rename(unpacked, dir);
  fault::crash_point("collect.after_unpack");
  auto digest = files.seal(rel);
  fault::crash_point("collect.after_seal");

  auto record = handle.job;
  if (record.status == JobStatus::submitted) record = transition(record, Event::started());
  if (!malformed.empty()) {
    record = transition(record, Event::failed(std::nullopt, malformed));
  } else if (status.exit_code == 0) {
    record = transition(record, Event::succeeded());
  } else {
    record = transition(record, Event::failed(status.exit_code));
  }
  record.elapsed_seconds = status.elapsed_seconds;
  if (malformed.empty()) record.simulator_version = status.version;
  record.result_dir = rel;
  record.result_digest = digest;
  record.lease.reset();
  if (!catalog_.update_job(handle, record)) {
    files.remove(rel);
    return {Outcome::skipped, {}};
  }
  fault::crash_point("collect.after_cas");
  cleanup_remote(handle);
  return {Outcome::done, malformed};
}

StepResult Executor::cleanup_remote(JobHandle& handle) {
  if (!handle.job.result_digest || handle.job.remote_cleaned) return {Outcome::skipped, {}};
  const auto paths = WorkPaths::for_job(host_, handle.id);
  try {
    transport_->remove_all(paths.work_dir);
    transport_->remove_all(paths.archive);
    transport_->remove_all(paths.script);
    transport_->remove_all(paths.script + ".out");
    transport_->remove_all(WrapperBackend::submit_record_path(paths.work_dir));
  } catch (const std::exception& e) {
    return {Outcome::error, e.what()};
  }
  fault::crash_point("collect.after_cleanup");
  for (int attempt = 0; attempt < 5; ++attempt) {
    auto next = handle.job;
    next.remote_cleaned = true;
    if (catalog_.update_job(handle, next)) return {Outcome::done, {}};
    handle = catalog_.load_job(handle.kind, handle.id);
  }
  return {Outcome::skipped, {}};
}

StepResult Executor::delete_cancelled(JobHandle& handle) {
  if (handle.job.status != JobStatus::cancelled || !handle.job.job_id ||
      handle.job.scheduler_deleted) {
    return {Outcome::skipped, {}};
  }
  try {
    backend_.remove(*handle.job.job_id);
  } catch (const std::exception& e) {
    return {Outcome::error, e.what()};
  }
  auto next = handle.job;
  next.scheduler_deleted = true;
  if (!catalog_.update_job(handle, next)) return {Outcome::skipped, {}};
  return {Outcome::done, {}};
}

}  // namespace sweep
