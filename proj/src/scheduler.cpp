#include "sweep/scheduler.hpp"

#include <sstream>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string last_line(std::string_view out) {
  std::string last;
  std::istringstream in{std::string(out)};
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    if (!t.empty()) last = t;
  }
  return last;
}

std::string param_or(const json& params, const char* key, const std::string& fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string record_command(const std::string& submit_command, std::string_view work_dir) {
  auto record = shell_quote(WrapperBackend::submit_record_path(work_dir));
  auto tmp = shell_quote(WrapperBackend::submit_record_path(work_dir) + ".tmp");
  return submit_command + " > " + tmp + "; rc=$?; if [ $rc -eq 0 ]; then mv -f " + tmp + " " +
         record + " && cat " + record + "; else cat " + tmp + "; rm -f " + tmp + "; fi; exit $rc";
}

}  // namespace

std::string_view to_string(SchedulerState state) {
  switch (state) {
    case SchedulerState::queued: return "queued";
    case SchedulerState::running: return "running";
    case SchedulerState::finished: return "finished";
  }
  return "finished";
}

SchedulerState parse_scheduler_state(std::string_view text) {
  if (text == "queued") return SchedulerState::queued;
  if (text == "running") return SchedulerState::running;
  if (text == "finished") return SchedulerState::finished;
  throw Error(ErrorCode::backend_unreachable, "unknown scheduler state '" + std::string(text) + "'");
}

std::string format_submit_reply(std::string_view job_id) {
  return json{{"job_id", job_id}}.dump();
}

std::string format_status_reply(SchedulerState state) {
  return json{{"status", to_string(state)}}.dump();
}

std::string parse_submit_reply(std::string_view out) {
  auto line = last_line(out);
  try {
    auto j = json::parse(line);
    auto id = j.at("job_id").get<std::string>();
    if (id.empty()) throw std::runtime_error("empty job id");
    return id;
  } catch (const std::exception&) {
    throw Error(ErrorCode::submit_rejected, "malformed submit reply: '" + line + "'");
  }
}

SchedulerState parse_status_reply(std::string_view out) {
  auto line = last_line(out);
  try {
    return parse_scheduler_state(json::parse(line).at("status").get<std::string>());
  } catch (const std::exception&) {
    throw Error(ErrorCode::backend_unreachable, "malformed status reply: '" + line + "'");
  }
}

std::string scheduler_header(SchedulerTemplate dialect, const json& parameters,
                             std::string_view work_dir) {
  const auto procs = param_or(parameters, "mpi_procs", "1");
  const auto threads = param_or(parameters, "omp_threads", "1");
  std::string out;
  switch (dialect) {
    case SchedulerTemplate::none:
      break;
    case SchedulerTemplate::torque:
      out += "#PBS -l nodes=1:ppn=" + procs + "\n";
      if (parameters.contains("walltime")) {
        out += "#PBS -l walltime=" + param_or(parameters, "walltime", "") + "\n";
      }
      out += "#PBS -d " + std::string(work_dir) + "\n";
      out += "#PBS -V\n";
      out += "export OMP_NUM_THREADS=" + threads + "\n";
      break;
    case SchedulerTemplate::slurm:
      out += "#SBATCH --ntasks=" + procs + "\n";
      out += "#SBATCH --cpus-per-task=" + threads + "\n";
      if (parameters.contains("walltime")) {
        out += "#SBATCH --time=" + param_or(parameters, "walltime", "") + "\n";
      }
      out += "#SBATCH --chdir=" + std::string(work_dir) + "\n";
      out += "export OMP_NUM_THREADS=" + threads + "\n";
      break;
  }
  return out;
}

std::string WrapperBackend::submit_record_path(std::string_view work_dir) {
  std::string p(work_dir);
  while (p.size() > 1 && p.back() == '/') p.pop_back();
  return p + ".xsub.json";
}

std::string WrapperBackend::submit(const SchedulerRequest& request) {
  auto cmd = wrapper_ + " xsub " + shell_quote(request.script_path) + " --work-dir " +
             shell_quote(request.work_dir) + " --params-json " +
             shell_quote(request.parameters.dump());
  ProcessResult r;
  try {
    r = transport_->exec(record_command(cmd, request.work_dir));
  } catch (const Error& e) {
    throw Error(ErrorCode::submit_rejected, e.what());
  }
  if (!r.ok()) {
    throw Error(ErrorCode::submit_rejected,
                "xsub exited " + std::to_string(r.exit_code) + ": " + trim(r.err));
  }
  return parse_submit_reply(r.out);
}

SchedulerJobStatus WrapperBackend::status(const std::string& job_id) {
  ProcessResult r;
  try {
    r = transport_->exec(wrapper_ + " xstat " + shell_quote(job_id));
  } catch (const Error& e) {
    throw Error(ErrorCode::backend_unreachable, e.what());
  }
  if (!r.ok()) {
    throw Error(ErrorCode::backend_unreachable,
                "xstat exited " + std::to_string(r.exit_code) + ": " + trim(r.err));
  }
  return {job_id, parse_status_reply(r.out)};
}

void WrapperBackend::remove(const std::string& job_id) {
  ProcessResult r;
  try {
    r = transport_->exec(wrapper_ + " xdel " + shell_quote(job_id));
  } catch (const Error& e) {
    throw Error(ErrorCode::backend_unreachable, e.what());
  }
  if (!r.ok()) {
    throw Error(ErrorCode::backend_unreachable,
                "xdel exited " + std::to_string(r.exit_code) + ": " + trim(r.err));
  }
}

std::optional<std::string> WrapperBackend::recover(const SchedulerRequest& request) {
  auto content = transport_->read_file(submit_record_path(request.work_dir));
  if (!content) return std::nullopt;
  try {
    return parse_submit_reply(*content);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string BatchBackend::parse_submit_output(SchedulerTemplate dialect, std::string_view out) {
  auto line = last_line(out);
  if (dialect == SchedulerTemplate::slurm) {
    // sbatch --parsable prints "<id>" or "<id>;<cluster>".
    line = line.substr(0, line.find(';'));
  }
  if (line.empty() || line.find(' ') != std::string::npos) {
    throw Error(ErrorCode::submit_rejected, "unexpected submit output: '" + std::string(out) + "'");
  }
  return line;
}

SchedulerState BatchBackend::parse_status_output(SchedulerTemplate dialect, std::string_view out) {
  auto text = last_line(out);
  if (text.empty()) return SchedulerState::finished;
  if (dialect == SchedulerTemplate::torque) {
    auto eq = text.find('=');
    auto code = trim(eq == std::string::npos ? text : text.substr(eq + 1));
    if (code == "Q" || code == "W" || code == "H" || code == "T") return SchedulerState::queued;
    if (code == "R" || code == "E") return SchedulerState::running;
    return SchedulerState::finished;
  }
  if (text == "PENDING" || text == "CONFIGURING" || text == "REQUEUED") return SchedulerState::queued;
  if (text == "RUNNING" || text == "COMPLETING" || text == "SUSPENDED") return SchedulerState::running;
  return SchedulerState::finished;
}

std::string BatchBackend::submit(const SchedulerRequest& request) {
  std::string cmd = "cd " + shell_quote(request.work_dir) + " && ";
  cmd += dialect_ == SchedulerTemplate::slurm ? "sbatch --parsable " : "qsub ";
  cmd += shell_quote(request.script_path);
  // Reuse the wrapper's record file so recover() works the same way.
  auto wrapped = "( " + cmd + " ) | { read -r id && printf '{\"job_id\":\"%s\"}\\n' \"${id%%;*}\"; }";
  ProcessResult r;
  try {
    r = transport_->exec(record_command(wrapped, request.work_dir));
  } catch (const Error& e) {
    throw Error(ErrorCode::submit_rejected, e.what());
  }
  if (!r.ok()) throw Error(ErrorCode::submit_rejected, trim(r.err));
  return parse_submit_reply(r.out);
}

SchedulerJobStatus BatchBackend::status(const std::string& job_id) {
  std::string cmd = dialect_ == SchedulerTemplate::slurm
                        ? "squeue -h -j " + shell_quote(job_id) + " -o %T 2>/dev/null; true"
                        : "qstat -f " + shell_quote(job_id) + " 2>/dev/null | grep job_state; true";
  try {
    auto r = transport_->exec(cmd);
    return {job_id, parse_status_output(dialect_, r.out)};
  } catch (const Error& e) {
    throw Error(ErrorCode::backend_unreachable, e.what());
  }
}

void BatchBackend::remove(const std::string& job_id) {
  std::string cmd = (dialect_ == SchedulerTemplate::slurm ? "scancel " : "qdel ") +
                    shell_quote(job_id) + " 2>/dev/null; true";
  try {
    transport_->exec(cmd);
  } catch (const Error& e) {
    throw Error(ErrorCode::backend_unreachable, e.what());
  }
}

std::optional<std::string> BatchBackend::recover(const SchedulerRequest& request) {
  auto content = transport_->read_file(WrapperBackend::submit_record_path(request.work_dir));
  if (!content) return std::nullopt;
  try {
    return parse_submit_reply(*content);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace sweep
