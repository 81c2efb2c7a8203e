#include <algorithm>
#include <cstdio>
#include <limits>

#include "sweep/errors.hpp"
#include "sweep/process.hpp"
#include "sweep/scheduler.hpp"

namespace sweep {

namespace fs = std::filesystem;

SimulatedBackend::SimulatedBackend(int capacity, double default_duration, bool execute_scripts)
    : capacity_(std::max(1, capacity)),
      default_duration_(default_duration),
      execute_scripts_(execute_scripts) {}

std::string SimulatedBackend::submit(const SchedulerRequest& request) {
  std::error_code ec;
  if (!fs::is_regular_file(request.script_path, ec)) {
    throw Error(ErrorCode::submit_rejected, "script not found: " + request.script_path);
  }
  std::lock_guard lock(mutex_);
  Job job;
  char buf[32];
  std::snprintf(buf, sizeof buf, "s-%06llu", static_cast<unsigned long long>(++sequence_));
  job.id = buf;
  job.request = request;
  job.duration = default_duration_;
  if (request.parameters.contains("duration") && request.parameters["duration"].is_number()) {
    job.duration = request.parameters["duration"].get<double>();
  }
  jobs_.push_back(job);
  return job.id;
}

SchedulerJobStatus SimulatedBackend::status(const std::string& job_id) {
  if (auto step = [&] {
        std::lock_guard lock(mutex_);
        return auto_advance_;
      }();
      step > 0) {
    advance_time(step);
  }
  std::lock_guard lock(mutex_);
  for (const auto& job : jobs_) {
    if (job.id == job_id) return {job_id, job.state};
  }
  return {job_id, SchedulerState::finished};
}

void SimulatedBackend::remove(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(jobs_.begin(), jobs_.end(), [&](const Job& j) { return j.id == job_id; });
  if (it == jobs_.end()) return;
  if (it->state == SchedulerState::queued) {
    jobs_.erase(it);
  } else if (it->state == SchedulerState::running) {
    it->state = SchedulerState::finished;
  }
}

std::optional<std::string> SimulatedBackend::recover(const SchedulerRequest& request) {
  std::lock_guard lock(mutex_);
  for (auto it = jobs_.rbegin(); it != jobs_.rend(); ++it) {
    if (it->request.work_dir == request.work_dir) return it->id;
  }
  return std::nullopt;
}

void SimulatedBackend::schedule_locked() {
  auto running = std::count_if(jobs_.begin(), jobs_.end(),
                               [](const Job& j) { return j.state == SchedulerState::running; });
  for (auto& job : jobs_) {
    if (running >= capacity_) break;
    if (job.state != SchedulerState::queued) continue;
    job.state = SchedulerState::running;
    job.started_at = now_;
    ++running;
  }
}

void SimulatedBackend::finish_locked(Job& job) {
  job.state = SchedulerState::finished;
  if (!execute_scripts_) return;
  try {
    run_shell("exec /bin/bash " + shell_quote(job.request.script_path) + " > " +
                  shell_quote(job.request.script_path + ".out") + " 2>&1",
              ProcessOptions{job.request.work_dir, {}});
  } catch (const std::exception&) {
    // The job script's own outputs decide the outcome; a launch failure
    // shows up as a missing archive at collection.
  }
}

void SimulatedBackend::advance_time(double seconds) {
  std::lock_guard lock(mutex_);
  const double target = now_ + std::max(0.0, seconds);
  schedule_locked();
  for (;;) {
    Job* next = nullptr;
    double next_end = std::numeric_limits<double>::infinity();
    for (auto& job : jobs_) {
      if (job.state != SchedulerState::running) continue;
      double end = job.started_at + job.duration;
      if (end < next_end) {
        next_end = end;
        next = &job;
      }
    }
    if (!next || next_end > target) break;
    now_ = std::max(now_, next_end);
    finish_locked(*next);
    schedule_locked();
  }
  now_ = target;
}

double SimulatedBackend::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

void SimulatedBackend::set_auto_advance(double seconds) {
  std::lock_guard lock(mutex_);
  auto_advance_ = seconds;
}

std::size_t SimulatedBackend::submitted_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(sequence_);
}

}  // namespace sweep
