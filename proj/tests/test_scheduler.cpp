#include <doctest.h>

#include <signal.h>

#include <random>

#include "support.hpp"
#include "sweep/errors.hpp"
#include "sweep/scheduler.hpp"
#include "sweep/transport.hpp"

using namespace sweep;
using namespace testing;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::validation;
}

SchedulerRequest script_request(const TempDir& tmp, const std::string& name, const std::string& body,
                                json params = json::object()) {
  auto work = tmp / name;
  fs::create_directories(work);
  auto script = tmp / (name + ".sh");
  spit(script, "#!/bin/bash\n" + body + "\n");
  return {script.string(), std::move(params), work.string()};
}

template <typename F>
bool eventually(F&& pred, double seconds = 10) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return pred();
}

}  // namespace

TEST_CASE("wire format") {
  CHECK(format_submit_reply("f-000001") == R"({"job_id":"f-000001"})");
  CHECK(format_status_reply(SchedulerState::queued) == R"({"status":"queued"})");
  CHECK(parse_submit_reply("noise\n{\"job_id\": \"x1\"}\n") == "x1");
  CHECK(parse_status_reply("{\"status\":\"running\"}") == SchedulerState::running);
  CHECK(code_of([] { parse_submit_reply("garbage"); }) == ErrorCode::submit_rejected);
  CHECK(code_of([] { parse_status_reply("{\"status\":\"done\"}"); }) == ErrorCode::backend_unreachable);
}

TEST_CASE("simulated backend timeline") {
  TempDir tmp;
  SimulatedBackend sim(1, 1.0, false);
  auto a = sim.submit(script_request(tmp, "a", "true", {{"duration", 5}}));
  CHECK(a == "s-000001");
  CHECK(sim.status(a).state == SchedulerState::queued);
  sim.advance_time(3);
  CHECK(sim.status(a).state == SchedulerState::running);
  sim.advance_time(3);
  CHECK(sim.status(a).state == SchedulerState::finished);
  CHECK(sim.status("garbage").state == SchedulerState::finished);
  CHECK(code_of([&] { sim.submit({(tmp / "missing.sh").string(), json::object(), tmp.path().string()}); }) ==
        ErrorCode::submit_rejected);
}

TEST_CASE("simulated backend honours capacity") {
  TempDir tmp;
  SimulatedBackend sim(1, 2.0, false);
  auto a = sim.submit(script_request(tmp, "a", "true"));
  auto b = sim.submit(script_request(tmp, "b", "true"));
  // Hand-enumerated: a runs [0,2), b waits and runs [2,4).
  sim.advance_time(1);
  CHECK(sim.status(a).state == SchedulerState::running);
  CHECK(sim.status(b).state == SchedulerState::queued);
  sim.advance_time(1.5);
  CHECK(sim.status(a).state == SchedulerState::finished);
  CHECK(sim.status(b).state == SchedulerState::running);
  sim.advance_time(1.4);
  CHECK(sim.status(b).state == SchedulerState::running);
  sim.advance_time(0.1);
  CHECK(sim.status(b).state == SchedulerState::finished);
}

TEST_CASE("simulated backend remove") {
  TempDir tmp;
  SimulatedBackend sim(1, 5.0, false);
  auto a = sim.submit(script_request(tmp, "a", "true"));
  auto b = sim.submit(script_request(tmp, "b", "true"));
  sim.remove(b);
  CHECK(sim.status(b).state == SchedulerState::finished);
  sim.advance_time(1);
  sim.remove(a);
  CHECK(sim.status(a).state == SchedulerState::finished);
  sim.remove(a);
}

TEST_CASE("simulated backend runs the script when the job ends") {
  TempDir tmp;
  SimulatedBackend sim(2, 1.0, true);
  auto req = script_request(tmp, "a", "echo hi > here.txt");
  auto id = sim.submit(req);
  CHECK_FALSE(fs::exists(fs::path(req.work_dir) / "here.txt"));
  sim.advance_time(1);
  CHECK(sim.status(id).state == SchedulerState::finished);
  CHECK(slurp(fs::path(req.work_dir) / "here.txt") == "hi\n");
}

TEST_CASE("property: observed states are monotone over random timelines") {
  TempDir tmp;
  auto req = script_request(tmp, "a", "true");
  std::mt19937 rng(2024);
  const auto rank = [](SchedulerState s) { return static_cast<int>(s); };
  for (int timeline = 0; timeline < 1000; ++timeline) {
    SimulatedBackend sim(1 + static_cast<int>(rng() % 3), 1.0, false);
    std::map<std::string, int> last;
    for (int step = 0; step < 30; ++step) {
      switch (rng() % 4) {
        case 0: {
          auto r = req;
          r.parameters = {{"duration", static_cast<double>(rng() % 50) / 10.0}};
          last[sim.submit(r)] = rank(SchedulerState::queued);
          break;
        }
        case 1:
          sim.advance_time(static_cast<double>(rng() % 30) / 10.0);
          break;
        case 2:
          if (!last.empty() && rng() % 4 == 0) {
            auto it = std::next(last.begin(), static_cast<long>(rng() % last.size()));
            sim.remove(it->first);
          }
          break;
        default:
          break;
      }
      for (auto& [id, prev] : last) {
        int now = rank(sim.status(id).state);
        REQUIRE(now >= prev);
        prev = now;
      }
    }
  }
}

TEST_CASE("fork backend: submit, run, finish") {
  TempDir tmp;
  ForkBackend fork(tmp / "state");
  auto req = script_request(tmp, "job", "echo $$ > pid.txt; pwd > cwd.txt; sleep 0.3");
  auto id = fork.submit(req);
  CHECK(id == "f-000001");
  CHECK(eventually([&] { return fs::exists(fs::path(req.work_dir) / "cwd.txt"); }));
  CHECK(fs::equivalent(fs::path(slurp(fs::path(req.work_dir) / "cwd.txt").substr(0, req.work_dir.size())),
                       req.work_dir));
  auto pid = std::stoi(slurp(fs::path(req.work_dir) / "pid.txt"));
  CHECK(process_alive(pid));
  CHECK(fork.status(id).state == SchedulerState::running);
  CHECK(eventually([&] { return fork.status(id).state == SchedulerState::finished; }));
  CHECK_FALSE(process_alive(pid));
  CHECK(fork.submit(script_request(tmp, "job2", "true")) == "f-000002");
  CHECK(fork.status("garbage").state == SchedulerState::finished);
  CHECK(fork.status("f-999999").state == SchedulerState::finished);
  CHECK(code_of([&] { fork.submit({(tmp / "nope.sh").string(), json::object(), req.work_dir}); }) ==
        ErrorCode::submit_rejected);
}

TEST_CASE("fork backend: delete terminates a running job") {
  TempDir tmp;
  ForkBackend fork(tmp / "state");
  auto req = script_request(tmp, "job", "echo $$ > pid.txt; sleep 30");
  auto id = fork.submit(req);
  REQUIRE(eventually([&] { return fs::exists(fs::path(req.work_dir) / "pid.txt"); }));
  auto pid = std::stoi(slurp(fs::path(req.work_dir) / "pid.txt"));
  fork.remove(id);
  CHECK(eventually([&] { return !process_alive(pid); }, 1.0));
  CHECK(fork.status(id).state == SchedulerState::finished);
  fork.remove(id);
  CHECK(fork.recover(req) == id);
}

TEST_CASE("wrapper protocol through the sweep-xsub executable") {
  TempDir tmp;
  auto transport = std::make_shared<LocalTransport>();
  WrapperBackend wrapper(transport, xsub_command(tmp / "state"));
  auto req = script_request(tmp, "job", "echo ok > ok.txt");
  CHECK_FALSE(wrapper.recover(req).has_value());
  auto id = wrapper.submit(req);
  CHECK(id == "f-000001");
  CHECK(wrapper.recover(req) == id);
  CHECK(slurp(WrapperBackend::submit_record_path(req.work_dir)).find(id) != std::string::npos);
  CHECK(eventually([&] { return wrapper.status(id).state == SchedulerState::finished; }));
  CHECK(slurp(fs::path(req.work_dir) / "ok.txt") == "ok\n");
  wrapper.remove(id);
  CHECK(wrapper.status("unknown").state == SchedulerState::finished);

  auto missing = sweep::run_process({kXsub, "--state-dir", (tmp / "state").string(), "xsub",
                                     (tmp / "nope.sh").string(), "--work-dir", req.work_dir});
  CHECK(missing.exit_code != 0);
  CHECK(missing.err.find("script not found") != std::string::npos);
  CHECK(code_of([&] { wrapper.submit({(tmp / "nope.sh").string(), json::object(), req.work_dir}); }) ==
        ErrorCode::submit_rejected);

  WrapperBackend broken(transport, (tmp / "no-such-wrapper").string());
  CHECK(code_of([&] { broken.status("f-000001"); }) == ErrorCode::backend_unreachable);
}

TEST_CASE("batch scheduler dialects") {
  using B = BatchBackend;
  CHECK(B::parse_submit_output(SchedulerTemplate::torque, "1234.head\n") == "1234.head");
  CHECK(B::parse_submit_output(SchedulerTemplate::slurm, "987;cluster\n") == "987");
  CHECK(code_of([] { B::parse_submit_output(SchedulerTemplate::slurm, "error: bad"); }) ==
        ErrorCode::submit_rejected);
  CHECK(B::parse_status_output(SchedulerTemplate::torque, "    job_state = Q") == SchedulerState::queued);
  CHECK(B::parse_status_output(SchedulerTemplate::torque, "    job_state = R") == SchedulerState::running);
  CHECK(B::parse_status_output(SchedulerTemplate::torque, "    job_state = C") == SchedulerState::finished);
  CHECK(B::parse_status_output(SchedulerTemplate::slurm, "PENDING") == SchedulerState::queued);
  CHECK(B::parse_status_output(SchedulerTemplate::slurm, "RUNNING") == SchedulerState::running);
  CHECK(B::parse_status_output(SchedulerTemplate::slurm, "") == SchedulerState::finished);
  auto torque = scheduler_header(SchedulerTemplate::torque, {{"mpi_procs", 4}, {"walltime", "1:00:00"}}, "/w");
  CHECK(torque.find("#PBS -l nodes=1:ppn=4\n") != std::string::npos);
  CHECK(torque.find("#PBS -l walltime=1:00:00\n") != std::string::npos);
  auto slurm = scheduler_header(SchedulerTemplate::slurm, {{"omp_threads", 2}}, "/w");
  CHECK(slurm.find("#SBATCH --cpus-per-task=2\n") != std::string::npos);
  CHECK(scheduler_header(SchedulerTemplate::none, {{"mpi_procs", 4}}, "/w").empty());
}
