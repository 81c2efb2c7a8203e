// Acceptance suite: one PASS/FAIL line per criterion.
#include <cctype>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "fixture.hpp"
#include "sweep/api.hpp"
#include "sweep/digest.hpp"
#include "sweep/fault.hpp"
#include "sweep/snapshot.hpp"

using namespace sweep;
using namespace testing;

namespace {

class Probe {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  /// Stops the criterion early; later checks would only cascade.
  void require(bool ok, const std::string& what) {
    check(ok, what);
    if (!ok) throw std::runtime_error("required: " + what);
  }
  bool passed() const { return failed_ == 0; }
  int checks() const { return checks_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  int checks_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
};

std::string trimmed(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

const std::string kDefs = R"([{"name":"p1","kind":"float"},{"name":"p2","kind":"float"}])";
const std::string kGrid = R"({"p1":[1.0,2.0,3.0,4.0,5.0],"p2":[2.0,4.0,6.0,8.0,10.0]})";

ProcessResult cli(const fs::path& root, std::vector<std::string> args) {
  args.insert(args.begin(), {"--data-root", root.string()});
  return sweepd(args);
}

json cli_json(Probe& p, const fs::path& root, const std::vector<std::string>& args) {
  auto r = cli(root, args);
  p.require(r.exit_code == 0, "sweepd " + args[0] + " " + args[1] + " failed: " + r.err);
  return json::parse(r.out);
}

void add_host(Probe& p, const fs::path& root, const TempDir& tmp, int capacity) {
  cli_json(p, root, {"host", "add", "--name", "local", "--work-base-dir", (tmp / "work").string(),
                     "--xsub-path", xsub_command(tmp / "xsub"), "--max-concurrent",
                     std::to_string(capacity), "--polling-interval", "1"});
}

ProcessResult run_worker(const fs::path& root) {
  return cli(root, {"worker", "--until-idle", "--poll-interval", "0.05"});
}

/// Every sealed directory is referenced by a document and every reference
/// points at a sealed directory whose content matches its digest.
void check_store_consistent(Probe& p, const Catalog& c) {
  std::set<std::string> referenced;
  for (const auto& run : c.runs()) {
    if (!run.job.result_dir) continue;
    referenced.insert(*run.job.result_dir);
    p.check(c.files().is_sealed(*run.job.result_dir), "result dir of " + run.id + " sealed");
    p.check(run.job.result_digest &&
                content_digest(c.files().absolute(*run.job.result_dir)) == *run.job.result_digest,
            "digest of " + run.id + " matches");
  }
  for (const auto& a : c.analyses()) {
    if (a.job.result_dir) referenced.insert(*a.job.result_dir);
  }
  for (const auto& rel : c.files().sealed_dirs()) {
    p.check(referenced.count(rel) == 1, "sealed directory " + rel + " is referenced");
  }
  auto staging = c.files().root() / ".staging";
  p.check(!fs::exists(staging) || fs::is_empty(staging), "no staging leftovers");
}

// 1. The sample-script sweep on the fork backend.
void criterion_1(Probe& p, const TempDir& tmp) {
  const auto root = tmp / "data";
  const auto start = std::chrono::steady_clock::now();
  add_host(p, root, tmp, 10);
  cli_json(p, root, {"simulator", "add", "--name", "sum", "--command", sum_command(), "--params-def", kDefs});
  auto sweep = cli_json(p, root, {"ps", "sweep", "--sim", "sum", "--grid", kGrid, "--runs", "5", "--host", "local"});
  p.check(sweep["created_parameter_sets"] == 25, "25 ParameterSets created");
  p.check(sweep["created_runs"] == 125, "125 Runs created");
  auto w = run_worker(root);
  p.require(w.exit_code == 0, "worker exits cleanly: " + w.err);

  Catalog c(root, false);
  p.check(c.parameter_sets(c.resolve_simulator("sum").id).size() == 25, "25 ParameterSets stored");
  auto runs = c.runs();
  p.check(runs.size() == 125, "125 Runs stored");
  for (const auto& run : runs) {
    p.check(run.job.status == JobStatus::finished && run.job.exit_code == 0,
            "run " + run.id + " finished with exit 0");
    if (!run.job.result_dir) {
      p.check(false, "run " + run.id + " has a result directory");
      continue;
    }
    auto dir = c.files().absolute(*run.job.result_dir);
    for (auto f : {"_output.json", "out.csv", "_status.json", "_time.txt", "_version.txt"}) {
      p.check(fs::is_regular_file(dir / f), run.id + " has " + f);
    }
  }
  auto again = cli_json(p, root, {"ps", "sweep", "--sim", "sum", "--grid", kGrid, "--runs", "5", "--host", "local"});
  p.check(again["created_parameter_sets"] == 0 && again["created_runs"] == 0, "re-run creates nothing");
  p.check(c.runs().size() == 125, "still 125 Runs");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  p.check(seconds < 120, "completed in under two minutes");
  p.check(fs::is_empty(tmp / "work"), "host work directory cleaned");
}

// 2. Simulator contract.
void criterion_2(Probe& p, const TempDir& tmp) {
  const auto root = tmp / "data";
  add_host(p, root, tmp, 8);
  auto add_sim = [&](const std::string& name, const std::string& command, const std::string& mode) {
    auto r = cli(root, {"simulator", "add", "--name", name, "--command", command, "--params-def", kDefs,
                        "--input-mode", mode});
    p.require(r.exit_code == 0, "simulator add " + name + ": " + r.err);
    return r;
  };
  add_sim("writer", sum_command("--subdir"), "arguments");
  add_sim("args", sum_command(), "arguments");
  add_sim("file", sum_command("--json"), "json_file");
  add_sim("fails", sum_command("--exit 5"), "arguments");
  auto clobber =
      add_sim("clobber", sum_command("--clobber _status.json --clobber _time.txt --clobber _version.txt"),
              "arguments");
  int warnings = 0;
  for (std::size_t pos = 0; (pos = clobber.err.find("warning:", pos)) != std::string::npos; ++pos) {
    ++warnings;
  }
  p.check(warnings == 3, "one registration warning per reserved name");

  const std::string point = R"({"p1":[0.75,1.25],"p2":[3.5]})";
  for (auto sim : {"writer", "args", "file", "fails", "clobber"}) {
    cli_json(p, root, {"ps", "sweep", "--sim", sim, "--grid", point, "--runs", "2", "--host", "local"});
  }
  auto w = run_worker(root);
  p.require(w.exit_code == 0, "worker exits cleanly: " + w.err);

  Catalog c(root, false);
  auto runs_of_sim = [&](const std::string& name) {
    Query q;
    q.where("simulator_id", c.resolve_simulator(name).id);
    q.sort_by = "id";
    auto runs = c.runs(q);
    std::sort(runs.begin(), runs.end(), [&](const Run& a, const Run& b) {
      auto ka = c.parameter_set(a.parameter_set_id).canonical_key;
      auto kb = c.parameter_set(b.parameter_set_id).canonical_key;
      return std::tie(ka, a.seed) < std::tie(kb, b.seed);
    });
    return runs;
  };
  auto dir_of = [&](const Run& r) { return c.files().absolute(r.job.result_dir.value_or("?")); };

  for (const auto& r : runs_of_sim("writer")) {
    p.check(r.job.status == JobStatus::finished, "(a) writer run finished");
    p.check(slurp(dir_of(r) / "data" / "nested.txt") == "nested\n", "(a) nested output collected");
    p.check(fs::exists(dir_of(r) / "out.csv") && fs::exists(dir_of(r) / "_output.json"),
            "(a) top-level outputs collected");
  }

  auto by_args = runs_of_sim("args");
  auto by_file = runs_of_sim("file");
  p.check(by_args.size() == 4 && by_file.size() == 4, "(b) four runs per input mode");
  for (std::size_t i = 0; i < std::min(by_args.size(), by_file.size()); ++i) {
    p.check(by_args[i].seed == by_file[i].seed, "(b) paired seeds");
    for (auto f : {"_output.json", "out.csv"}) {
      p.check(slurp(dir_of(by_args[i]) / f) == slurp(dir_of(by_file[i]) / f),
              std::string("(b) identical ") + f + " across input modes");
    }
    p.check(fs::exists(dir_of(by_file[i]) / "_input.json"), "(b) json_file run kept _input.json");
  }

  for (const auto& r : runs_of_sim("fails")) {
    p.check(r.job.status == JobStatus::failed, "(c) nonzero exit marks the run failed");
    p.check(r.job.exit_code == 5, "(c) exit code preserved");
    p.check(fs::exists(dir_of(r) / "_output.json") && fs::exists(dir_of(r) / "out.csv"),
            "(c) outputs of a failed run retained");
  }

  for (const auto& r : runs_of_sim("clobber")) {
    p.check(r.job.status == JobStatus::finished, "(d) clobbering run finished");
    auto status = json::parse(slurp(dir_of(r) / "_status.json"), nullptr, false);
    p.check(!status.is_discarded() && status.value("exit_code", -1) == 0,
            "(d) _status.json written by the executor");
    auto time = slurp(dir_of(r) / "_time.txt");
    p.check(time.find("simulator") == std::string::npos && !time.empty(),
            "(d) _time.txt written by the executor");
    p.check(slurp(dir_of(r) / "_version.txt").find("simulator") == std::string::npos,
            "(d) _version.txt written by the executor");
  }
  check_store_consistent(p, c);
}

// 3. Scheduler abstraction.
void criterion_3(Probe& p, const TempDir&) {
  auto suite = run_process({SWEEP_TEST_WORKER_BIN, "--test-case=lifecycle suite*"});
  p.check(suite.ok(), "lifecycle suite passes against every backend\n" + suite.out);
  p.check(suite.out.find("3 passed") != std::string::npos, "three backends exercised");
  auto prop = run_process({SWEEP_TEST_SCHEDULER_BIN, "--test-case=property: observed states*"});
  p.check(prop.ok(), "monotone-state property over 1000 simulated timelines\n" + prop.out);
}

// 4. Crash and restart.
void criterion_4(Probe& p, const TempDir& tmp) {
  const std::vector<std::string> points{
      "dispatch.after_claim", "dispatch.after_stage:2", "dispatch.after_submit",
      "dispatch.after_cas:3", "poll.after_status",     "poll.after_started:2",
      "collect.after_claim",  "collect.after_download:2", "collect.after_unpack",
      "collect.after_seal",   "collect.after_cas:2",  "collect.after_cleanup"};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& point = points[i];
    const auto base = tmp / ("crash-" + std::to_string(i));
    const auto root = base / "data";
    const auto log = base / "nonces.log";
    fs::create_directories(base);
    cli_json(p, root, {"host", "add", "--name", "local", "--work-base-dir", (base / "work").string(),
                       "--xsub-path", xsub_command(base / "xsub"), "--max-concurrent", "4",
                       "--polling-interval", "1"});
    cli_json(p, root, {"simulator", "add", "--name", "sum", "--command",
                       sum_command("--sleep 0.2 --nonce-log " + log.string()), "--params-def", kDefs});
    cli_json(p, root, {"ps", "sweep", "--sim", "sum", "--grid", R"({"p1":[1.0,2.0],"p2":[3.0]})",
                       "--runs", "2", "--host", "local"});

    ::setenv("SWEEPD_CRASH_AT", point.c_str(), 1);
    auto crashed = run_worker(root);
    ::unsetenv("SWEEPD_CRASH_AT");
    p.check(crashed.exit_code == fault::kCrashExitCode, point + ": worker was killed at the point");

    auto restarted = run_worker(root);
    p.check(restarted.exit_code == 0, point + ": restarted worker exits cleanly: " + restarted.err);
    auto repaired = run_worker(root);
    p.check(repaired.exit_code == 0, point + ": third start is clean");

    Catalog c(root, false);
    auto counts = nonce_counts(log);
    for (const auto& run : c.runs()) {
      p.check(is_terminal(run.job.status), point + ": run " + run.id + " terminal");
      p.check(run.job.status == JobStatus::finished, point + ": run " + run.id + " finished");
      p.check(counts[run.id] == 1, point + ": run " + run.id + " executed exactly once (" +
                                       std::to_string(counts[run.id]) + ")");
      p.check(!run.job.lease, point + ": no lease left on " + run.id);
    }
    check_store_consistent(p, c);
    p.check(fs::is_empty(base / "work"), point + ": host work directory cleaned");
  }
}

// 5. Read-only mode and snapshots.
void criterion_5(Probe& p, const TempDir& tmp) {
  Populated f;
  Api rw(f.catalog, ServiceMode::read_write);
  Api ro(f.catalog, ServiceMode::read_only);
  auto store = [&] {
    return tree_digest(f.catalog.data_root() / "db") + tree_digest(f.catalog.data_root() / "files");
  };
  const auto before = store();
  const auto run_id = f.catalog.runs_of(f.sets[0].id).front().id;
  for (const auto& route : Api::routes()) {
    std::string id = route.pattern.rfind("/hosts", 0) == 0           ? f.host.id
                     : route.pattern.rfind("/simulators", 0) == 0     ? f.sim.id
                     : route.pattern.rfind("/parameter_sets", 0) == 0 ? f.sets[0].id
                     : route.pattern.rfind("/runs", 0) == 0           ? run_id
                     : route.pattern.rfind("/analyzers", 0) == 0      ? f.analyzer.id
                                                                      : f.analysis.id;
    std::string path = route.pattern;
    if (auto pos = path.find("{id}"); pos != std::string::npos) path.replace(pos, 4, id);
    if (auto pos = path.find("{path*}"); pos != std::string::npos) {
      path.replace(pos, 7, route.pattern.rfind("/runs", 0) == 0 ? "out.csv" : "summary.json");
    }
    std::map<std::string, std::string> query;
    if (path.find("plot_data") != std::string::npos) query = {{"x", "p1"}, {"y", "y"}};
    const auto label = route.method + " " + route.pattern;
    if (route.mutating) {
      auto r = ro.handle({route.method, path, {}, R"({"name":"x","target":3})"});
      p.check(r.status == 403, label + " refused with 403");
    } else {
      auto a = rw.handle({route.method, path, query, {}});
      auto b = ro.handle({route.method, path, query, {}});
      p.check(a.status == 200 && b.status == 200, label + " readable in both modes");
      if (route.pattern != "/spec") p.check(a.body == b.body, label + " byte-identical");
    }
  }
  p.check(store() == before, "read-only requests left the store untouched");

  auto archive = tmp / "snapshot.tar";
  auto exported = export_snapshot(f.catalog, archive);
  Catalog copy(tmp / "imported", false);
  auto imported = import_snapshot(copy, archive);
  for (auto c : {Collection::hosts, Collection::simulators, Collection::parameter_sets,
                 Collection::runs, Collection::analyzers, Collection::analyses}) {
    p.check(f.catalog.documents().query(c, {}) == copy.documents().query(c, {}),
            std::string(to_string(c)) + " documents preserved");
  }
  p.check(imported.result_dirs == exported.result_dirs, "every result directory imported");
  for (const auto& run : copy.runs()) {
    if (!run.job.result_dir) continue;
    p.check(content_digest(copy.files().absolute(*run.job.result_dir)) == *run.job.result_digest,
            "content digest of " + run.id + " preserved");
  }
}

// 6. Determinism across two full pipeline executions.
void criterion_6(Probe& p, const TempDir& tmp) {
  std::vector<std::string> digests;
  std::vector<std::string> oracle_digests;
  for (int round = 0; round < 2; ++round) {
    const auto base = tmp / ("round-" + std::to_string(round));
    const auto root = base / "data";
    fs::create_directories(base);
    cli_json(p, root, {"host", "add", "--name", "local", "--work-base-dir", (base / "work").string(),
                       "--xsub-path", xsub_command(base / "xsub"), "--polling-interval", "1"});
    cli_json(p, root, {"simulator", "add", "--name", "sum", "--command", sum_command("--subdir"),
                       "--params-def", kDefs});
    cli_json(p, root, {"ps", "sweep", "--sim", "sum", "--grid", R"({"p1":[0.1],"p2":[0.2]})",
                       "--runs", "3", "--host", "local"});
    auto w = run_worker(root);
    p.require(w.exit_code == 0, "worker exits cleanly: " + w.err);
    Catalog c(root, false);
    auto runs = c.runs();
    std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.seed < b.seed; });
    std::string joined;
    std::string oracle_joined;
    for (const auto& r : runs) {
      p.require(r.job.result_digest.has_value(), "run " + r.id + " has a digest");
      joined += std::to_string(r.seed) + ":" + *r.job.result_digest + ";";
      auto o = run_process({"python3", oracle("tree_digest.py"),
                            c.files().absolute(*r.job.result_dir).string(), "--content"});
      oracle_joined += std::to_string(r.seed) + ":" + trimmed(o.out) + ";";
    }
    digests.push_back(joined);
    oracle_digests.push_back(oracle_joined);
  }
  p.check(digests[0] == digests[1], "identical content digests across executions");
  p.check(oracle_digests[0] == digests[0], "digests agree with the independent oracle");
}

// 7. plot-data against a brute-force oracle, on the sweep of criterion 1.
void criterion_7(Probe& p, const TempDir& sweep_dir) {
  const auto root = sweep_dir / "data";
  auto csv = cli(root, {"plot-data", "--sim", "sum", "--x", "p1", "--y", "y"});
  p.require(csv.exit_code == 0, "plot-data runs: " + csv.err);
  Catalog c(root, false);
  const auto sim_id = c.resolve_simulator("sum").id;
  auto oracle_out = run_process({"python3", oracle("plot_data.py"), root.string(), sim_id, "p1", "y"});
  p.require(oracle_out.ok(), "oracle runs: " + oracle_out.err);
  std::map<std::string, std::vector<std::string>> expected;
  {
    std::istringstream in(oracle_out.out);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() == 5) expected[cells[4]] = cells;
    }
  }
  std::istringstream in(csv.out);
  std::string line;
  std::getline(in, line);
  p.check(line == "x,y_mean,y_stderr,n,excluded,parameter_set_id", "CSV header");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    p.require(cells.size() == 6, "six cells in: " + line);
    auto ps = c.parameter_set(cells[5]);
    const double sum = std::get<double>(ps.values.at("p1")) + std::get<double>(ps.values.at("p2"));
    p.check(std::stod(cells[1]) == sum, "mean equals p1 + p2 for " + ps.canonical_key);
    p.check(std::stod(cells[2]) == 0.0, "stderr is zero for " + ps.canonical_key);
    p.check(cells[3] == "5" && cells[4] == "0", "five runs counted for " + ps.canonical_key);
    auto it = expected.find(cells[5]);
    p.require(it != expected.end(), "oracle row for " + cells[5]);
    p.check(std::stod(it->second[1]) == std::stod(cells[1]), "oracle mean agrees");
    p.check(std::stod(it->second[2]) == 0.0, "oracle stderr is zero");
    p.check(it->second[3] == cells[3], "oracle n agrees");
  }
  p.check(rows == 25, "25 rows");
  p.check(expected.size() == 25, "oracle saw 25 ParameterSets");
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    std::string title;
    std::function<void(Probe&, const TempDir&)> body;
    bool uses_sweep = false;
  };
  TempDir sweep_dir;
  const std::vector<Criterion> criteria{
      {1, "sample-script sweep, 25 ParameterSets x 5 Runs on the fork backend", criterion_1},
      {2, "simulator contract: outputs, input modes, exit codes, reserved files", criterion_2},
      {3, "identical lifecycle suite on every backend, monotone scheduler states", criterion_3},
      {4, "crash at 12 injected points, restart, single execution, no orphans", criterion_4},
      {5, "read-only route enumeration and snapshot round trip", criterion_5},
      {6, "deterministic result digests across two executions", criterion_6},
      {7, "plot-data equals p1 + p2 with zero stderr, checked by an oracle", criterion_7, true},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Probe probe;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (c.uses_sweep || c.number == 1) {
        c.body(probe, sweep_dir);
      } else {
        TempDir tmp;
        c.body(probe, tmp);
      }
    } catch (const std::exception& e) {
      probe.check(false, e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d: %s (%d checks, %.1f s) %s\n", c.number, probe.passed() ? "PASS" : "FAIL",
                probe.checks(), seconds, c.title.c_str());
    for (const auto& f : probe.failures()) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
    if (!probe.passed()) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
