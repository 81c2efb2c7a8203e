#include <doctest.h>

#include <set>

#include "support.hpp"
#include "sweep/api.hpp"

using namespace sweep;
using namespace testing;

namespace {

ProcessResult cli(const fs::path& root, std::vector<std::string> args) {
  args.insert(args.begin(), {"--data-root", root.string()});
  return sweepd(args);
}

json cli_json(const fs::path& root, std::vector<std::string> args) {
  auto r = cli(root, args);
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  return json::parse(r.out);
}

const std::string kDefs = R"([{"name":"p1","kind":"float"},{"name":"p2","kind":"float"}])";
const std::string kGrid = R"({"p1":[1.0,2.0,3.0,4.0,5.0],"p2":[2.0,4.0,6.0,8.0,10.0]})";

void setup(const fs::path& root, const fs::path& work) {
  cli_json(root, {"host", "add", "--name", "local", "--work-base-dir", work.string(), "--xsub-path",
                  xsub_command(work.parent_path() / "xsub"), "--max-concurrent", "8",
                  "--polling-interval", "1"});
  cli_json(root, {"simulator", "add", "--name", "sum", "--command", sum_command(), "--params-def", kDefs});
}

}  // namespace

TEST_CASE("ps sweep creates the grid once") {
  TempDir tmp;
  auto root = tmp / "data";
  setup(root, tmp / "work");
  auto first = cli_json(root, {"ps", "sweep", "--sim", "sum", "--grid", kGrid, "--runs", "5", "--host", "local"});
  CHECK(first == json{{"parameter_sets", 25}, {"created_parameter_sets", 25}, {"runs", 125},
                      {"created_runs", 125}});
  auto second = cli_json(root, {"ps", "sweep", "--sim", "sum", "--grid", kGrid, "--runs", "5", "--host", "local"});
  CHECK(second == json{{"parameter_sets", 25}, {"created_parameter_sets", 0}, {"runs", 125},
                       {"created_runs", 0}});
  CHECK(cli_json(root, {"ps", "list", "--sim", "sum"}).size() == 25);
  CHECK(cli_json(root, {"run", "list", "--status", "created"}).size() == 125);
  CHECK(cli_json(root, {"run", "list", "--limit", "7"}).size() == 7);
}

TEST_CASE("sweep through the CLI matches a loop over the API") {
  TempDir tmp;
  auto root = tmp / "data";
  setup(root, tmp / "work");
  const std::string grid = R"({"p1":[0.5,1.5],"p2":[-1.0,0.0,1.0]})";
  cli_json(root, {"ps", "sweep", "--sim", "sum", "--grid", grid, "--runs", "2", "--host", "local"});

  Catalog other(tmp / "other", false);
  auto host = local_host(other, tmp / "w2", "unused");
  auto sim = sum_simulator(other);
  Api api(other, ServiceMode::read_write);
  for (double p1 : {0.5, 1.5}) {
    for (double p2 : {-1.0, 0.0, 1.0}) {
      auto r = api.handle({"POST", "/simulators/" + sim.id + "/parameter_sets", {},
                           json{{"p1", p1}, {"p2", p2}}.dump()});
      REQUIRE(r.status == 201);
      auto id = r.json_body()["parameter_set"]["id"].get<std::string>();
      REQUIRE(api.handle({"POST", "/parameter_sets/" + id + "/runs_upto", {},
                          json{{"target", 2}, {"host", host.id}}.dump()})
                  .status == 201);
    }
  }
  Catalog mine(root, false);
  auto keys = [](const Catalog& c) {
    std::multiset<std::pair<std::string, std::int64_t>> out;
    for (const auto& run : c.runs()) out.insert({c.parameter_set(run.parameter_set_id).canonical_key, run.seed});
    return out;
  };
  CHECK(keys(mine) == keys(other));
  CHECK(keys(mine).size() == 12);
}

TEST_CASE("exit codes") {
  TempDir tmp;
  auto root = tmp / "data";
  setup(root, tmp / "work");
  CHECK(cli(root, {"no-such-command"}).exit_code == 1);
  CHECK(cli(root, {"ps", "sweep", "--sim", "sum"}).exit_code == 1);
  CHECK(cli(root, {"ps", "sweep", "--sim", "sum", "--grid", "[1]"}).exit_code == 1);
  CHECK(cli(root, {"ps", "create", "--sim", "sum", "--params", "{not json"}).exit_code == 1);
  auto unknown = cli(root, {"simulator", "show", "nope"});
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.err.find("error:") != std::string::npos);
  CHECK(cli(root, {"ps", "create", "--sim", "sum", "--params", R"({"p1":"x"})"}).exit_code == 2);
  CHECK(cli(root, {"host", "add", "--name", "local", "--work-base-dir", "/tmp/x"}).exit_code == 2);
  CHECK(sweepd({"--url", "http://127.0.0.1:9", "host", "list"}).exit_code == 3);
  CHECK(sweepd({"--help"}).exit_code == 0);
}

TEST_CASE("full pipeline through the CLI: worker, results, plot-data, export, serve") {
  TempDir tmp;
  auto root = tmp / "data";
  setup(root, tmp / "work");
  cli_json(root, {"ps", "sweep", "--sim", "sum", "--grid", R"({"p1":[1.0,2.0],"p2":[0.5]})", "--runs",
                  "2", "--host", "local"});
  auto w = cli(root, {"worker", "--until-idle", "--poll-interval", "0.1"});
  INFO(w.err);
  REQUIRE(w.exit_code == 0);
  CHECK(w.err.find("\"event\":\"start\"") != std::string::npos);
  CHECK(w.err.find("\"event\":\"stop\"") != std::string::npos);
  auto runs = cli_json(root, {"run", "list", "--status", "finished"});
  REQUIRE(runs.size() == 4);
  auto id = runs[0]["id"].get<std::string>();
  auto show = cli_json(root, {"run", "show", id});
  CHECK(show["exit_code"] == 0);
  auto fetched = cli(root, {"result", "fetch", id, "_output.json"});
  REQUIRE(fetched.exit_code == 0);
  CHECK(json::parse(fetched.out).contains("y"));
  auto out_file = tmp / "out.csv";
  CHECK(cli(root, {"result", "fetch", id, "out.csv", "-o", out_file.string()}).exit_code == 0);
  CHECK(fs::file_size(out_file) > 0);

  auto csv = cli(root, {"plot-data", "--sim", "sum", "--x", "p1", "--y", "y"});
  REQUIRE(csv.exit_code == 0);
  CHECK(csv.out.rfind("x,y_mean,y_stderr,n,excluded,parameter_set_id\n1.0,1.5,0.0,2,0,", 0) == 0);
  CHECK(csv.out.find("\n2.0,2.5,0.0,2,0,") != std::string::npos);

  auto archive = tmp / "snap.tar";
  CHECK(cli(root, {"export", archive.string()}).exit_code == 0);
  auto copy = tmp / "copy";
  auto imported = cli_json(copy, {"import", archive.string()});
  CHECK(imported["inserted"]["runs"] == 4);

  auto log = tmp / "serve.log";
  auto pid = spawn({kSweepd, "--data-root", copy.string(), "serve", "--read-only", "--port", "0"}, log);
  std::string url;
  for (int i = 0; i < 250 && url.empty(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    auto text = slurp(log);
    auto pos = text.find("\"url\":\"");
    if (pos != std::string::npos) url = text.substr(pos + 7, text.find('"', pos + 7) - pos - 7);
  }
  REQUIRE_FALSE(url.empty());
  auto remote_csv = sweepd({"--url", url, "plot-data", "--sim", "sum", "--x", "p1", "--y", "y"});
  CHECK(remote_csv.out == csv.out);
  auto refused = sweepd({"--url", url, "run", "cancel", id});
  CHECK(refused.exit_code == 2);
  CHECK(refused.err.find("read-only") != std::string::npos);
  ::kill(pid, SIGTERM);
  CHECK(wait_exit(pid) == 0);
}
