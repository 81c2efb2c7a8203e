#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"
#include "sweep/api.hpp"
#include "sweep/errors.hpp"
#include "sweep/plot.hpp"

using namespace sweep;
using namespace testing;

namespace {

void finish_with(Catalog& catalog, const Run& run, const json& output, bool success = true) {
  auto dir = catalog.reserve_result_dir(run);
  spit(dir / "_output.json", output.dump());
  catalog.seal_result_dir(run);
  auto h = catalog.load_job(JobKind::run, run.id);
  REQUIRE(catalog.apply(h, Event::submitted("x")));
  REQUIRE(catalog.apply(h, Event::started()));
  REQUIRE(catalog.apply(h, success ? Event::succeeded() : Event::failed(1)));
}

struct OracleRow {
  std::string x;
  std::string mean;
  std::string stderr_;
  int n = 0;
};

std::map<std::string, OracleRow> oracle_rows(const Catalog& catalog, const std::string& sim,
                                             const std::string& x, const std::string& y) {
  auto r = run_process({"python3", oracle("plot_data.py"), catalog.data_root().string(), sim, x, y});
  REQUIRE(r.ok());
  std::map<std::string, OracleRow> rows;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    REQUIRE(f.size() == 5);
    rows[f[4]] = {f[0], f[1], f[2], std::stoi(f[3])};
  }
  return rows;
}

}  // namespace

TEST_CASE("property: plot rows agree with a brute-force oracle") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    TempDir tmp;
    Catalog catalog(tmp / "data", false);
    auto host = local_host(catalog, tmp / "w", "unused");
    auto sim = sum_simulator(catalog);
    std::uniform_real_distribution<double> value(-50, 50);
    const int sets = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < sets; ++i) {
      auto ps =
          catalog.find_or_create_parameter_set(sim, json{{"p1", 0.5 * (rng() % 9)}, {"p2", 1.0 * i}})
              .first;
      const int target = static_cast<int>(rng() % 5);
      if (target == 0) continue;
      auto runs = catalog.find_or_create_runs_upto(ps, target, host.id);
      for (const auto& run : runs) {
        switch (rng() % 6) {
          case 0: break;  // still created
          case 1: finish_with(catalog, run, json{{"y", value(rng)}}, false); break;
          case 2: finish_with(catalog, run, json{{"z", 1}}); break;
          default: finish_with(catalog, run, json{{"y", value(rng)}}); break;
        }
      }
    }
    auto rows = plot_data(catalog, {sim.id, "p1", "y"});
    auto expect = oracle_rows(catalog, sim.id, "p1", "y");
    CAPTURE(trial);
    REQUIRE(rows.size() == expect.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (i > 0) {
        auto prev = std::get<double>(rows[i - 1].x);
        CHECK(prev <= std::get<double>(row.x));
      }
      const auto& o = expect.at(row.parameter_set_id);
      CHECK(row.n == o.n);
      CHECK(std::get<double>(row.x) == std::stod(o.x));
      if (o.mean.empty()) {
        CHECK_FALSE(row.mean);
      } else {
        REQUIRE(row.mean);
        CHECK(*row.mean == doctest::Approx(std::stod(o.mean)).epsilon(1e-12));
      }
      if (o.stderr_.empty()) {
        CHECK_FALSE(row.stderr_of_mean);
      } else {
        REQUIRE(row.stderr_of_mean);
        CHECK(*row.stderr_of_mean == doctest::Approx(std::stod(o.stderr_)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("plot csv format") {
  TempDir tmp;
  Catalog catalog(tmp / "data", false);
  auto host = local_host(catalog, tmp / "w", "unused");
  auto sim = sum_simulator(catalog);
  auto a = catalog.find_or_create_parameter_set(sim, json{{"p1", 2.0}, {"p2", 0.0}}).first;
  auto b = catalog.find_or_create_parameter_set(sim, json{{"p1", 1.0}, {"p2", 0.0}}).first;
  auto c = catalog.find_or_create_parameter_set(sim, json{{"p1", 3.0}, {"p2", 0.0}}).first;
  auto ra = catalog.find_or_create_runs_upto(a, 3, host.id);
  finish_with(catalog, ra[0], json{{"y", 1}});
  finish_with(catalog, ra[1], json{{"y", 2}});
  finish_with(catalog, ra[2], json{{"y", "n/a"}});
  auto rb = catalog.find_or_create_runs_upto(b, 1, host.id);
  finish_with(catalog, rb[0], json{{"y", 0.1}});
  catalog.find_or_create_runs_upto(c, 1, host.id);

  auto csv = plot_csv(plot_data(catalog, {sim.id, "p1", "y"}));
  // mean(1, 2) = 1.5; sample sd = sqrt(0.5); stderr = sqrt(0.5) / sqrt(2) = 0.5
  CHECK(csv == "x,y_mean,y_stderr,n,excluded,parameter_set_id\n"
               "1.0,0.1,,1,0," + b.id + "\n"
               "2.0,1.5,0.5,2,1," + a.id + "\n"
               "3.0,,,0,0," + c.id + "\n");

  auto only = plot_data(catalog, {sim.id, "p1", "y", "mean", std::nullopt, json{{"p2", 0.0}}});
  CHECK(only.size() == 3);
  auto none = plot_data(catalog, {sim.id, "p1", "y", "mean", std::nullopt, json{{"p2", 5.0}}});
  CHECK(none.empty());
  CHECK_THROWS_AS(plot_data(catalog, {sim.id, "nope", "y"}), Error);
  CHECK_THROWS_AS(plot_data(catalog, {sim.id, "p1", "y", "median"}), Error);
  CHECK_THROWS_AS(plot_data(catalog, {sim.id, "p1", ""}), Error);

  auto j = plot_json(plot_data(catalog, {sim.id, "p1", "y"}));
  CHECK(j[1]["y_mean"] == 1.5);
  CHECK(j[0]["y_stderr"].is_null());
}

TEST_CASE("base parameter set keeps other parameters fixed") {
  TempDir tmp;
  Catalog catalog(tmp / "data", false);
  auto host = local_host(catalog, tmp / "w", "unused");
  auto sim = sum_simulator(catalog);
  std::vector<ParameterSet> sets;
  for (double p1 : {1.0, 2.0})
    for (double p2 : {10.0, 20.0})
      sets.push_back(catalog.find_or_create_parameter_set(sim, json{{"p1", p1}, {"p2", p2}}).first);
  auto rows = plot_data(catalog, {sim.id, "p1", "y", "mean", sets[0].id, json::object()});
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    auto ps = catalog.parameter_set(r.parameter_set_id);
    CHECK(std::get<double>(ps.values.at("p2")) == 10.0);
  }
  Api api(catalog, ServiceMode::read_only);
  auto resp = api.handle({"GET", "/parameter_sets/" + sets[0].id + "/plot_data",
                          {{"x", "p1"}, {"y", "y"}, {"format", "json"}}, {}});
  CHECK(resp.status == 200);
  CHECK(resp.json_body().size() == 2);
  auto bad = api.handle({"GET", "/simulators/" + sim.id + "/plot_data", {{"x", "q"}, {"y", "y"}}, {}});
  CHECK(bad.status == 422);
  CHECK(bad.json_body()["code"] == "unknown_parameter");
}
