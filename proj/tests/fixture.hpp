#pragma once

#include "support.hpp"
#include "sweep/analysis.hpp"

namespace testing {

/// A store holding a finished sweep: one host, the sum simulator, three
/// ParameterSets with two Runs each, a created Run, and a finished analysis.
struct Populated {
  TempDir tmp;
  sweep::Catalog catalog{tmp / "data", false};
  sweep::Host host;
  sweep::Simulator sim;
  std::vector<sweep::ParameterSet> sets;
  sweep::Analyzer analyzer;
  sweep::Analysis analysis;
  std::string pending_run;

  Populated() {
    using namespace sweep;
    host = local_host(catalog, tmp / "work", "unused", 8);
    sim = sum_simulator(catalog);
    for (double p1 : {1.0, 2.0, 3.0}) {
      auto ps = catalog.find_or_create_parameter_set(sim, json{{"p1", p1}, {"p2", 0.25}}).first;
      catalog.find_or_create_runs_upto(ps, 2, host.id);
      sets.push_back(ps);
    }
    Analyzer a;
    a.simulator_id = sim.id;
    a.name = "count";
    a.command = "python3 " + stub("count_inputs.py");
    a.scope = AnalyzerScope::on_parameter_set;
    analyzer = catalog.add_analyzer(a).value;

    auto backend = std::make_shared<SimulatedBackend>(8, 1.0, true);
    Worker worker(catalog, fast_config(), shared_backend(backend));
    worker.set_clock([backend] { return backend->now(); });
    auto settle = [&] {
      for (int i = 0; i < 50 && !all_terminal(catalog); ++i) {
        worker.cycle();
        backend->advance_time(1);
      }
    };
    settle();
    analysis = create_analysis(catalog, analyzer, sets[0].id, json::object(), host.id);
    settle();
    analysis = catalog.analysis(analysis.id);
    auto extra = catalog.find_or_create_parameter_set(sim, json{{"p1", 4.0}, {"p2", 0.25}}).first;
    pending_run = catalog.find_or_create_runs_upto(extra, 1, host.id).front().id;
    sets.push_back(extra);
  }
};

}  // namespace testing
