// sweepd: operator CLI. Talks to a running service (--url) or directly to a
// data root (embedded mode); worker, serve, export and import are always
// embedded.

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "sweep/api.hpp"
#include "sweep/catalog.hpp"
#include "sweep/errors.hpp"
#include "sweep/http.hpp"
#include "sweep/snapshot.hpp"
#include "sweep/worker.hpp"

namespace fs = std::filesystem;
using sweep::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;
constexpr int kExitRemote = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(sweep::ErrorCode code) {
  switch (code) {
    case sweep::ErrorCode::submit_rejected:
    case sweep::ErrorCode::backend_unreachable:
    case sweep::ErrorCode::transport_failure:
      return kExitRemote;
    default:
      return kExitDomain;
  }
}

std::string home_path(std::string_view rest) {
  const char* home = std::getenv("HOME");
  return std::string(home && *home ? home : ".") + "/" + std::string(rest);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitUsage, "cannot read " + path.string()};
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Failure{kExitUsage, path.string() + " is not a JSON object"};
  }
  return j;
}

json parse_json_arg(const std::string& text, std::string_view what) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Failure{kExitUsage, std::string(what) + " is not valid JSON"};
  return j;
}

/// Settings from $SWEEPD_CONFIG or ~/.config/sweepd/config.json.
struct Settings {
  std::optional<std::string> url;
  std::string data_root;
};

Settings load_settings(const std::string& url_flag, const std::string& root_flag) {
  Settings s;
  std::string path = std::getenv("SWEEPD_CONFIG") ? std::getenv("SWEEPD_CONFIG")
                                                  : home_path(".config/sweepd/config.json");
  json cfg = json::object();
  if (fs::exists(path)) cfg = read_json_file(path);
  if (const char* r = std::getenv("SWEEPD_DATA_ROOT"); r && *r) s.data_root = r;
  if (cfg.contains("data_root") && cfg["data_root"].is_string()) s.data_root = cfg["data_root"];
  if (s.data_root.empty()) s.data_root = home_path(".local/share/sweepd");
  if (!root_flag.empty()) s.data_root = root_flag;
  if (!url_flag.empty()) {
    s.url = url_flag;
  } else if (root_flag.empty() && cfg.contains("url") && cfg["url"].is_string()) {
    s.url = cfg["url"].get<std::string>();
  }
  return s;
}

class Session {
 public:
  explicit Session(Settings settings) : settings_(std::move(settings)) {}

  sweep::Catalog& catalog() {
    if (!catalog_) catalog_ = std::make_unique<sweep::Catalog>(settings_.data_root);
    return *catalog_;
  }

  sweep::ApiClient& client() {
    if (!client_) {
      if (settings_.url) {
        client_ = std::make_unique<sweep::HttpClient>(*settings_.url);
      } else {
        api_ = std::make_unique<sweep::Api>(catalog(), sweep::ServiceMode::read_write);
        client_ = std::make_unique<sweep::LocalClient>(*api_);
      }
    }
    return *client_;
  }

  sweep::ApiResponse raw(const std::string& method, const std::string& path,
                         std::map<std::string, std::string> query = {}, const json& body = nullptr) {
    sweep::ApiRequest req{method, path, std::move(query), body.is_null() ? "" : body.dump()};
    auto res = client().call(req);
    if (res.status < 200 || res.status >= 300) {
      std::string msg = res.body;
      auto j = json::parse(res.body, nullptr, false);
      if (!j.is_discarded() && j.is_object() && j.contains("error")) msg = j["error"].get<std::string>();
      throw Failure{res.status >= 500 ? kExitRemote : kExitDomain, msg};
    }
    return res;
  }

  json call(const std::string& method, const std::string& path,
            std::map<std::string, std::string> query = {}, const json& body = nullptr) {
    return raw(method, path, std::move(query), body).json_body();
  }

  const Settings& settings() const { return settings_; }

 private:
  Settings settings_;
  std::unique_ptr<sweep::Catalog> catalog_;
  std::unique_ptr<sweep::Api> api_;
  std::unique_ptr<sweep::ApiClient> client_;
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json definitions_arg(const std::string& text) {
  if (text.empty()) return json::array();
  auto defs = parse_json_arg(text, "--params-def");
  if (!defs.is_array()) throw Failure{kExitUsage, "--params-def must be a JSON array"};
  for (std::size_t i = 0; i < defs.size(); ++i) {
    if (defs[i].is_object() && !defs[i].contains("position")) defs[i]["position"] = i;
  }
  return defs;
}

void print_warnings(json& doc) {
  if (doc.contains("warnings")) {
    for (const auto& w : doc["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    doc.erase("warnings");
  }
}

/// Blocks SIGINT/SIGTERM in every thread and runs `on_signal` from a
/// dedicated waiter thread when one arrives.
void on_termination(std::function<void()> on_signal) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread([set, on_signal = std::move(on_signal)]() mutable {
    int sig = 0;
    while (sigwait(&set, &sig) == 0) on_signal();
  }).detach();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sweepd: parameter sweeps on local and remote hosts"};
  app.require_subcommand(1);
  std::string url_flag, root_flag;
  app.add_option("--url", url_flag, "Service URL (remote mode)");
  app.add_option("--data-root", root_flag, "Data root (embedded mode)");

  std::function<void(Session&)> action;
  auto on = [&](CLI::App* cmd, std::function<void(Session&)> fn) {
    cmd->callback([&action, fn = std::move(fn)] { action = fn; });
  };

  // host
  auto* host = app.add_subcommand("host", "Computational hosts");
  host->require_subcommand(1);
  std::string h_name, h_address = "local", h_user, h_transport = "local", h_xsub = "sweep-xsub",
                     h_work, h_sched = "none", h_sched_params = "{}";
  int h_port = 22, h_poll = 5, h_max = 1;
  auto* host_add = host->add_subcommand("add", "Register a host");
  host_add->add_option("--name", h_name)->required();
  host_add->add_option("--address", h_address);
  host_add->add_option("--port", h_port);
  host_add->add_option("--user", h_user);
  host_add->add_option("--transport", h_transport)->check(CLI::IsMember({"local", "ssh"}));
  host_add->add_option("--xsub-path", h_xsub, "Wrapper command on the host");
  host_add->add_option("--work-base-dir", h_work)->required();
  host_add->add_option("--polling-interval", h_poll);
  host_add->add_option("--max-concurrent", h_max);
  host_add->add_option("--scheduler", h_sched)->check(CLI::IsMember({"none", "torque", "slurm"}));
  host_add->add_option("--scheduler-params", h_sched_params, "JSON object");
  on(host_add, [&](Session& s) {
    json body = {{"name", h_name},         {"address", h_address},
                 {"port", h_port},         {"user", h_user},
                 {"transport", h_transport}, {"xsub_path", h_xsub},
                 {"work_base_dir", h_work}, {"polling_interval_seconds", h_poll},
                 {"max_concurrent_jobs", h_max}, {"scheduler_template", h_sched},
                 {"scheduler_parameters", parse_json_arg(h_sched_params, "--scheduler-params")}};
    print(s.call("POST", "/hosts", {}, body));
  });
  on(host->add_subcommand("list", "List hosts"), [](Session& s) { print(s.call("GET", "/hosts")); });

  // simulator
  auto* sim = app.add_subcommand("simulator", "Simulators");
  sim->require_subcommand(1);
  std::string s_name, s_command, s_defs, s_mode = "arguments", s_desc, s_version, s_ref;
  auto* sim_add = sim->add_subcommand("add", "Register a simulator");
  sim_add->add_option("--name", s_name)->required();
  sim_add->add_option("--command", s_command)->required();
  sim_add->add_option("--params-def", s_defs, "JSON array of {name, kind, default, description}");
  sim_add->add_option("--input-mode", s_mode)->check(CLI::IsMember({"arguments", "json_file"}));
  sim_add->add_option("--description", s_desc);
  sim_add->add_option("--version-command", s_version, "Prints the simulator version");
  on(sim_add, [&](Session& s) {
    json body = {{"name", s_name},
                 {"command", s_command},
                 {"parameter_definitions", definitions_arg(s_defs)},
                 {"input_mode", s_mode},
                 {"description", s_desc},
                 {"print_version_command", s_version}};
    auto doc = s.call("POST", "/simulators", {}, body);
    print_warnings(doc);
    print(doc);
  });
  on(sim->add_subcommand("list", "List simulators"),
     [](Session& s) { print(s.call("GET", "/simulators")); });
  auto* sim_show = sim->add_subcommand("show", "Show a simulator");
  sim_show->add_option("simulator", s_ref, "Id or name")->required();
  on(sim_show, [&](Session& s) { print(s.call("GET", "/simulators/" + s_ref)); });

  // ps
  auto* ps = app.add_subcommand("ps", "ParameterSets");
  ps->require_subcommand(1);
  std::string p_sim, p_params, p_grid, p_host;
  int p_runs = 0;
  auto* ps_create = ps->add_subcommand("create", "Find or create a ParameterSet");
  ps_create->add_option("--sim", p_sim)->required();
  ps_create->add_option("--params", p_params, "JSON object of parameter values")->required();
  on(ps_create, [&](Session& s) {
    print(s.call("POST", "/simulators/" + p_sim + "/parameter_sets", {},
                 parse_json_arg(p_params, "--params")));
  });
  auto* ps_list = ps->add_subcommand("list", "List ParameterSets of a simulator");
  ps_list->add_option("--sim", p_sim)->required();
  on(ps_list, [&](Session& s) { print(s.call("GET", "/simulators/" + p_sim + "/parameter_sets")); });
  auto* ps_sweep = ps->add_subcommand("sweep", "Cartesian sweep with runs up to N per point");
  ps_sweep->add_option("--sim", p_sim)->required();
  ps_sweep->add_option("--grid", p_grid, "JSON object name -> list of values")->required();
  ps_sweep->add_option("--runs", p_runs, "Runs per ParameterSet");
  ps_sweep->add_option("--host", p_host);
  on(ps_sweep, [&](Session& s) {
    auto grid = parse_json_arg(p_grid, "--grid");
    if (!grid.is_object() || grid.empty()) throw Failure{kExitUsage, "--grid must be a non-empty object"};
    std::vector<std::pair<std::string, json>> axes;
    for (const auto& [k, v] : grid.items()) {
      if (!v.is_array() || v.empty()) throw Failure{kExitUsage, "--grid values must be non-empty lists"};
      axes.emplace_back(k, v);
    }
    if (p_runs > 0 && p_host.empty()) throw Failure{kExitUsage, "--host is required with --runs"};
    if (p_runs < 0) throw Failure{kExitUsage, "--runs must not be negative"};
    std::size_t points = 0, new_points = 0, runs = 0, new_runs = 0;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
      json values = json::object();
      for (std::size_t i = 0; i < axes.size(); ++i) values[axes[i].first] = axes[i].second[idx[i]];
      auto r = s.call("POST", "/simulators/" + p_sim + "/parameter_sets", {}, values);
      ++points;
      if (r["created"].get<bool>()) ++new_points;
      if (p_runs > 0) {
        auto id = r["parameter_set"]["id"].get<std::string>();
        auto u = s.call("POST", "/parameter_sets/" + id + "/runs_upto", {},
                        {{"target", p_runs}, {"host", p_host}});
        runs += u["runs"].size();
        new_runs += u["created"].get<std::size_t>();
      }
      std::size_t i = axes.size();
      while (i > 0 && ++idx[i - 1] == axes[i - 1].second.size()) idx[--i] = 0;
      if (i == 0) break;
    }
    print({{"parameter_sets", points},
           {"created_parameter_sets", new_points},
           {"runs", runs},
           {"created_runs", new_runs}});
  });

  // run
  auto* run = app.add_subcommand("run", "Runs");
  run->require_subcommand(1);
  std::string r_status, r_ps, r_sim, r_id, r_host;
  int r_target = 1, r_limit = 0;
  bool r_yes = false;
  auto* run_list = run->add_subcommand("list", "List Runs");
  run_list->add_option("--status", r_status)
      ->check(CLI::IsMember({"created", "submitted", "running", "finished", "failed", "cancelled"}));
  run_list->add_option("--ps", r_ps);
  run_list->add_option("--sim", r_sim);
  run_list->add_option("--limit", r_limit);
  on(run_list, [&](Session& s) {
    std::map<std::string, std::string> q;
    if (!r_status.empty()) q["status"] = r_status;
    if (!r_ps.empty()) q["parameter_set_id"] = r_ps;
    if (!r_sim.empty()) q["simulator_id"] = s.call("GET", "/simulators/" + r_sim)["id"].get<std::string>();
    if (r_limit > 0) q["limit"] = std::to_string(r_limit);
    print(s.call("GET", "/runs", q));
  });
  auto* run_upto = run->add_subcommand("upto", "Create Runs up to a target count");
  run_upto->add_option("--ps", r_ps)->required();
  run_upto->add_option("--target", r_target)->required();
  run_upto->add_option("--host", r_host)->required();
  on(run_upto, [&](Session& s) {
    print(s.call("POST", "/parameter_sets/" + r_ps + "/runs_upto", {},
                 {{"target", r_target}, {"host", r_host}}));
  });
  auto* run_show = run->add_subcommand("show", "Show a Run");
  run_show->add_option("id", r_id)->required();
  on(run_show, [&](Session& s) { print(s.call("GET", "/runs/" + r_id)); });
  auto* run_cancel = run->add_subcommand("cancel", "Cancel a created or submitted Run");
  run_cancel->add_option("id", r_id)->required();
  on(run_cancel, [&](Session& s) { print(s.call("POST", "/runs/" + r_id + "/cancel")); });
  auto* run_delete = run->add_subcommand("delete", "Delete a Run and its result files");
  run_delete->add_option("id", r_id)->required();
  run_delete->add_flag("--yes", r_yes, "Confirm the deletion");
  on(run_delete, [&](Session& s) {
    if (!r_yes) throw Failure{kExitUsage, "refusing to delete without --yes"};
    print(s.call("DELETE", "/runs/" + r_id));
  });

  // analyzer / analysis
  auto* analyzer = app.add_subcommand("analyzer", "Analyzers");
  analyzer->require_subcommand(1);
  std::string a_sim, a_name, a_command, a_scope = "on_run", a_defs, a_mode = "json_file",
                     a_version, a_desc;
  auto* analyzer_add = analyzer->add_subcommand("add", "Register an analyzer");
  analyzer_add->add_option("--sim", a_sim)->required();
  analyzer_add->add_option("--name", a_name)->required();
  analyzer_add->add_option("--command", a_command)->required();
  analyzer_add->add_option("--scope", a_scope)->check(CLI::IsMember({"on_run", "on_parameter_set"}));
  analyzer_add->add_option("--params-def", a_defs);
  analyzer_add->add_option("--input-mode", a_mode)->check(CLI::IsMember({"arguments", "json_file"}));
  analyzer_add->add_option("--version-command", a_version);
  analyzer_add->add_option("--description", a_desc);
  on(analyzer_add, [&](Session& s) {
    auto sim_id = s.call("GET", "/simulators/" + a_sim)["id"].get<std::string>();
    json body = {{"simulator_id", sim_id},       {"name", a_name},
                 {"command", a_command},         {"scope", a_scope},
                 {"parameter_definitions", definitions_arg(a_defs)},
                 {"input_mode", a_mode},         {"print_version_command", a_version},
                 {"description", a_desc}};
    auto doc = s.call("POST", "/analyzers", {}, body);
    print_warnings(doc);
    print(doc);
  });
  on(analyzer->add_subcommand("list", "List analyzers"),
     [](Session& s) { print(s.call("GET", "/analyzers")); });

  auto* analysis = app.add_subcommand("analysis", "Analyses");
  analysis->require_subcommand(1);
  std::string n_analyzer, n_target, n_host, n_params = "{}", n_id, n_status;
  auto* analysis_create = analysis->add_subcommand("create", "Create an Analysis");
  analysis_create->add_option("--analyzer", n_analyzer)->required();
  analysis_create->add_option("--target", n_target, "Run id or ParameterSet id")->required();
  analysis_create->add_option("--host", n_host)->required();
  analysis_create->add_option("--params", n_params, "JSON object");
  on(analysis_create, [&](Session& s) {
    print(s.call("POST", "/analyses", {},
                 {{"analyzer_id", n_analyzer},
                  {"target_id", n_target},
                  {"host", n_host},
                  {"parameters", parse_json_arg(n_params, "--params")}}));
  });
  auto* analysis_list = analysis->add_subcommand("list", "List Analyses");
  analysis_list->add_option("--status", n_status);
  on(analysis_list, [&](Session& s) {
    std::map<std::string, std::string> q;
    if (!n_status.empty()) q["status"] = n_status;
    print(s.call("GET", "/analyses", q));
  });
  auto* analysis_show = analysis->add_subcommand("show", "Show an Analysis");
  analysis_show->add_option("id", n_id)->required();
  on(analysis_show, [&](Session& s) { print(s.call("GET", "/analyses/" + n_id)); });
  auto* analysis_cancel = analysis->add_subcommand("cancel", "Cancel an Analysis");
  analysis_cancel->add_option("id", n_id)->required();
  on(analysis_cancel, [&](Session& s) { print(s.call("POST", "/analyses/" + n_id + "/cancel")); });

  // result
  auto* result = app.add_subcommand("result", "Result files");
  result->require_subcommand(1);
  std::string f_id, f_path, f_out;
  bool f_analysis = false;
  auto* fetch = result->add_subcommand("fetch", "Print or save one result file");
  fetch->add_option("id", f_id, "Run id")->required();
  fetch->add_option("path", f_path, "Path inside the result directory")->required();
  fetch->add_option("-o,--output", f_out);
  fetch->add_flag("--analysis", f_analysis, "The id is an Analysis");
  on(fetch, [&](Session& s) {
    auto res = s.raw("GET", std::string(f_analysis ? "/analyses/" : "/runs/") + f_id + "/files/" + f_path);
    if (f_out.empty()) {
      std::cout << res.body << std::flush;
    } else {
      std::ofstream out(f_out, std::ios::binary);
      out << res.body;
      if (!out) throw Failure{kExitDomain, "cannot write " + f_out};
    }
  });
  auto* files = result->add_subcommand("list", "List result files");
  files->add_option("id", f_id)->required();
  files->add_flag("--analysis", f_analysis);
  on(files, [&](Session& s) {
    print(s.call("GET", std::string(f_analysis ? "/analyses/" : "/runs/") + f_id + "/files"));
  });

  // plot-data
  auto* plot = app.add_subcommand("plot-data", "Aggregated output per ParameterSet as CSV");
  std::string pl_sim, pl_x, pl_y, pl_reduce = "mean", pl_base, pl_where, pl_format = "csv";
  plot->add_option("--sim", pl_sim)->required();
  plot->add_option("--x", pl_x, "Parameter on the x axis")->required();
  plot->add_option("--y", pl_y, "Key in _output.json")->required();
  plot->add_option("--reduce", pl_reduce)->check(CLI::IsMember({"mean"}));
  plot->add_option("--base", pl_base, "Fix the other parameters to this ParameterSet");
  plot->add_option("--where", pl_where, "JSON object of fixed parameter values");
  plot->add_option("--format", pl_format)->check(CLI::IsMember({"csv", "json"}));
  on(plot, [&](Session& s) {
    std::map<std::string, std::string> q{{"x", pl_x}, {"y", pl_y}, {"reduce", pl_reduce},
                                         {"format", pl_format}};
    if (!pl_base.empty()) q["base"] = pl_base;
    if (!pl_where.empty()) q["where"] = pl_where;
    std::cout << s.raw("GET", "/simulators/" + pl_sim + "/plot_data", q).body << std::flush;
  });

  // worker
  auto* worker = app.add_subcommand("worker", "Run the job daemon on the data root");
  std::string w_config;
  bool w_once = false, w_until_idle = false;
  long w_max_cycles = 0;
  double w_poll = 0;
  worker->add_option("--config", w_config, "JSON worker configuration");
  worker->add_flag("--once", w_once, "Run a single cycle");
  worker->add_flag("--until-idle", w_until_idle, "Stop once no job is pending");
  worker->add_option("--max-cycles", w_max_cycles);
  worker->add_option("--poll-interval", w_poll, "Seconds between cycles");
  on(worker, [&](Session& s) {
    json cfg = w_config.empty() ? json::object() : read_json_file(w_config);
    auto config = sweep::worker_config_from_json(cfg);
    if (w_poll > 0) config.poll_interval_seconds = w_poll;
    std::unique_ptr<sweep::Catalog> own;
    sweep::Catalog* catalog = nullptr;
    if (root_flag.empty() && cfg.contains("data_root") && cfg["data_root"].is_string()) {
      own = std::make_unique<sweep::Catalog>(cfg["data_root"].get<std::string>());
      catalog = own.get();
    } else {
      catalog = &s.catalog();
    }
    static std::atomic<bool> stop{false};
    on_termination([] { stop = true; });
    sweep::Worker w(*catalog, config);
    auto repaired = w.repair();
    std::cerr << json{{"event", "start"}, {"owner", w.owner()}, {"repaired_dirs", repaired}}.dump()
              << std::endl;
    sweep::LoopOptions options;
    if (w_once) options.max_cycles = 1;
    if (w_max_cycles > 0) options.max_cycles = w_max_cycles;
    options.until_idle = w_until_idle;
    long n = 0;
    auto cycles = sweep::run_loop(w, options, stop, [&](const sweep::CycleReport& r) {
      ++n;
      if (r.dispatched || r.polled || r.collected || !r.errors.empty()) {
        auto line = r.to_json();
        line["event"] = "cycle";
        line["cycle"] = n;
        std::cerr << line.dump() << std::endl;
      }
    });
    std::cerr << json{{"event", "stop"}, {"cycles", cycles}}.dump() << std::endl;
  });

  // export / import
  std::string x_archive;
  auto* exp = app.add_subcommand("export", "Write a snapshot archive");
  exp->add_option("archive", x_archive)->required();
  on(exp, [&](Session& s) { print(sweep::export_snapshot(s.catalog(), x_archive).to_json()); });
  auto* imp = app.add_subcommand("import", "Merge a snapshot archive");
  imp->add_option("archive", x_archive)->required();
  on(imp, [&](Session& s) { print(sweep::import_snapshot(s.catalog(), x_archive).to_json()); });

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  bool v_read_only = false;
  int v_port = 3000;
  std::string v_bind = "127.0.0.1", v_import;
  serve->add_flag("--read-only", v_read_only, "Reject every mutation with 403");
  serve->add_option("--port", v_port, "0 picks a free port");
  serve->add_option("--bind", v_bind);
  serve->add_option("--import", v_import, "Snapshot to merge before serving");
  on(serve, [&](Session& s) {
    auto& catalog = s.catalog();
    if (!v_import.empty()) {
      std::cerr << json{{"event", "import"}, {"report", sweep::import_snapshot(catalog, v_import).to_json()}}.dump()
                << std::endl;
    }
    sweep::Api api(catalog, v_read_only ? sweep::ServiceMode::read_only : sweep::ServiceMode::read_write);
    sweep::HttpServer server(api, v_bind, v_port);
    int port = server.bind();
    if (port < 0) throw Failure{kExitRemote, "cannot bind " + v_bind + ":" + std::to_string(v_port)};
    on_termination([&server] { server.stop(); });
    std::cerr << json{{"event", "listening"},
                      {"url", "http://" + v_bind + ":" + std::to_string(port)},
                      {"mode", sweep::to_string(api.mode())}}
                     .dump()
              << std::endl;
    server.listen();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    Session session(load_settings(url_flag, root_flag));
    if (action) action(session);
    return 0;
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const sweep::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}
