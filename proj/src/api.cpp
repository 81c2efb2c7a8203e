#include "sweep/api.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "sweep/analysis.hpp"
#include "sweep/errors.hpp"
#include "sweep/plot.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

using Params = std::map<std::string, std::string>;

const char* kVersion = "1.0.0";

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<Params> match(const std::string& pattern, const std::vector<std::string>& parts) {
  auto segs = split_path(pattern);
  Params params;
  std::size_t i = 0;
  for (; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (s == "{path*}") {
      if (i >= parts.size()) return std::nullopt;
      std::string rest;
      for (std::size_t k = i; k < parts.size(); ++k) rest += (k > i ? "/" : "") + parts[k];
      params["path"] = rest;
      return params;
    }
    if (i >= parts.size()) return std::nullopt;
    if (s.size() > 2 && s.front() == '{' && s.back() == '}') {
      params[s.substr(1, s.size() - 2)] = parts[i];
    } else if (s != parts[i]) {
      return std::nullopt;
    }
  }
  if (i != parts.size()) return std::nullopt;
  return params;
}

ApiResponse reply(int status, const json& body) { return {status, body.dump() + "\n"}; }

ApiResponse error_reply(int status, std::string_view code, const std::string& message) {
  return reply(status, {{"error", message}, {"code", code}});
}

json parse_body(const ApiRequest& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::validation, "request body is not valid JSON");
  return j;
}

Query list_query(const Params& q, std::initializer_list<std::string_view> ignore = {}) {
  Query query;
  for (const auto& [k, v] : q) {
    if (std::find(ignore.begin(), ignore.end(), k) != ignore.end()) continue;
    if (k == "sort") {
      query.sort_by = v;
    } else if (k == "order") {
      if (v != "asc" && v != "desc") throw Error(ErrorCode::validation, "order must be asc or desc");
      query.descending = v == "desc";
    } else if (k == "offset" || k == "limit") {
      std::size_t n = 0;
      try {
        std::size_t used = 0;
        long long parsed = std::stoll(v, &used);
        if (used != v.size() || parsed < 0) throw std::invalid_argument(k);
        n = static_cast<std::size_t>(parsed);
      } catch (const std::exception&) {
        throw Error(ErrorCode::validation, k + " must be a non-negative integer");
      }
      if (k == "offset") query.offset = n; else query.limit = n;
    } else {
      auto parsed = json::parse(v, nullptr, false);
      if (parsed.is_discarded() || parsed.is_object() || parsed.is_array()) parsed = v;
      query.where(k, parsed);
    }
  }
  return query;
}

json listing(const std::vector<json>& docs) { return json(docs); }

std::vector<json> files_listing(const fs::path& root) {
  std::vector<json> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return out;
  for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file()) continue;
    out.push_back({{"path", it->path().lexically_relative(root).generic_string()},
                   {"size", static_cast<std::uint64_t>(it->file_size())}});
  }
  std::sort(out.begin(), out.end(),
            [](const json& a, const json& b) { return a["path"] < b["path"]; });
  return out;
}

}  // namespace

std::string_view to_string(ServiceMode mode) {
  return mode == ServiceMode::read_only ? "read_only" : "read_write";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::duplicate_key:
    case ErrorCode::illegal_transition:
    case ErrorCode::digest_conflict:
    case ErrorCode::already_sealed:
      return 409;
    case ErrorCode::read_only:
      return 403;
    case ErrorCode::submit_rejected:
    case ErrorCode::backend_unreachable:
    case ErrorCode::transport_failure:
      return 502;
    default:
      return 422;
  }
}

const std::vector<Route>& Api::routes() {
  static const std::vector<Route> r = {
      {"GET", "/spec", "Service description", false},
      {"GET", "/hosts", "List hosts", false},
      {"POST", "/hosts", "Register a host", true},
      {"GET", "/hosts/{id}", "Show a host", false},
      {"GET", "/simulators", "List simulators", false},
      {"POST", "/simulators", "Register a simulator", true},
      {"GET", "/simulators/{id}", "Show a simulator", false},
      {"PUT", "/simulators/{id}/parameter_definitions",
       "Replace parameter definitions (only before any ParameterSet exists)", true},
      {"GET", "/simulators/{id}/parameter_sets", "List ParameterSets", false},
      {"POST", "/simulators/{id}/parameter_sets", "Find or create a ParameterSet", true},
      {"GET", "/simulators/{id}/plot_data", "Aggregated output per ParameterSet", false},
      {"GET", "/parameter_sets/{id}", "Show a ParameterSet", false},
      {"GET", "/parameter_sets/{id}/runs", "List Runs of a ParameterSet", false},
      {"POST", "/parameter_sets/{id}/runs_upto", "Create Runs up to a target count", true},
      {"GET", "/parameter_sets/{id}/plot_data",
       "Aggregated output along x with the other parameters fixed", false},
      {"GET", "/runs", "List Runs", false},
      {"GET", "/runs/{id}", "Show a Run", false},
      {"POST", "/runs/{id}/cancel", "Cancel a Run", true},
      {"DELETE", "/runs/{id}", "Delete a Run and its results", true},
      {"GET", "/runs/{id}/files", "List result files", false},
      {"GET", "/runs/{id}/files/{path*}", "Download a result file", false},
      {"GET", "/analyzers", "List analyzers", false},
      {"POST", "/analyzers", "Register an analyzer", true},
      {"GET", "/analyzers/{id}", "Show an analyzer", false},
      {"GET", "/analyses", "List analyses", false},
      {"POST", "/analyses", "Create an analysis", true},
      {"GET", "/analyses/{id}", "Show an analysis", false},
      {"POST", "/analyses/{id}/cancel", "Cancel an analysis", true},
      {"GET", "/analyses/{id}/files", "List result files", false},
      {"GET", "/analyses/{id}/files/{path*}", "Download a result file", false},
  };
  return r;
}

json Api::spec() const {
  json paths = json::object();
  for (const auto& r : routes()) {
    std::string method = r.method;
    std::transform(method.begin(), method.end(), method.begin(), ::tolower);
    paths[r.pattern][method] = {{"summary", r.summary}, {"x-mutating", r.mutating}};
  }
  return {{"openapi", "3.0.3"},
          {"info", {{"title", "sweepd"}, {"version", kVersion}}},
          {"x-mode", to_string(mode_)},
          {"x-read-only", mode_ == ServiceMode::read_only},
          {"paths", paths}};
}

ApiResponse Api::handle(const ApiRequest& req) {
  const bool safe = req.method == "GET" || req.method == "HEAD";
  if (mode_ == ServiceMode::read_only && !safe) {
    return reply(403, {{"error", "read-only mode"}});
  }
  const auto parts = split_path(req.path);
  const Route* route = nullptr;
  Params p;
  bool path_known = false;
  for (const auto& r : routes()) {
    auto m = match(r.pattern, parts);
    if (!m) continue;
    path_known = true;
    const std::string method = req.method == "HEAD" ? "GET" : req.method;
    if (r.method == method) {
      route = &r;
      p = std::move(*m);
      break;
    }
  }
  if (!route) {
    return path_known ? error_reply(405, "method_not_allowed", req.method + " not allowed on " + req.path)
                      : error_reply(404, "not_found", "no route for " + req.path);
  }

  auto& docs = catalog_.documents();
  auto doc = [&](Collection c, const std::string& id) { return docs.get(c, id); };
  const auto& pattern = route->pattern;
  const auto& q = req.query;
  auto param = [&](const std::string& k) -> std::optional<std::string> {
    auto it = q.find(k);
    if (it == q.end()) return std::nullopt;
    return it->second;
  };

  try {
    if (pattern == "/spec") return reply(200, spec());

    if (pattern == "/hosts") {
      if (route->method == "GET") return reply(200, listing(docs.query(Collection::hosts, list_query(q))));
      auto host = catalog_.add_host(parse_body(req).get<Host>());
      return reply(201, doc(Collection::hosts, host.id));
    }
    if (pattern == "/hosts/{id}") {
      try {
        return reply(200, doc(Collection::hosts, catalog_.resolve_host(p["id"]).id));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::unknown_host) throw Error(ErrorCode::not_found, e.what());
        throw;
      }
    }

    if (pattern == "/simulators") {
      if (route->method == "GET") {
        return reply(200, listing(docs.query(Collection::simulators, list_query(q))));
      }
      auto reg = catalog_.add_simulator(parse_body(req).get<Simulator>());
      auto out = doc(Collection::simulators, reg.value.id);
      out["warnings"] = reg.warnings;
      return reply(201, out);
    }
    if (pattern == "/simulators/{id}") {
      return reply(200, doc(Collection::simulators, catalog_.resolve_simulator(p["id"]).id));
    }
    if (pattern == "/simulators/{id}/parameter_definitions") {
      auto body = parse_body(req);
      if (body.is_object() && body.contains("parameter_definitions")) body = body["parameter_definitions"];
      auto sim = catalog_.update_parameter_definitions(
          catalog_.resolve_simulator(p["id"]).id, body.get<std::vector<ParameterDefinition>>());
      return reply(200, doc(Collection::simulators, sim.id));
    }
    if (pattern == "/simulators/{id}/parameter_sets") {
      auto sim = catalog_.resolve_simulator(p["id"]);
      if (route->method == "GET") {
        auto query = list_query(q);
        query.where("simulator_id", sim.id);
        return reply(200, listing(docs.query(Collection::parameter_sets, query)));
      }
      auto body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::validation, "body must be a JSON object");
      json values = body;
      const bool has_values_param =
          std::any_of(sim.parameter_definitions.begin(), sim.parameter_definitions.end(),
                      [](const ParameterDefinition& d) { return d.name == "values"; });
      if (!has_values_param && body.contains("values") && body["values"].is_object()) {
        values = body["values"];
      }
      auto [ps, created] = catalog_.find_or_create_parameter_set(sim, values);
      return reply(created ? 201 : 200,
                   {{"created", created}, {"parameter_set", doc(Collection::parameter_sets, ps.id)}});
    }
    if (pattern == "/simulators/{id}/plot_data" || pattern == "/parameter_sets/{id}/plot_data") {
      PlotQuery pq;
      if (pattern == "/simulators/{id}/plot_data") {
        pq.simulator_id = catalog_.resolve_simulator(p["id"]).id;
        if (auto b = param("base")) pq.base_parameter_set_id = *b;
      } else {
        auto ps = catalog_.parameter_set(p["id"]);
        pq.simulator_id = ps.simulator_id;
        pq.base_parameter_set_id = ps.id;
      }
      pq.x = param("x").value_or("");
      pq.y = param("y").value_or("");
      pq.reduce = param("reduce").value_or("mean");
      if (auto w = param("where")) {
        pq.where = json::parse(*w, nullptr, false);
        if (pq.where.is_discarded()) throw Error(ErrorCode::validation, "where must be a JSON object");
      }
      if (pq.x.empty()) throw Error(ErrorCode::validation, "x is required");
      auto rows = plot_data(catalog_, pq);
      const auto format = param("format").value_or("json");
      if (format == "csv") return {200, plot_csv(rows), "text/csv"};
      if (format != "json") throw Error(ErrorCode::validation, "format must be json or csv");
      return reply(200, plot_json(rows));
    }

    if (pattern == "/parameter_sets/{id}") return reply(200, doc(Collection::parameter_sets, p["id"]));
    if (pattern == "/parameter_sets/{id}/runs") {
      doc(Collection::parameter_sets, p["id"]);
      auto query = list_query(q);
      if (!q.count("sort")) query.sort_by = "seed";
      query.where("parameter_set_id", p["id"]);
      return reply(200, listing(docs.query(Collection::runs, query)));
    }
    if (pattern == "/parameter_sets/{id}/runs_upto") {
      auto ps = catalog_.parameter_set(p["id"]);
      auto body = parse_body(req);
      if (!body.is_object() || !body.contains("target") || !body["target"].is_number_integer()) {
        throw Error(ErrorCode::validation, "target must be a positive integer");
      }
      if (!body.contains("host") || !body["host"].is_string()) {
        throw Error(ErrorCode::validation, "host is required");
      }
      const auto before = catalog_.runs_of(ps.id).size();
      auto runs = catalog_.find_or_create_runs_upto(ps, body["target"].get<int>(),
                                                    body["host"].get<std::string>());
      json out = json::array();
      for (const auto& r : runs) out.push_back(doc(Collection::runs, r.id));
      const auto created = runs.size() - std::min(before, runs.size());
      return reply(created ? 201 : 200, {{"created", created}, {"runs", out}});
    }

    if (pattern == "/runs") return reply(200, listing(docs.query(Collection::runs, list_query(q))));
    if (pattern == "/runs/{id}") {
      if (route->method == "DELETE") {
        catalog_.delete_run(p["id"]);
        return reply(200, {{"deleted", p["id"]}});
      }
      return reply(200, doc(Collection::runs, p["id"]));
    }
    if (pattern == "/runs/{id}/cancel") {
      auto h = catalog_.cancel(JobKind::run, p["id"]);
      return reply(200, h.doc);
    }
    if (pattern == "/analyses/{id}/cancel") {
      auto h = catalog_.cancel(JobKind::analysis, p["id"]);
      return reply(200, h.doc);
    }
    if (pattern == "/runs/{id}/files" || pattern == "/analyses/{id}/files" ||
        pattern == "/runs/{id}/files/{path*}" || pattern == "/analyses/{id}/files/{path*}") {
      const auto kind = pattern.rfind("/runs", 0) == 0 ? JobKind::run : JobKind::analysis;
      auto h = catalog_.load_job(kind, p["id"]);
      if (!h.job.result_dir) throw Error(ErrorCode::not_found, "no results for " + h.id);
      const auto root = catalog_.files().absolute(*h.job.result_dir);
      if (!p.count("path")) return reply(200, json(files_listing(root)));
      fs::path file;
      try {
        file = catalog_.files().absolute(*h.job.result_dir + "/" + p["path"]);
      } catch (const Error&) {
        throw Error(ErrorCode::not_found, "no such file");
      }
      std::error_code ec;
      if (!fs::is_regular_file(file, ec)) throw Error(ErrorCode::not_found, "no such file: " + p["path"]);
      std::ifstream in(file, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return {200, ss.str(), "application/octet-stream"};
    }

    if (pattern == "/analyzers") {
      if (route->method == "GET") {
        return reply(200, listing(docs.query(Collection::analyzers, list_query(q))));
      }
      auto reg = catalog_.add_analyzer(parse_body(req).get<Analyzer>());
      auto out = doc(Collection::analyzers, reg.value.id);
      out["warnings"] = reg.warnings;
      return reply(201, out);
    }
    if (pattern == "/analyzers/{id}") return reply(200, doc(Collection::analyzers, p["id"]));
    if (pattern == "/analyses") {
      if (route->method == "GET") {
        return reply(200, listing(docs.query(Collection::analyses, list_query(q))));
      }
      auto body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::validation, "body must be a JSON object");
      for (const char* k : {"analyzer_id", "target_id", "host"}) {
        if (!body.contains(k) || !body[k].is_string()) {
          throw Error(ErrorCode::validation, std::string(k) + " is required");
        }
      }
      auto analyzer = catalog_.analyzer(body["analyzer_id"].get<std::string>());
      auto a = create_analysis(catalog_, analyzer, body["target_id"].get<std::string>(),
                               body.value("parameters", json::object()),
                               body["host"].get<std::string>());
      return reply(201, doc(Collection::analyses, a.id));
    }
    if (pattern == "/analyses/{id}") return reply(200, doc(Collection::analyses, p["id"]));
  } catch (const Error& e) {
    return error_reply(http_status(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_reply(422, "validation", e.what());
  }
  return error_reply(404, "not_found", "no route for " + req.path);
}

}  // namespace sweep
