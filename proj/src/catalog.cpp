#include "sweep/catalog.hpp"

#include <algorithm>
#include <set>

#include "sweep/errors.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

template <typename T>
std::vector<T> decode_all(const std::vector<json>& docs) {
  std::vector<T> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.get<T>());
  return out;
}

}  // namespace

std::string_view to_string(JobKind kind) { return kind == JobKind::run ? "run" : "analysis"; }

Collection collection_of(JobKind kind) {
  return kind == JobKind::run ? Collection::runs : Collection::analyses;
}

Catalog::Catalog(const fs::path& data_root, bool durable)
    : data_root_(data_root), documents_(data_root / "db", durable), files_(data_root / "files") {}

Host Catalog::add_host(Host host) {
  validate(host);
  host.id = documents_.new_id();
  host.created_at = now_iso8601();
  documents_.put(Collection::hosts, json(host));
  return host;
}

Host Catalog::host(std::string_view id) const {
  try {
    return documents_.get(Collection::hosts, id).get<Host>();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::not_found) {
      throw Error(ErrorCode::unknown_host, "unknown host '" + std::string(id) + "'");
    }
    throw;
  }
}

Host Catalog::resolve_host(std::string_view id_or_name) const {
  if (auto doc = documents_.find(Collection::hosts, id_or_name)) return doc->get<Host>();
  if (auto id = documents_.lookup(Collection::hosts, "name", json::array({id_or_name}))) {
    return host(*id);
  }
  throw Error(ErrorCode::unknown_host, "unknown host '" + std::string(id_or_name) + "'");
}

std::vector<Host> Catalog::hosts() const {
  return decode_all<Host>(documents_.query(Collection::hosts));
}

Registered<Simulator> Catalog::add_simulator(Simulator simulator) {
  validate(simulator);
  simulator.id = documents_.new_id();
  simulator.created_at = now_iso8601();
  documents_.put(Collection::simulators, json(simulator));
  return {simulator, reserved_name_warnings(simulator.command)};
}

Simulator Catalog::simulator(std::string_view id) const {
  return documents_.get(Collection::simulators, id).get<Simulator>();
}

Simulator Catalog::resolve_simulator(std::string_view id_or_name) const {
  if (auto doc = documents_.find(Collection::simulators, id_or_name)) return doc->get<Simulator>();
  if (auto id = documents_.lookup(Collection::simulators, "name", json::array({id_or_name}))) {
    return simulator(*id);
  }
  throw Error(ErrorCode::not_found, "simulator '" + std::string(id_or_name) + "' not found");
}

std::vector<Simulator> Catalog::simulators() const {
  return decode_all<Simulator>(documents_.query(Collection::simulators));
}

Simulator Catalog::update_parameter_definitions(std::string_view simulator_id,
                                                std::vector<ParameterDefinition> definitions) {
  auto sim = simulator(simulator_id);
  validate_definitions(definitions);
  if (documents_.count(Collection::parameter_sets,
                       Query{}.where("simulator_id", std::string(simulator_id))) > 0) {
    throw Error(ErrorCode::duplicate_key,
                "parameter definitions are frozen once the simulator has ParameterSets");
  }
  sim.parameter_definitions = std::move(definitions);
  documents_.replace(Collection::simulators, json(sim));
  return sim;
}

std::pair<ParameterSet, bool> Catalog::find_or_create_parameter_set(const Simulator& simulator,
                                                                    const json& values) {
  auto point = canonicalize(simulator.parameter_definitions, values);
  const json key = json::array({simulator.id, point.key});
  if (auto id = documents_.lookup(Collection::parameter_sets, "point", key)) {
    return {parameter_set(*id), false};
  }
  ParameterSet ps;
  ps.id = documents_.new_id();
  ps.simulator_id = simulator.id;
  ps.values = std::move(point.values);
  ps.canonical_key = point.key;
  ps.created_at = now_iso8601();
  try {
    documents_.put(Collection::parameter_sets, json(ps));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::duplicate_key) throw;
    if (auto id = documents_.lookup(Collection::parameter_sets, "point", key)) {
      return {parameter_set(*id), false};
    }
    throw;
  }
  return {ps, true};
}

ParameterSet Catalog::parameter_set(std::string_view id) const {
  return documents_.get(Collection::parameter_sets, id).get<ParameterSet>();
}

std::vector<ParameterSet> Catalog::parameter_sets(std::string_view simulator_id) const {
  return decode_all<ParameterSet>(documents_.query(
      Collection::parameter_sets, Query{}.where("simulator_id", std::string(simulator_id))));
}

std::vector<Run> Catalog::find_or_create_runs_upto(const ParameterSet& parameter_set,
                                                   int target_count, std::string_view host_id) {
  if (target_count < 1) throw Error(ErrorCode::validation, "target count must be positive");
  auto target_host = resolve_host(host_id);
  for (;;) {
    auto siblings = runs_of(parameter_set.id);
    if (siblings.size() >= static_cast<std::size_t>(target_count)) return siblings;
    std::set<std::int64_t> used;
    for (const auto& r : siblings) used.insert(r.seed);
    std::int64_t seed = 0;
    while (used.contains(seed)) ++seed;

    Run run;
    run.id = documents_.new_id();
    run.parameter_set_id = parameter_set.id;
    run.simulator_id = parameter_set.simulator_id;
    run.seed = seed;
    run.created_at = now_iso8601();
    run.job.host_id = target_host.id;
    try {
      documents_.put(Collection::runs, json(run));
    } catch (const Error& e) {
      // Another writer took this seed; recount and retry.
      if (e.code() != ErrorCode::duplicate_key) throw;
    }
  }
}

Run Catalog::run(std::string_view id) const {
  return documents_.get(Collection::runs, id).get<Run>();
}

std::vector<Run> Catalog::runs(const Query& query) const {
  return decode_all<Run>(documents_.query(Collection::runs, query));
}

std::vector<Run> Catalog::runs_of(std::string_view parameter_set_id) const {
  Query q;
  q.where("parameter_set_id", std::string(parameter_set_id));
  q.sort_by = "seed";
  return runs(q);
}

Registered<Analyzer> Catalog::add_analyzer(Analyzer analyzer) {
  validate(analyzer);
  simulator(analyzer.simulator_id);
  analyzer.id = documents_.new_id();
  analyzer.created_at = now_iso8601();
  documents_.put(Collection::analyzers, json(analyzer));
  return {analyzer, reserved_name_warnings(analyzer.command)};
}

Analyzer Catalog::analyzer(std::string_view id) const {
  return documents_.get(Collection::analyzers, id).get<Analyzer>();
}

std::vector<Analyzer> Catalog::analyzers(std::optional<std::string> simulator_id) const {
  Query q;
  if (simulator_id) q.where("simulator_id", *simulator_id);
  return decode_all<Analyzer>(documents_.query(Collection::analyzers, q));
}

Analysis Catalog::analysis(std::string_view id) const {
  return documents_.get(Collection::analyses, id).get<Analysis>();
}

std::vector<Analysis> Catalog::analyses(const Query& query) const {
  return decode_all<Analysis>(documents_.query(Collection::analyses, query));
}

JobHandle Catalog::load_job(JobKind kind, std::string_view id) const {
  JobHandle h;
  h.kind = kind;
  h.doc = documents_.get(collection_of(kind), id);
  h.id = h.doc.at("id").get<std::string>();
  h.revision = h.doc.value("_rev", std::int64_t{0});
  h.job = h.doc.get<JobRecord>();
  return h;
}

std::vector<JobHandle> Catalog::jobs(JobKind kind, const Query& query) const {
  std::vector<JobHandle> out;
  for (auto& doc : documents_.query(collection_of(kind), query)) {
    JobHandle h;
    h.kind = kind;
    h.id = doc.at("id").get<std::string>();
    h.revision = doc.value("_rev", std::int64_t{0});
    h.job = doc.get<JobRecord>();
    h.doc = std::move(doc);
    out.push_back(std::move(h));
  }
  return out;
}

bool Catalog::update_job(JobHandle& handle, const JobRecord& next) {
  json doc = handle.doc;
  to_json(doc, next);
  if (!documents_.cas_revision(collection_of(handle.kind), handle.id, handle.revision, doc)) {
    return false;
  }
  handle.doc = std::move(doc);
  handle.revision += 1;
  handle.doc["_rev"] = handle.revision;
  handle.job = next;
  return true;
}

bool Catalog::apply(JobHandle& handle, const Event& event) {
  return update_job(handle, transition(handle.job, event));
}

JobHandle Catalog::cancel(JobKind kind, std::string_view id) {
  for (;;) {
    auto h = load_job(kind, id);
    auto next = transition(h.job, Event::cancelled());
    next.lease.reset();
    if (update_job(h, next)) return h;
  }
}

void Catalog::delete_run(std::string_view id) {
  auto r = run(id);
  if (r.job.status == JobStatus::submitted || r.job.status == JobStatus::running) {
    throw Error(ErrorCode::illegal_transition, "cannot delete a run in status " +
                                                   std::string(to_string(r.job.status)));
  }
  if (r.job.result_dir) files_.remove(*r.job.result_dir);
  documents_.remove(Collection::runs, id);
}

fs::path Catalog::reserve_result_dir(const Run& run) {
  return files_.reserve(FileStore::run_dir(run.simulator_id, run.parameter_set_id, run.id));
}

Run Catalog::seal_result_dir(const Run& run) {
  auto rel = FileStore::run_dir(run.simulator_id, run.parameter_set_id, run.id);
  auto digest = files_.seal(rel);
  for (;;) {
    auto h = load_job(JobKind::run, run.id);
    auto next = h.job;
    next.result_dir = rel;
    next.result_digest = digest;
    if (update_job(h, next)) return h.doc.get<Run>();
  }
}

std::string Catalog::result_dir_for(const JobHandle& handle) const {
  const auto sim = handle.doc.value("simulator_id", std::string());
  const auto ps = handle.doc.value("parameter_set_id", std::string());
  return handle.kind == JobKind::run ? FileStore::run_dir(sim, ps, handle.id)
                                     : FileStore::analysis_dir(sim, ps, handle.id);
}

}  // namespace sweep
