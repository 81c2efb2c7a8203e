#include "sweep/analysis.hpp"

#include "sweep/errors.hpp"

namespace sweep {

Analysis create_analysis(Catalog& catalog, const Analyzer& analyzer, std::string_view target_id,
                         const json& parameters, std::string_view host) {
  auto& docs = catalog.documents();
  const bool is_run = docs.find(Collection::runs, target_id).has_value();
  const bool is_ps = !is_run && docs.find(Collection::parameter_sets, target_id).has_value();
  if (!is_run && !is_ps) {
    throw Error(ErrorCode::not_found, "analysis target '" + std::string(target_id) + "' not found");
  }
  if ((analyzer.scope == AnalyzerScope::on_run) != is_run) {
    throw Error(ErrorCode::scope_mismatch, "analyzer '" + analyzer.name + "' is " +
                                               std::string(to_string(analyzer.scope)) +
                                               " but the target is a " +
                                               (is_run ? "Run" : "ParameterSet"));
  }

  Analysis analysis;
  analysis.analyzer_id = analyzer.id;
  analysis.scope = analyzer.scope;
  analysis.target_id = std::string(target_id);
  if (is_run) {
    auto run = catalog.run(target_id);
    analysis.parameter_set_id = run.parameter_set_id;
    analysis.simulator_id = run.simulator_id;
  } else {
    auto ps = catalog.parameter_set(target_id);
    analysis.parameter_set_id = ps.id;
    analysis.simulator_id = ps.simulator_id;
  }
  if (analysis.simulator_id != analyzer.simulator_id) {
    throw Error(ErrorCode::scope_mismatch, "target belongs to a different simulator");
  }
  auto inputs = analysis_inputs(catalog, analysis);
  if (inputs.empty()) {
    throw Error(ErrorCode::target_not_ready,
                is_run ? "target Run is not finished" : "target ParameterSet has no finished Run");
  }
  for (const auto& r : inputs) analysis.input_run_ids.push_back(r.id);
  analysis.parameters = canonicalize(analyzer.parameter_definitions, parameters).values;
  analysis.job.host_id = catalog.resolve_host(host).id;
  analysis.id = catalog.documents().new_id();
  analysis.created_at = now_iso8601();
  catalog.documents().put(Collection::analyses, json(analysis));
  return analysis;
}

std::vector<Run> analysis_inputs(const Catalog& catalog, const Analysis& analysis) {
  std::vector<Run> out;
  if (analysis.scope == AnalyzerScope::on_run) {
    auto run = catalog.run(analysis.target_id);
    if (run.job.status == JobStatus::finished && run.job.result_dir) out.push_back(run);
    return out;
  }
  for (auto& run : catalog.runs_of(analysis.target_id)) {
    if (run.job.status == JobStatus::finished && run.job.result_dir) out.push_back(std::move(run));
  }
  return out;
}

std::string render_analyzer_command(const Analyzer& analyzer, const Analysis& analysis) {
  std::string line = analyzer.command;
  if (analyzer.input_mode == InputMode::json_file) return line;
  for (const auto& def : by_position(analyzer.parameter_definitions)) {
    auto it = analysis.parameters.find(def.name);
    if (it == analysis.parameters.end()) continue;
    line += ' ';
    line += shell_quote(render_value(it->second));
  }
  return line;
}

JobPlan analysis_plan(const Catalog& catalog, const Analysis& analysis) {
  auto analyzer = catalog.analyzer(analysis.analyzer_id);
  JobPlan plan;
  plan.kind = JobKind::analysis;
  plan.id = analysis.id;
  plan.command_line = render_analyzer_command(analyzer, analysis);
  plan.print_version_command = analyzer.print_version_command;
  plan.result_dir =
      FileStore::analysis_dir(analysis.simulator_id, analysis.parameter_set_id, analysis.id);
  json input = values_to_json(analysis.parameters);
  json ids = json::array();
  for (const auto& run : analysis_inputs(catalog, analysis)) {
    ids.push_back(run.id);
    plan.input_trees.emplace_back(run.id, catalog.files().absolute(*run.job.result_dir));
  }
  input["_run_ids"] = ids;
  plan.input = input;
  return plan;
}

std::vector<std::string> stage_analysis_input(Transport& transport, const Catalog& catalog,
                                              const Analysis& analysis,
                                              const std::string& work_dir) {
  auto plan = analysis_plan(catalog, analysis);
  stage_input(transport, plan, work_dir);
  std::vector<std::string> ids;
  for (const auto& [id, _] : plan.input_trees) ids.push_back(id);
  return ids;
}

}  // namespace sweep
