#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sweep/catalog.hpp"
#include "sweep/executor.hpp"

namespace sweep {

/// Persists a new Analysis (status created) for `target_id`, which must be a
/// finished Run (on_run) or a ParameterSet with at least one finished Run
/// (on_parameter_set). Throws Error(scope_mismatch) or
/// Error(target_not_ready).
Analysis create_analysis(Catalog& catalog, const Analyzer& analyzer, std::string_view target_id,
                         const json& parameters, std::string_view host);

/// Runs whose results an Analysis consumes right now: the target Run, or
/// every finished Run of the target ParameterSet (failed ones excluded).
std::vector<Run> analysis_inputs(const Catalog& catalog, const Analysis& analysis);

std::string render_analyzer_command(const Analyzer& analyzer, const Analysis& analysis);

/// Plan for running an Analysis; its `_input.json` carries the analyzer
/// parameters plus "_run_ids", and each input Run's result directory is
/// staged under `_input/<run id>/`.
JobPlan analysis_plan(const Catalog& catalog, const Analysis& analysis);

/// Stages the inputs of `analysis` into `work_dir` and returns the run ids
/// included.
std::vector<std::string> stage_analysis_input(Transport& transport, const Catalog& catalog,
                                              const Analysis& analysis,
                                              const std::string& work_dir);

}  // namespace sweep
