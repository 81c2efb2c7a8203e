#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sweep/catalog.hpp"

namespace sweep {

struct PlotQuery {
  std::string simulator_id;
  std::string x;
  std::string y;
  std::string reduce = "mean";
  /// Keep only ParameterSets agreeing with this one on every parameter but x.
  std::optional<std::string> base_parameter_set_id;
  /// Parameter name -> required value.
  json where = json::object();
};

/// One point per ParameterSet: y aggregated over its finished Runs.
struct PlotRow {
  ParameterValue x;
  std::optional<double> mean;
  std::optional<double> stderr_of_mean;
  int n = 0;
  int excluded = 0;
  std::string parameter_set_id;
};

/// Scalar outputs are read from "_output.json" in each finished Run's
/// result directory; Runs lacking a numeric y are counted as excluded.
/// Rows are ordered by x, then ParameterSet id.
std::vector<PlotRow> plot_data(const Catalog& catalog, const PlotQuery& query);

/// Header "x,y_mean,y_stderr,n,excluded,parameter_set_id". The standard
/// error is empty for n = 1 and every statistic is empty for n = 0.
std::string plot_csv(const std::vector<PlotRow>& rows);
json plot_json(const std::vector<PlotRow>& rows);

}  // namespace sweep
