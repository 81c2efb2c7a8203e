#include "sweep/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

std::optional<double> read_output(const Catalog& catalog, const Run& run, const std::string& key) {
  if (!run.job.result_dir) return std::nullopt;
  std::ifstream in(catalog.files().absolute(*run.job.result_dir) / std::string(kOutputFile));
  if (!in) return std::nullopt;
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_number()) return std::nullopt;
  double v = it->get<double>();
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

bool x_less(const ParameterValue& a, const ParameterValue& b) {
  auto num = [](const ParameterValue& v) -> std::optional<double> {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
    return std::nullopt;
  };
  auto na = num(a), nb = num(b);
  if (na && nb) return *na < *nb;
  if (na != nb) return na.has_value();
  return render_value(a) < render_value(b);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<PlotRow> plot_data(const Catalog& catalog, const PlotQuery& query) {
  if (query.reduce != "mean") {
    throw Error(ErrorCode::validation, "unsupported reduce '" + query.reduce + "' (only mean)");
  }
  if (query.y.empty()) throw Error(ErrorCode::validation, "y output key is required");
  auto sim = catalog.simulator(query.simulator_id);
  const ParameterDefinition* xdef = nullptr;
  for (const auto& d : sim.parameter_definitions) {
    if (d.name == query.x) xdef = &d;
  }
  if (!xdef) throw Error(ErrorCode::unknown_parameter, "unknown x parameter '" + query.x + "'");

  ValueMap fixed;
  if (query.base_parameter_set_id) {
    auto base = catalog.parameter_set(*query.base_parameter_set_id);
    if (base.simulator_id != sim.id) {
      throw Error(ErrorCode::validation, "base ParameterSet belongs to another simulator");
    }
    fixed = base.values;
    fixed.erase(query.x);
  }
  if (!query.where.is_null()) {
    if (!query.where.is_object()) throw Error(ErrorCode::validation, "where must be an object");
    for (const auto& [name, value] : query.where.items()) {
      auto it = std::find_if(sim.parameter_definitions.begin(), sim.parameter_definitions.end(),
                             [&](const ParameterDefinition& d) { return d.name == name; });
      if (it == sim.parameter_definitions.end()) {
        throw Error(ErrorCode::unknown_parameter, "unknown parameter '" + name + "'");
      }
      fixed[name] = value_from_json(value, it->kind, name);
    }
  }

  std::vector<PlotRow> rows;
  for (const auto& ps : catalog.parameter_sets(sim.id)) {
    bool keep = true;
    for (const auto& [name, value] : fixed) {
      auto it = ps.values.find(name);
      if (it == ps.values.end() || render_value(it->second) != render_value(value)) keep = false;
    }
    if (!keep || !ps.values.count(query.x)) continue;

    PlotRow row;
    row.x = ps.values.at(query.x);
    row.parameter_set_id = ps.id;
    std::vector<double> ys;
    for (const auto& run : catalog.runs_of(ps.id)) {
      if (run.job.status != JobStatus::finished) continue;
      if (auto y = read_output(catalog, run, query.y)) {
        ys.push_back(*y);
      } else {
        ++row.excluded;
      }
    }
    row.n = static_cast<int>(ys.size());
    if (!ys.empty()) {
      double sum = 0;
      for (double v : ys) sum += v;
      const double mean = sum / static_cast<double>(ys.size());
      row.mean = mean;
      if (ys.size() > 1) {
        double ss = 0;
        for (double v : ys) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(ys.size() - 1));
        row.stderr_of_mean = sd / std::sqrt(static_cast<double>(ys.size()));
      }
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const PlotRow& a, const PlotRow& b) {
    if (x_less(a.x, b.x)) return true;
    if (x_less(b.x, a.x)) return false;
    return a.parameter_set_id < b.parameter_set_id;
  });
  return rows;
}

std::string plot_csv(const std::vector<PlotRow>& rows) {
  std::string out = "x,y_mean,y_stderr,n,excluded,parameter_set_id\n";
  for (const auto& r : rows) {
    out += csv_field(render_value(r.x));
    out += ',';
    if (r.mean) out += render_float(*r.mean);
    out += ',';
    if (r.stderr_of_mean) out += render_float(*r.stderr_of_mean);
    out += ',' + std::to_string(r.n) + ',' + std::to_string(r.excluded) + ',' +
           csv_field(r.parameter_set_id) + '\n';
  }
  return out;
}

json plot_json(const std::vector<PlotRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row = {{"x", value_to_json(r.x)},
                {"n", r.n},
                {"excluded", r.excluded},
                {"parameter_set_id", r.parameter_set_id}};
    row["y_mean"] = r.mean ? json(*r.mean) : json(nullptr);
    row["y_stderr"] = r.stderr_of_mean ? json(*r.stderr_of_mean) : json(nullptr);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace sweep
