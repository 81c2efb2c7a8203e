#include "sweep/values.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

constexpr std::int64_t kMaxExactInteger = std::int64_t{1} << 53;

[[noreturn]] void mismatch(std::string_view name, std::string_view expected, const json& got) {
  throw Error(ErrorCode::type_mismatch, "parameter '" + std::string(name) + "' expects " +
                                            std::string(expected) + ", got " + got.dump());
}

}  // namespace

std::string_view to_string(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::integer: return "integer";
    case ParameterKind::floating: return "float";
    case ParameterKind::string: return "string";
    case ParameterKind::boolean: return "boolean";
  }
  return "float";
}

ParameterKind parse_parameter_kind(std::string_view text) {
  if (text == "integer") return ParameterKind::integer;
  if (text == "float") return ParameterKind::floating;
  if (text == "string") return ParameterKind::string;
  if (text == "boolean") return ParameterKind::boolean;
  throw Error(ErrorCode::validation, "unknown parameter kind '" + std::string(text) + "'");
}

std::string render_float(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::string out(buf, end);
  if (std::isfinite(value) &&
      out.find_first_of(".e") == std::string::npos) {
    out += ".0";
  }
  return out;
}

std::string render_value(const ParameterValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return render_float(v);
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else {
          return v;
        }
      },
      value);
}

json value_to_json(const ParameterValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

ParameterValue value_from_json(const json& value, ParameterKind kind, std::string_view name) {
  switch (kind) {
    case ParameterKind::integer:
      if (value.is_number_integer()) {
        if (value.is_number_unsigned() &&
            value.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
          mismatch(name, "integer", value);
        }
        return value.get<std::int64_t>();
      }
      mismatch(name, "integer", value);
    case ParameterKind::floating:
      if (value.is_number_float()) {
        double d = value.get<double>();
        if (!std::isfinite(d)) mismatch(name, "finite float", value);
        return d;
      }
      if (value.is_number_integer()) {
        if (value.is_number_unsigned()) {
          auto u = value.get<std::uint64_t>();
          if (u > static_cast<std::uint64_t>(kMaxExactInteger)) mismatch(name, "float", value);
          return static_cast<double>(u);
        }
        auto i = value.get<std::int64_t>();
        if (i > kMaxExactInteger || i < -kMaxExactInteger) mismatch(name, "float", value);
        return static_cast<double>(i);
      }
      mismatch(name, "float", value);
    case ParameterKind::string:
      if (value.is_string()) return value.get<std::string>();
      mismatch(name, "string", value);
    case ParameterKind::boolean:
      if (value.is_boolean()) return value.get<bool>();
      mismatch(name, "boolean", value);
  }
  mismatch(name, "scalar", value);
}

json values_to_json(const ValueMap& values) {
  json out = json::object();
  for (const auto& [name, value] : values) out[name] = value_to_json(value);
  return out;
}

bool is_identifier(std::string_view name) {
  if (name.empty() || name.size() > 128) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(name.front())) return false;
  return std::all_of(name.begin(), name.end(),
                     [&](char c) { return alpha(c) || digit(c) || c == '_'; });
}

void validate_definitions(std::span<const ParameterDefinition> definitions) {
  std::set<std::string> names;
  std::vector<int> positions;
  for (const auto& d : definitions) {
    if (!is_identifier(d.name)) {
      throw Error(ErrorCode::validation,
                  "parameter name '" + d.name + "' must match [A-Za-z][A-Za-z0-9_]*");
    }
    if (!names.insert(d.name).second) {
      throw Error(ErrorCode::validation, "duplicate parameter name '" + d.name + "'");
    }
    if (d.default_value) {
      bool ok = std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            switch (d.kind) {
              case ParameterKind::integer: return std::is_same_v<T, std::int64_t>;
              case ParameterKind::floating: return std::is_same_v<T, double>;
              case ParameterKind::string: return std::is_same_v<T, std::string>;
              case ParameterKind::boolean: return std::is_same_v<T, bool>;
            }
            return false;
          },
          *d.default_value);
      if (!ok) {
        throw Error(ErrorCode::validation, "default of '" + d.name + "' does not match its kind");
      }
    }
    positions.push_back(d.position);
  }
  std::sort(positions.begin(), positions.end());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] != static_cast<int>(i)) {
      throw Error(ErrorCode::validation, "parameter positions must form 0..n-1");
    }
  }
}

std::vector<ParameterDefinition> by_position(std::span<const ParameterDefinition> definitions) {
  std::vector<ParameterDefinition> out(definitions.begin(), definitions.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.position < b.position; });
  return out;
}

std::string canonical_key(const ValueMap& values) {
  std::string key;
  for (const auto& [name, value] : values) {
    if (!key.empty()) key += ';';
    key += name;
    key += '=';
    if (const auto* s = std::get_if<std::string>(&value)) {
      key += json(*s).dump();
    } else {
      key += render_value(value);
    }
  }
  return key;
}

CanonicalPoint canonicalize(std::span<const ParameterDefinition> definitions, const json& provided) {
  if (!provided.is_null() && !provided.is_object()) {
    throw Error(ErrorCode::type_mismatch, "parameter values must be a JSON object");
  }
  std::map<std::string, const ParameterDefinition*> by_name;
  for (const auto& d : definitions) by_name.emplace(d.name, &d);

  if (provided.is_object()) {
    for (const auto& [name, _] : provided.items()) {
      if (!by_name.contains(name)) {
        throw Error(ErrorCode::unknown_parameter, "unknown parameter '" + name + "'");
      }
    }
  }

  CanonicalPoint point;
  for (const auto& [name, def] : by_name) {
    if (provided.is_object() && provided.contains(name)) {
      point.values.emplace(name, value_from_json(provided.at(name), def->kind, name));
    } else if (def->default_value) {
      point.values.emplace(name, *def->default_value);
    } else {
      throw Error(ErrorCode::missing_parameter,
                  "parameter '" + name + "' has no default and was not provided");
    }
  }
  point.key = canonical_key(point.values);
  return point;
}

void to_json(json& j, const ParameterDefinition& d) {
  j = json{{"name", d.name},
           {"kind", to_string(d.kind)},
           {"description", d.description},
           {"position", d.position}};
  j["default"] = d.default_value ? value_to_json(*d.default_value) : json(nullptr);
}

void from_json(const json& j, ParameterDefinition& d) {
  d.name = j.at("name").get<std::string>();
  d.kind = parse_parameter_kind(j.value("kind", std::string("float")));
  d.description = j.value("description", std::string());
  d.position = j.value("position", 0);
  d.default_value.reset();
  if (j.contains("default") && !j.at("default").is_null()) {
    try {
      d.default_value = value_from_json(j.at("default"), d.kind, d.name);
    } catch (const Error& e) {
      throw Error(ErrorCode::validation, std::string("invalid default: ") + e.what());
    }
  }
}

}  // namespace sweep
