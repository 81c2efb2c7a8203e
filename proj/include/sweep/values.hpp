#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace sweep {

using json = nlohmann::json;

enum class ParameterKind { integer, floating, string, boolean };

std::string_view to_string(ParameterKind kind);
ParameterKind parse_parameter_kind(std::string_view text);

/// One scalar parameter value. Nested structures are not representable.
using ParameterValue = std::variant<std::int64_t, double, std::string, bool>;

/// Complete parameter assignment, ordered by name.
using ValueMap = std::map<std::string, ParameterValue>;

struct ParameterDefinition {
  std::string name;
  ParameterKind kind = ParameterKind::floating;
  std::optional<ParameterValue> default_value;
  std::string description;
  int position = 0;

  friend bool operator==(const ParameterDefinition&, const ParameterDefinition&) = default;
};

/// Shortest round-trip decimal; integral results keep a trailing ".0".
std::string render_float(double value);

/// Locale-independent text form used for command lines and CSV output.
/// Strings are returned verbatim (callers quote as needed).
std::string render_value(const ParameterValue& value);

json value_to_json(const ParameterValue& value);

/// Converts `value` to a parameter of `kind`. Integer literals are accepted
/// for floating kind when exactly representable; anything else that does not
/// match throws Error(type_mismatch).
ParameterValue value_from_json(const json& value, ParameterKind kind, std::string_view name);

json values_to_json(const ValueMap& values);

/// Rejects duplicate or malformed names, non-contiguous positions and
/// defaults that do not type-check. Throws Error(validation).
void validate_definitions(std::span<const ParameterDefinition> definitions);

/// Definitions sorted by position.
std::vector<ParameterDefinition> by_position(std::span<const ParameterDefinition> definitions);

struct CanonicalPoint {
  ValueMap values;
  std::string key;
};

/// Fills defaults, type-checks every provided value and derives the canonical
/// key "name=value;..." over names in byte order.
CanonicalPoint canonicalize(std::span<const ParameterDefinition> definitions, const json& provided);

std::string canonical_key(const ValueMap& values);

bool is_identifier(std::string_view name);

void to_json(json& j, const ParameterDefinition& d);
void from_json(const json& j, ParameterDefinition& d);

}  // namespace sweep
