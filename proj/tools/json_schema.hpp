#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace slogan::cli {

struct SchemaIssue {
    std::string pointer;  // JSON pointer into the instance, "" for the root
    std::string message;
};

/// Validates `instance` against the subset of JSON Schema used by the shipped
/// schemas: type, enum, properties, required, additionalProperties (boolean),
/// items, minItems, maxItems, minLength, minimum, maximum, exclusiveMinimum,
/// exclusiveMaximum and local "$ref" into "#/$defs/...". Any other keyword in
/// the schema is rejected with std::invalid_argument so that a schema edit can
/// not silently weaken validation.
std::vector<SchemaIssue> validate_schema(const nlohmann::json& schema, const nlohmann::json& instance);

}  // namespace slogan::cli
