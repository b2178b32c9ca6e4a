#pragma once

// Scenario documents (JSON) and their resolution into ScenarioConfig.
//
// A document is kept as a tree until resolution so that `--set key=value`
// overrides and sweep grid points can be written into it first. Resolution
// expands user generators and relative event payloads into absolute values;
// serialize_scenario writes that resolved form back out, and parsing it again
// yields the same configuration.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "netopt/runner.hpp"

namespace netopt::io {

using Json = nlohmann::ordered_json;

struct ScenarioDocument {
  Json tree;
  /// File name or other label used in diagnostics.
  std::string origin;
};

/// Parses JSON text; syntax errors carry line and column.
ScenarioDocument parse_document(std::string_view text, std::string origin = "<input>");
ScenarioDocument read_document(const std::filesystem::path& path);

/// Writes `value` at a dotted path ("system.V", "events.0.capacity").
/// Numeric segments index arrays. Missing object keys are created.
void set_value(ScenarioDocument& doc, std::string_view key, Json value);

/// "key=value": the value is read as JSON when it parses, else as a string.
void apply_override(ScenarioDocument& doc, std::string_view assignment);

/// Builds and validates the configuration. Errors name the offending field.
ScenarioConfig resolve(const ScenarioDocument& doc);

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Fully resolved document: explicit users, absolute event payloads.
Json to_json(const ScenarioConfig& cfg);
std::string serialize_scenario(const ScenarioConfig& cfg);

}  // namespace netopt::io
