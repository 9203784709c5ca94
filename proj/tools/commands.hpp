#pragma once

#include <optional>
#include <string>
#include <vector>

#include "io.hpp"

namespace modsensor::cli {

inline const char* tool_version() { return MODSENSOR_VERSION; }

// What a subcommand hands back to the dispatcher.
struct CommandOutput {
  Json summary = Json::object();
  std::optional<CsvTable> table;  // written to --output when present
};

struct Command {
  std::string name;
  std::string help;
  Json defaults;  // every accepted key with its default; types are enforced on merge
  CommandOutput (*run)(const Json& config);
};

const std::vector<Command>& commands();
const Command& find_command(const std::string& name);

// Overlays `patch` on `base`, rejecting unknown keys and type changes.
void merge_config(Json& base, const Json& patch, const std::string& source);

}  // namespace modsensor::cli
