#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace predinv::config {

using nlohmann::json;

struct Diagnostic {
    std::string path;     // dotted field path
    std::string message;
};

// Reads and parses a config file; parse errors carry line and column.
json load_config_file(const std::string& path);

// Full structural + cross-field validation without executing anything.
std::vector<Diagnostic> validate(const json& cfg);

// Materializes every defaulted field so the emitted config is self-describing.
// Throws ValidationError when validate() would report diagnostics.
json resolve(const json& cfg);

// Stable hex fingerprint of a JSON value (canonical dump, FNV-1a).
std::string fingerprint(const json& j);

}  // namespace predinv::config
