#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace predinv::recipes {

// Built-in experiment configs, one per reproduced study.
std::vector<std::string> names();
nlohmann::json get(const std::string& name);

}  // namespace predinv::recipes
