#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace predinv::runner {

using nlohmann::json;

struct StageOutcome {
    std::string name;
    bool skipped = false;  // outputs existed with matching fingerprints
};

struct RunSummary {
    std::string output_dir;
    std::vector<StageOutcome> stages;

    bool ran(const std::string& name) const;
};

// Executes the experiment's stage graph idempotently. Stage ids:
//   data, classifier, inversion:<arm>, joint,
//   attack:reconstruct, attack:classinfer, attack:mia, report
// An empty filter runs every stage the config declares, in that order.
RunSummary run(const json& cfg_raw, const std::vector<std::string>& only = {});

}  // namespace predinv::runner
