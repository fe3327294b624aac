#pragma once

#include "predinv/attacks/attacks.hpp"
#include "predinv/data/dataset.hpp"
#include "predinv/models/models.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace predinv::eval {

using nlohmann::json;

// First-index argmax; the tie rule shared with truncation.
int argmax_row(const float* v, int k);

// Fraction of samples whose argmax prediction equals the label.
double accuracy(const models::Classifier& classifier, const data::Dataset& ds, int batch_size = 256);

// Mean over samples of squared L2 distance under the stated reduction
// ("per-pixel-mean" or "per-image-sum").
double reconstruction_mse(const Tensor& truth, const Tensor& recon, const std::string& reduction);

// Fraction of attack outputs the classifier assigns to the intended class.
double attack_success_rate(const models::Classifier& classifier, const attacks::AttackResult& result);

struct MetricsReport {
    std::string experiment;
    std::string split;                    // which data split the numbers describe
    std::uint64_t seed = 0;
    std::string config_fingerprint;
    json values;                          // named metric -> number
    json conditions;                      // m, k, auxiliary kind, reduction tags

    json to_json() const;
    static MetricsReport from_json(const json& j);
};

// Markdown table + JSON next to each other; returns the file paths written.
std::vector<std::string> emit_report(const std::vector<MetricsReport>& metrics,
                                     const std::string& out_dir, const std::string& layout = "table");

}  // namespace predinv::eval
