#pragma once

#include "predinv/models/models.hpp"
#include "predinv/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace predinv::attacks {

using nlohmann::json;

// Image priors and schedule of the optimization-based inversion baseline.
struct MiaPriorConfig {
    float alpha = 6.0f;         // norm exponent of the alpha-norm prior
    float alpha_weight = 1e-5f;
    float tv_beta = 2.0f;       // exponent of the total-variation prior
    float tv_weight = 1e-4f;
    int steps = 1000;
    float step_size = 0.1f;
    bool clamp = true;          // project to [0,1] after every step
    std::string loss = "cross-entropy";  // or "l2" against the one-hot target
    std::string init = "gray";           // or "noise"

    void validate() const;
    json to_json() const;
    static MiaPriorConfig from_json(const json& j);
};

struct AttackResult {
    Tensor images;                        // reconstructed, pixels in [0,1]
    std::vector<std::string> target_ids;  // sample ids or class names
    std::vector<int> target_classes;      // class indices when the target is a class
    std::vector<double> metrics;          // per-item MSE or target confidence
    json meta;
};

// Scenario-1 entry point: truncated prediction rows in, images out. Consumes
// only the inversion model; never touches classifier parameters.
AttackResult reconstruct(const models::InversionModel& inv, const Mat& observed,
                         std::optional<bool> rescale = std::nullopt);

// Scenario-2 entry point: one representative image per class from one-hot
// vectors scaled by `confidence`.
AttackResult infer_classes(const models::InversionModel& inv, int k, float confidence = 1.0f);

// White-box optimization baseline: gradient-descends an image toward a target
// class under alpha-norm and total-variation priors.
AttackResult mia_invert(const models::Classifier& classifier, int target_class,
                        const MiaPriorConfig& prior, std::uint64_t seed);

// Total-variation penalty; neighbor terms falling off the bottom/right border
// are omitted.
double tv_penalty(const float* image, int h, int w, float beta = 2.0f);
double tv_penalty(const Tensor& single_image, float beta = 2.0f);

// d tv_penalty / d image, accumulated into grad (same layout as image).
void tv_penalty_grad(const float* image, int h, int w, float beta, float weight, float* grad);

}  // namespace predinv::attacks
