#pragma once

#include "predinv/data/dataset.hpp"
#include "predinv/models/models.hpp"
#include "predinv/oracle/oracle.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace predinv::train {

using nlohmann::json;

struct TrainConfig {
    int epochs = 50;
    int batch_size = 128;
    float learning_rate = 1e-3f;
    float weight_decay = 0.0f;  // L2 penalty factor on weight matrices
    std::uint64_t seed = 0;
    int m = 0;                  // truncation level for inversion regimes; 0 = full vectors
    float joint_weight = 1.0f;  // reconstruction weight in joint training
    std::string optimizer = "adam";
    bool rescale_inputs = true;            // feed log-rescaled predictions to the decoder
    std::string recon_reduction = "per-pixel-mean";
    bool check_descent = true;  // abort when early epochs do not descend
    bool quiet = false;         // suppress per-epoch progress lines
    int threads = 0;

    void validate() const;
    json to_json() const;
    static TrainConfig from_json(const json& j);
};

struct TrainReport {
    std::vector<double> cls_loss;
    std::vector<double> recon_loss;
    std::vector<double> test_accuracy;
    double wall_seconds = 0.0;
    json final_metrics;

    json to_json() const;
};

std::pair<models::Classifier, TrainReport> train_classifier(const models::ClassifierSpec& spec,
                                                            const data::Dataset& train_set,
                                                            const data::Dataset& test_set,
                                                            const TrainConfig& cfg);

// Eq-style blackbox regime: only oracle outputs are consumed, never classifier
// internals. Auxiliary samples are used unlabeled.
std::pair<models::InversionModel, TrainReport> train_inversion_blackbox(
    const models::InversionSpec& spec, oracle::PredictionOracle& oracle,
    const data::Dataset& aux, const TrainConfig& cfg);

struct JointResult {
    models::Classifier classifier;
    models::InversionModel inversion;
    TrainReport report;
};

// Malicious-developer regime: simultaneous steps on classifier and decoder,
// reconstruction loss as a regularizer, truncation applied inside it.
JointResult train_joint(const models::ClassifierSpec& cls_spec, const models::InversionSpec& inv_spec,
                        const data::Dataset& train_set, const data::Dataset& test_set,
                        const TrainConfig& cfg);

// Classification objective (mean cross-entropy + weight penalty) on one batch;
// accumulates gradients when backward is set. Exposed for gradient checks.
double classifier_loss(models::Classifier& model, const Tensor& images, const std::vector<int>& labels,
                       float weight_decay, bool backward);

// Reconstruction objective of the blackbox regime on one batch, from raw
// prediction rows. Exposed for gradient checks and the objective-fidelity test.
double inversion_loss(models::InversionModel& model, const Mat& predictions, const Tensor& targets,
                      int m, bool rescale, const std::string& reduction, bool backward);

}  // namespace predinv::train
