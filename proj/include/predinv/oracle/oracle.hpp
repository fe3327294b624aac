#pragma once

#include "predinv/data/dataset.hpp"
#include "predinv/models/models.hpp"
#include "predinv/tensor.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace predinv::oracle {

// Blackbox access to a classifier: images in, (possibly truncated) probability
// vectors out. Attack-side code sees nothing else.
class PredictionOracle {
public:
    virtual ~PredictionOracle() = default;

    // One row of k scores per image; at most the victim's m entries are nonzero.
    virtual Mat query(const Tensor& images) = 0;
    virtual int output_dim() const = 0;

    std::uint64_t query_count() const { return count_.load(); }

protected:
    void account(int n) { count_.fetch_add(static_cast<std::uint64_t>(n)); }

private:
    std::atomic<std::uint64_t> count_{0};
};

struct OracleConfig {
    int server_m = 0;  // truncation applied by the victim; 0 means full vectors
    std::string host = "127.0.0.1";
    int port = 0;
    int max_batch = 256;
    std::string checkpoint;
    std::vector<std::string> class_names;  // served via /metadata when known

    void validate(int k) const;
};

class LocalOracle : public PredictionOracle {
public:
    LocalOracle(models::Classifier classifier, OracleConfig cfg);

    Mat query(const Tensor& images) override;
    int output_dim() const override { return classifier_.spec().num_classes; }
    int server_m() const { return cfg_.server_m; }
    const models::Classifier& classifier() const { return classifier_; }

private:
    models::Classifier classifier_;
    OracleConfig cfg_;
};

std::unique_ptr<PredictionOracle> make_local_oracle(models::Classifier classifier, OracleConfig cfg);

// Counts distinct argmax classes over the auxiliary set; the attacker's
// estimate of k when the victim reveals only top classes.
int estimate_class_count(PredictionOracle& oracle, const data::Dataset& aux, int batch_size = 256);

}  // namespace predinv::oracle
