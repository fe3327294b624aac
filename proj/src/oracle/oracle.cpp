#include "predinv/oracle/oracle.hpp"

#include "predinv/errors.hpp"
#include "predinv/trunc.hpp"

#include <set>

namespace predinv::oracle {

void OracleConfig::validate(int k) const {
    if (server_m < 0 || server_m > k) {
        throw ValidationError("oracle: server_m must be in [1, k] (or 0 for full vectors)");
    }
    if (max_batch < 1) throw ValidationError("oracle: max_batch must be >= 1");
}

LocalOracle::LocalOracle(models::Classifier classifier, OracleConfig cfg)
    : classifier_(std::move(classifier)), cfg_(std::move(cfg)) {
    cfg_.validate(classifier_.spec().num_classes);
    if (cfg_.server_m == 0) cfg_.server_m = classifier_.spec().num_classes;
}

Mat LocalOracle::query(const Tensor& images) {
    Mat p = classifier_.predict(images);
    account(images.n);
    if (cfg_.server_m < classifier_.spec().num_classes) {
        return trunc::truncate_m(p, cfg_.server_m);
    }
    return p;
}

std::unique_ptr<PredictionOracle> make_local_oracle(models::Classifier classifier, OracleConfig cfg) {
    return std::make_unique<LocalOracle>(std::move(classifier), std::move(cfg));
}

int estimate_class_count(PredictionOracle& oracle, const data::Dataset& aux, int batch_size) {
    if (aux.size() == 0) throw ValidationError("estimate_class_count: empty auxiliary set");
    std::set<int> seen;
    const int n = static_cast<int>(aux.size());
    for (int start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (int i = start; i < std::min(start + batch_size, n); ++i) idx.push_back(i);
        Mat p = oracle.query(aux.batch(idx));
        for (int i = 0; i < p.rows(); ++i) {
            int arg = 0;
            for (int j = 1; j < p.cols(); ++j) {
                if (p(i, j) > p(i, arg)) arg = j;
            }
            seen.insert(arg);
        }
    }
    return static_cast<int>(seen.size());
}

}  // namespace predinv::oracle
