#include "predinv/eval/metrics.hpp"

#include "predinv/errors.hpp"
#include "predinv/nn/layers.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

namespace predinv::eval {

int argmax_row(const float* v, int k) {
    int arg = 0;
    for (int j = 1; j < k; ++j) {
        if (v[j] > v[arg]) arg = j;
    }
    return arg;
}

double accuracy(const models::Classifier& classifier, const data::Dataset& ds, int batch_size) {
    if (ds.size() == 0) throw ValidationError("accuracy: empty dataset");
    const auto labels = ds.labels();
    const int n = static_cast<int>(ds.size());
    long long hit = 0;
    for (int start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (int i = start; i < std::min(start + batch_size, n); ++i) idx.push_back(i);
        Mat p = classifier.predict(ds.batch(idx));
        for (int i = 0; i < p.rows(); ++i) {
            if (argmax_row(p.row(i).data(), static_cast<int>(p.cols())) == labels[idx[i]]) ++hit;
        }
    }
    return static_cast<double>(hit) / n;
}

double reconstruction_mse(const Tensor& truth, const Tensor& recon, const std::string& reduction) {
    return nn::mse_loss(recon, truth, reduction, nullptr);
}

double attack_success_rate(const models::Classifier& classifier, const attacks::AttackResult& result) {
    if (result.target_classes.empty()) throw ValidationError("attack_success_rate: result carries no targets");
    if (static_cast<int>(result.target_classes.size()) != result.images.n) {
        throw ValidationError("attack_success_rate: target/image count mismatch");
    }
    Mat p = classifier.predict(result.images);
    long long hit = 0;
    for (int i = 0; i < p.rows(); ++i) {
        if (argmax_row(p.row(i).data(), static_cast<int>(p.cols())) == result.target_classes[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(result.images.n);
}

json MetricsReport::to_json() const {
    return json{{"experiment", experiment}, {"split", split},
                {"seed", seed},             {"config_fingerprint", config_fingerprint},
                {"values", values},         {"conditions", conditions}};
}

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.values = j.at("values");
    r.conditions = j.at("conditions");
    return r;
}

std::vector<std::string> emit_report(const std::vector<MetricsReport>& metrics,
                                     const std::string& out_dir, const std::string& layout) {
    if (metrics.empty()) throw ValidationError("emit_report: no metrics to report");
    std::filesystem::create_directories(out_dir);

    json arr = json::array();
    for (const auto& m : metrics) arr.push_back(m.to_json());
    const std::string json_path = out_dir + "/report.json";
    {
        std::ofstream out(json_path);
        if (!out) throw DataError("cannot write '" + json_path + "'");
        out << arr.dump(2) << "\n";
    }

    std::set<std::string> keys;
    for (const auto& m : metrics) {
        for (auto it = m.values.begin(); it != m.values.end(); ++it) keys.insert(it.key());
    }
    const std::string md_path = out_dir + "/report.md";
    {
        std::ofstream out(md_path);
        if (!out) throw DataError("cannot write '" + md_path + "'");
        out << "# Report (" << layout << ")\n\n";
        out << "| experiment | split | conditions |";
        for (const auto& k : keys) out << " " << k << " |";
        out << "\n|---|---|---|";
        for (std::size_t i = 0; i < keys.size(); ++i) out << "---|";
        out << "\n";
        for (const auto& m : metrics) {
            out << "| " << m.experiment << " | " << m.split << " | " << m.conditions.dump() << " |";
            for (const auto& k : keys) {
                if (m.values.contains(k)) {
                    out << " " << m.values[k].dump() << " |";
                } else {
                    out << " - |";
                }
            }
            out << "\n";
        }
    }
    return {json_path, md_path};
}

}  // namespace predinv::eval
