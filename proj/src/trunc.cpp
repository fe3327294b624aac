#include "predinv/trunc.hpp"

#include "predinv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace predinv::trunc {

std::vector<std::uint8_t> top_m_mask(const float* vec, int k, int m) {
    if (m < 1 || m > k) throw ValidationError("truncate_m: m must be in [1, k]");
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return vec[a] > vec[b]; });
    std::vector<std::uint8_t> mask(k, 0);
    for (int j = 0; j < m; ++j) mask[order[j]] = 1;
    return mask;
}

std::vector<float> truncate_m(const std::vector<float>& vec, int m) {
    const int k = static_cast<int>(vec.size());
    auto mask = top_m_mask(vec.data(), k, m);
    std::vector<float> out(k, 0.0f);
    for (int j = 0; j < k; ++j) {
        if (mask[j]) out[j] = vec[j];
    }
    return out;
}

Mat truncate_m(const Mat& rows, int m) {
    Mat out = Mat::Zero(rows.rows(), rows.cols());
    const int k = static_cast<int>(rows.cols());
    for (int i = 0; i < rows.rows(); ++i) {
        auto mask = top_m_mask(rows.row(i).data(), k, m);
        for (int j = 0; j < k; ++j) {
            if (mask[j]) out(i, j) = rows(i, j);
        }
    }
    return out;
}

std::vector<float> one_hot(int class_index, int k, float value) {
    if (class_index < 0 || class_index >= k) throw ValidationError("one_hot: class index out of range");
    if (!(value > 0.0f && value <= 1.0f)) throw ValidationError("one_hot: value must be in (0, 1]");
    std::vector<float> out(k, 0.0f);
    out[class_index] = value;
    return out;
}

std::vector<float> rescale_to_logits(const std::vector<float>& vec, const RescaleState& state) {
    if (!(state.eps > 0.0f)) throw ValidationError("rescale_to_logits: eps must be positive");
    std::vector<float> out(vec.size());
    for (std::size_t j = 0; j < vec.size(); ++j) {
        if (vec[j] < 0.0f) throw ValidationError("rescale_to_logits: negative entry");
        out[j] = std::log(std::max(vec[j], state.eps)) + state.c;
    }
    return out;
}

Mat rescale_to_logits(const Mat& rows, const RescaleState& state) {
    if (!(state.eps > 0.0f)) throw ValidationError("rescale_to_logits: eps must be positive");
    Mat out(rows.rows(), rows.cols());
    for (int i = 0; i < rows.rows(); ++i) {
        for (int j = 0; j < rows.cols(); ++j) {
            const float v = rows(i, j);
            if (v < 0.0f) throw ValidationError("rescale_to_logits: negative entry");
            out(i, j) = std::log(std::max(v, state.eps)) + state.c;
        }
    }
    return out;
}

}  // namespace predinv::trunc
