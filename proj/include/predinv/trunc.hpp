#pragma once

#include "predinv/tensor.hpp"

#include <cstdint>
#include <vector>

namespace predinv::trunc {

// Keeps the m largest entries in place, zeroes the rest. Ties at the cut are
// broken toward lower indices so results are platform-independent.
std::vector<float> truncate_m(const std::vector<float>& vec, int m);
Mat truncate_m(const Mat& rows, int m);

// 0/1 mask of the retained positions under the same selection rule.
std::vector<std::uint8_t> top_m_mask(const float* vec, int k, int m);

std::vector<float> one_hot(int class_index, int k, float value = 1.0f);

struct RescaleState {
    float c = 0.0f;     // learnable offset, trained together with the inversion model
    float eps = 1e-8f;  // floor applied inside the logarithm so zeroed entries stay finite
};

// Maps probabilities back toward logits: out_i = log(max(vec_i, eps)) + c.
std::vector<float> rescale_to_logits(const std::vector<float>& vec, const RescaleState& state);
Mat rescale_to_logits(const Mat& rows, const RescaleState& state);

}  // namespace predinv::trunc
