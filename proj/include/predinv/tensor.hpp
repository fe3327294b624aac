#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace predinv {

// Row-major float matrix; one row per sample throughout the toolkit.
using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Dense NCHW float tensor for image batches.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    std::size_t size() const { return v.size(); }
    int per_sample() const { return c * h * w; }
    int plane() const { return h * w; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    float* sample(int i) { return v.data() + static_cast<std::size_t>(i) * per_sample(); }
    const float* sample(int i) const { return v.data() + static_cast<std::size_t>(i) * per_sample(); }

    float& at(int i, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }
    float at(int i, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

}  // namespace predinv
