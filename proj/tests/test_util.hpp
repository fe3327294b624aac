#pragma once

#include "predinv/data/dataset.hpp"
#include "predinv/rng.hpp"

#include <filesystem>
#include <string>

namespace testutil {

// Synthetic k-class dataset: each class lights up its own block of rows, with
// mild noise on top. Linearly separable by construction.
inline predinv::data::Dataset synthetic_dataset(int n, int k, int h, int w, std::uint64_t seed,
                                                float noise = 0.05f) {
    predinv::data::Dataset ds;
    ds.height = h;
    ds.width = w;
    for (int c = 0; c < k; ++c) ds.class_names.push_back("class" + std::to_string(c));
    predinv::Rng rng(seed);
    const int band = h / k;
    for (int i = 0; i < n; ++i) {
        const int label = i % k;
        predinv::data::ImageSample s;
        s.pixels.assign(static_cast<std::size_t>(h) * w, 0.0f);
        const int y0 = label * band;
        for (int y = y0; y < y0 + band && y < h; ++y) {
            for (int x = 0; x < w; ++x) s.pixels[static_cast<std::size_t>(y) * w + x] = 0.9f;
        }
        for (auto& p : s.pixels) {
            p = std::clamp(p + noise * (rng.unit() - 0.5f), 0.0f, 1.0f);
        }
        s.label = label;
        s.source_id = "synthetic#" + std::to_string(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline std::string data_dir() { return predinv::data::default_data_dir(); }

inline bool real_data_present() {
    return std::filesystem::exists(data_dir() + "/mnist/train-images-idx3-ubyte") ||
           std::filesystem::exists(data_dir() + "/mnist/train-images-idx3-ubyte.gz");
}

inline std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("predinv_test_" + tag);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace testutil
