#pragma once

#include "predinv/tensor.hpp"

#include <string>
#include <vector>

namespace predinv::io {

// 8-bit grayscale PNG from unit-interval pixels.
void write_png_gray(const std::string& path, const float* pixels, int h, int w);

// Figure-style grid: one row per tensor (a method or an m value), one column
// per sample. All rows must hold the same number of equally sized images.
void write_grid_png(const std::string& path, const std::vector<Tensor>& rows, int pad = 2);

}  // namespace predinv::io
