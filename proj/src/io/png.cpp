#include "predinv/io/png.hpp"

#include "predinv/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace predinv::io {

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, out.data() + start, static_cast<uInt>(4 + data.size())));
    put_be32(out, crc);
}

void write_png_bytes(const std::string& path, const std::uint8_t* gray, int h, int w) {
    // filter byte 0 in front of every scanline
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (w + 1));
    for (int y = 0; y < h; ++y) {
        raw[static_cast<std::size_t>(y) * (w + 1)] = 0;
        std::memcpy(raw.data() + static_cast<std::size_t>(y) * (w + 1) + 1,
                    gray + static_cast<std::size_t>(y) * w, w);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw DataError("png: deflate failed");
    }
    comp.resize(comp_len);

    std::vector<std::uint8_t> png;
    const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    png.insert(png.end(), sig, sig + 8);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", comp);
    put_chunk(png, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_png_gray(const std::string& path, const float* pixels, int h, int w) {
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(h) * w);
    for (std::size_t j = 0; j < gray.size(); ++j) gray[j] = to_byte(pixels[j]);
    write_png_bytes(path, gray.data(), h, w);
}

void write_grid_png(const std::string& path, const std::vector<Tensor>& rows, int pad) {
    if (rows.empty()) throw ValidationError("write_grid_png: no rows");
    const int n = rows.front().n, h = rows.front().h, w = rows.front().w;
    for (const auto& r : rows) {
        if (r.n != n || r.h != h || r.w != w || r.c != 1) {
            throw ValidationError("write_grid_png: rows disagree on image count or size");
        }
    }
    const int R = static_cast<int>(rows.size());
    const int H = R * h + (R + 1) * pad;
    const int W = n * w + (n + 1) * pad;
    std::vector<std::uint8_t> canvas(static_cast<std::size_t>(H) * W, 200);
    for (int r = 0; r < R; ++r) {
        for (int i = 0; i < n; ++i) {
            const float* img = rows[r].sample(i);
            const int oy = pad + r * (h + pad);
            const int ox = pad + i * (w + pad);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    canvas[static_cast<std::size_t>(oy + y) * W + ox + x] = to_byte(img[y * w + x]);
                }
            }
        }
    }
    write_png_bytes(path, canvas.data(), H, W);
}

}  // namespace predinv::io
