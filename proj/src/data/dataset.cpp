#include "predinv/data/dataset.hpp"

#include "predinv/errors.hpp"
#include "predinv/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

namespace predinv::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    in.seekg(0, std::ios::end);
    const std::streamoff sz = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(sz));
    in.read(reinterpret_cast<char*>(buf.data()), sz);
    if (!in) throw DataError("short read on '" + path + "'");
    return buf;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& gz) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw DataError("zlib init failed");
    std::vector<std::uint8_t> out;
    out.reserve(gz.size() * 4);
    std::uint8_t chunk[1 << 16];
    zs.next_in = const_cast<std::uint8_t*>(gz.data());
    zs.avail_in = static_cast<uInt>(gz.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError("corrupt gzip stream");
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

// reads the file, transparently decompressing a .gz variant if only that exists
std::vector<std::uint8_t> read_maybe_gz(const std::string& path) {
    std::string actual = path;
    if (!fs::exists(actual) && fs::exists(actual + ".gz")) actual += ".gz";
    auto buf = read_file(actual);
    if (buf.size() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b) return gunzip(buf);
    return buf;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

void check_resolution(int h, int w) {
    const bool ok = (h == 32 && w == 32) || (h == 64 && w == 64);
    if (!ok) {
        throw ValidationError("unsupported resolution " + std::to_string(h) + "x" + std::to_string(w) +
                              " (expected 32x32 or 64x64)");
    }
}

struct IdxImages {
    int count = 0, rows = 0, cols = 0;
    const std::uint8_t* pixels = nullptr;
};

IdxImages parse_idx_images(const std::vector<std::uint8_t>& buf, const std::string& what) {
    if (buf.size() < 16 || be32(buf.data()) != 2051) throw DataError("bad IDX image magic in " + what);
    IdxImages r;
    r.count = static_cast<int>(be32(buf.data() + 4));
    r.rows = static_cast<int>(be32(buf.data() + 8));
    r.cols = static_cast<int>(be32(buf.data() + 12));
    if (buf.size() != 16 + static_cast<std::size_t>(r.count) * r.rows * r.cols) {
        throw DataError("truncated IDX image file " + what);
    }
    r.pixels = buf.data() + 16;
    return r;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& buf, int expect, const std::string& what) {
    if (buf.size() < 8 || be32(buf.data()) != 2049) throw DataError("bad IDX label magic in " + what);
    const int count = static_cast<int>(be32(buf.data() + 4));
    if (count != expect || buf.size() != 8 + static_cast<std::size_t>(count)) {
        throw DataError("label/image count mismatch in " + what);
    }
    return std::vector<int>(buf.begin() + 8, buf.end());
}

void append_idx_part(Dataset& ds, const std::string& dir, const std::string& stem,
                     const std::string& tag, int dh, int dw) {
    auto images = read_maybe_gz(dir + "/" + stem + "-images-idx3-ubyte");
    auto labels_buf = read_maybe_gz(dir + "/" + stem + "-labels-idx1-ubyte");
    const IdxImages idx = parse_idx_images(images, stem);
    const auto labels = parse_idx_labels(labels_buf, idx.count, stem);

    std::vector<float> gray(static_cast<std::size_t>(idx.rows) * idx.cols);
    char id[64];
    for (int i = 0; i < idx.count; ++i) {
        const std::uint8_t* px = idx.pixels + static_cast<std::size_t>(i) * idx.rows * idx.cols;
        for (std::size_t j = 0; j < gray.size(); ++j) gray[j] = px[j] / 255.0f;
        ImageSample s;
        s.pixels = resize_bilinear(gray.data(), idx.rows, idx.cols, dh, dw);
        s.label = labels[i];
        std::snprintf(id, sizeof(id), "mnist/%s#%05d", tag.c_str(), i);
        s.source_id = id;
        ds.samples.push_back(std::move(s));
    }
}

Dataset load_mnist(int h, int w, const std::string& data_dir) {
    Dataset ds;
    ds.height = h;
    ds.width = w;
    for (int c = 0; c < 10; ++c) ds.class_names.push_back(std::to_string(c));
    const std::string dir = data_dir + "/mnist";
    append_idx_part(ds, dir, "train", "train", h, w);
    append_idx_part(ds, dir, "t10k", "t10k", h, w);
    return ds;
}

Dataset load_cifar10(int h, int w, const std::string& data_dir) {
    Dataset ds;
    ds.height = h;
    ds.width = w;
    const std::string dir = data_dir + "/cifar10";
    {
        std::ifstream meta(dir + "/batches.meta.txt");
        std::string line;
        while (meta && std::getline(meta, line)) {
            if (!line.empty()) ds.class_names.push_back(line);
        }
    }
    if (ds.class_names.size() != 10) {
        ds.class_names = {"airplane", "automobile", "bird",  "cat",  "deer",
                          "dog",      "frog",       "horse", "ship", "truck"};
    }
    const int native = 32, plane = native * native;
    std::vector<float> gray(plane);
    char id[64];
    std::vector<std::string> files = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                      "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
    for (const auto& f : files) {
        auto buf = read_maybe_gz(dir + "/" + f);
        const std::size_t rec = 1 + 3 * plane;
        if (buf.size() % rec != 0) throw DataError("corrupt CIFAR-10 batch " + f);
        const int count = static_cast<int>(buf.size() / rec);
        for (int i = 0; i < count; ++i) {
            const std::uint8_t* p = buf.data() + static_cast<std::size_t>(i) * rec;
            const int label = p[0];
            if (label < 0 || label > 9) throw DataError("corrupt CIFAR-10 label in " + f);
            const std::uint8_t* r = p + 1;
            const std::uint8_t* g = r + plane;
            const std::uint8_t* b = g + plane;
            for (int j = 0; j < plane; ++j) {
                gray[j] = (0.299f * r[j] + 0.587f * g[j] + 0.114f * b[j]) / 255.0f;
            }
            ImageSample s;
            s.pixels = resize_bilinear(gray.data(), native, native, h, w);
            s.label = label;
            std::snprintf(id, sizeof(id), "cifar10/%s#%05d", f.c_str(), i);
            s.source_id = id;
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace

Tensor Dataset::batch(const std::vector<int>& indices) const {
    Tensor t(static_cast<int>(indices.size()), 1, height, width);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& s = samples[indices[i]];
        std::copy(s.pixels.begin(), s.pixels.end(), t.sample(static_cast<int>(i)));
    }
    return t;
}

Tensor Dataset::all_images() const {
    std::vector<int> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    return batch(idx);
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(size());
    for (const auto& s : samples) {
        if (!s.label) throw ValidationError("dataset has unlabeled samples");
        out.push_back(*s.label);
    }
    return out;
}

std::string default_data_dir() {
    if (const char* env = std::getenv("PREDINV_DATA_DIR")) return env;
    return "./data";
}

std::vector<float> resize_bilinear(const float* src, int sh, int sw, int dh, int dw) {
    std::vector<float> out(static_cast<std::size_t>(dh) * dw);
    if (sh == dh && sw == dw) {
        std::copy(src, src + out.size(), out.begin());
        return out;
    }
    const float sy = static_cast<float>(sh) / dh;
    const float sx = static_cast<float>(sw) / dw;
    for (int y = 0; y < dh; ++y) {
        const float fy = (y + 0.5f) * sy - 0.5f;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, sh - 1);
        const int y1 = std::min(y0 + 1, sh - 1);
        const float wy = std::clamp(fy - y0, 0.0f, 1.0f);
        for (int x = 0; x < dw; ++x) {
            const float fx = (x + 0.5f) * sx - 0.5f;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, sw - 1);
            const int x1 = std::min(x0 + 1, sw - 1);
            const float wx = std::clamp(fx - x0, 0.0f, 1.0f);
            const float top = src[y0 * sw + x0] * (1 - wx) + src[y0 * sw + x1] * wx;
            const float bot = src[y1 * sw + x0] * (1 - wx) + src[y1 * sw + x1] * wx;
            out[static_cast<std::size_t>(y) * dw + x] = std::clamp(top * (1 - wy) + bot * wy, 0.0f, 1.0f);
        }
    }
    return out;
}

Dataset load_dataset(const std::string& name, int height, int width, const std::string& data_dir) {
    check_resolution(height, width);
    if (name == "mnist") return load_mnist(height, width, data_dir);
    if (name == "cifar10") return load_cifar10(height, width, data_dir);
    if (name == "facescrub" || name == "celeba") {
        const std::string path = data_dir + "/" + name + ".invd1";
        if (!fs::exists(path)) {
            throw DataError("dataset '" + name + "' is optional and needs a prepared container at " + path);
        }
        Dataset ds = load_container(path);
        if (ds.height != height || ds.width != width) {
            Dataset resized;
            resized.class_names = ds.class_names;
            resized.height = height;
            resized.width = width;
            for (auto& s : ds.samples) {
                ImageSample r;
                r.pixels = resize_bilinear(s.pixels.data(), ds.height, ds.width, height, width);
                r.label = s.label;
                r.source_id = s.source_id;
                resized.samples.push_back(std::move(r));
            }
            return resized;
        }
        return ds;
    }
    throw ValidationError("unknown dataset id '" + name + "'");
}

std::pair<Dataset, Dataset> make_splits(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
    if (dataset.size() == 0) throw ValidationError("make_splits: empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("make_splits: train_fraction must be in (0,1)");
    }
    const int C = dataset.num_classes();
    std::vector<std::vector<int>> by_class(C);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (!s.label || *s.label < 0 || *s.label >= C) {
            throw ValidationError("make_splits: sample without a valid label");
        }
        by_class[*s.label].push_back(static_cast<int>(i));
    }
    for (int c = 0; c < C; ++c) {
        if (by_class[c].size() < 2) {
            throw ValidationError("make_splits: class '" + dataset.class_names[c] + "' has fewer than 2 samples");
        }
    }

    // per-class quota by largest remainder, so totals land exactly on round(N*fraction)
    const long long total_train = std::llround(static_cast<double>(dataset.size()) * train_fraction);
    std::vector<long long> quota(C);
    std::vector<std::pair<double, int>> rema(C);
    long long assigned = 0;
    for (int c = 0; c < C; ++c) {
        const double want = static_cast<double>(by_class[c].size()) * train_fraction;
        quota[c] = static_cast<long long>(std::floor(want));
        quota[c] = std::clamp<long long>(quota[c], 1, static_cast<long long>(by_class[c].size()) - 1);
        rema[c] = {want - std::floor(want), c};
        assigned += quota[c];
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [frac, c] : rema) {
        (void)frac;
        if (assigned >= total_train) break;
        if (quota[c] < static_cast<long long>(by_class[c].size()) - 1) {
            ++quota[c];
            ++assigned;
        }
    }

    std::vector<char> in_train(dataset.size(), 0);
    for (int c = 0; c < C; ++c) {
        Rng rng = derive_rng(seed, "make_splits", static_cast<std::uint64_t>(c));
        auto idx = by_class[c];
        rng.shuffle(idx);
        for (long long j = 0; j < quota[c]; ++j) in_train[idx[j]] = 1;
    }

    Dataset train, test;
    train.class_names = test.class_names = dataset.class_names;
    train.height = test.height = dataset.height;
    train.width = test.width = dataset.width;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        (in_train[i] ? train : test).samples.push_back(dataset.samples[i]);
    }
    return {std::move(train), std::move(test)};
}

Dataset compose_auxiliary(const Dataset& source, const AuxiliarySpec& spec,
                          const std::set<std::string>& victim_train_classes,
                          const std::unordered_set<std::string>& victim_train_ids) {
    if (spec.kind != "same" && spec.kind != "generic" && spec.kind != "distinct") {
        throw ValidationError("auxiliary kind must be same|generic|distinct, got '" + spec.kind + "'");
    }
    if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) {
        throw ValidationError("auxiliary fraction must be in (0,1]");
    }
    if (spec.kind == "generic" && spec.excluded_classes != victim_train_classes) {
        throw ValidationError("generic auxiliary requires excluded_classes to equal the victim's training classes");
    }

    std::vector<int> keep;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& s = source.samples[i];
        if (victim_train_ids.count(s.source_id)) continue;
        if (!spec.excluded_classes.empty() && s.label) {
            const std::string& cname = source.class_names[*s.label];
            if (spec.excluded_classes.count(cname)) continue;
        }
        keep.push_back(static_cast<int>(i));
    }
    if (keep.empty()) {
        if (spec.kind == "same") throw DataError("auxiliary kind=same: no held-out split available");
        throw DataError("auxiliary composition produced an empty dataset");
    }

    const std::size_t want = std::max<std::size_t>(1, static_cast<std::size_t>(
        std::floor(static_cast<double>(keep.size()) * spec.fraction)));
    Dataset aux;
    aux.height = source.height;
    aux.width = source.width;
    for (std::size_t j = 0; j < want; ++j) {
        const std::size_t pick = j * keep.size() / want;  // strided, distribution preserving
        ImageSample s = source.samples[keep[pick]];
        s.label.reset();  // auxiliary samples are used unlabeled
        aux.samples.push_back(std::move(s));
    }
    return aux;
}

Dataset select_class_subset(const Dataset& dataset, int k, std::uint64_t seed) {
    const int C = dataset.num_classes();
    if (k < 1 || k > C) throw ValidationError("select_class_subset: k out of range");
    std::vector<int> order(C);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = derive_rng(seed, "class_subset");
    rng.shuffle(order);
    std::vector<int> chosen(order.begin(), order.begin() + k);
    std::sort(chosen.begin(), chosen.end());

    std::vector<int> remap(C, -1);
    Dataset out;
    out.height = dataset.height;
    out.width = dataset.width;
    for (int j = 0; j < k; ++j) {
        remap[chosen[j]] = j;
        out.class_names.push_back(dataset.class_names[chosen[j]]);
    }
    for (const auto& s : dataset.samples) {
        if (s.label && remap[*s.label] >= 0) {
            ImageSample copy = s;
            copy.label = remap[*s.label];
            out.samples.push_back(std::move(copy));
        }
    }
    return out;
}

// --------------------------------------------------------- INVD1 container

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_container(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write("INVD1\0", 6);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.height));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.class_names.size()));
    for (const auto& name : dataset.class_names) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& s : dataset.samples) {
        out.write(reinterpret_cast<const char*>(s.pixels.data()),
                  static_cast<std::streamsize>(s.pixels.size() * sizeof(float)));
    }
    for (const auto& s : dataset.samples) {
        put<std::int32_t>(out, s.label ? static_cast<std::int32_t>(*s.label) : -1);
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

Dataset load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "INVD1\0", 6) != 0) throw DataError("bad INVD1 magic in '" + path + "'");
    Dataset ds;
    ds.height = static_cast<int>(get<std::uint32_t>(in));
    ds.width = static_cast<int>(get<std::uint32_t>(in));
    const auto count = get<std::uint32_t>(in);
    const auto nclasses = get<std::uint32_t>(in);
    if (ds.height <= 0 || ds.width <= 0 || ds.height > 4096 || ds.width > 4096) {
        throw DataError("implausible resolution in '" + path + "'");
    }
    for (std::uint32_t c = 0; c < nclasses; ++c) {
        const auto len = get<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        ds.class_names.push_back(std::move(name));
    }
    const std::string stem = fs::path(path).stem().string();
    const std::size_t plane = static_cast<std::size_t>(ds.height) * ds.width;
    char id[96];
    ds.samples.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto& s = ds.samples[i];
        s.pixels.resize(plane);
        in.read(reinterpret_cast<char*>(s.pixels.data()), static_cast<std::streamsize>(plane * sizeof(float)));
        std::snprintf(id, sizeof(id), "%s#%06u", stem.c_str(), i);
        s.source_id = id;
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto lab = get<std::int32_t>(in);
        if (lab >= 0) {
            if (lab >= static_cast<std::int32_t>(nclasses)) throw DataError("label out of range in '" + path + "'");
            ds.samples[i].label = lab;
        }
    }
    if (!in) throw DataError("truncated container '" + path + "'");
    for (const auto& s : ds.samples) {
        for (float p : s.pixels) {
            if (!(p >= 0.0f && p <= 1.0f)) throw DataError("pixel outside [0,1] in '" + path + "'");
        }
    }
    return ds;
}

}  // namespace predinv::data
