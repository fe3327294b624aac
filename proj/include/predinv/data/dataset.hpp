#pragma once

#include "predinv/tensor.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace predinv::data {

// One grayscale image with unit-interval pixels; the atom of every dataset.
struct ImageSample {
    std::vector<float> pixels;  // row-major, height*width
    std::optional<int> label;
    std::string source_id;
};

struct Dataset {
    std::vector<ImageSample> samples;
    std::vector<std::string> class_names;
    int height = 0, width = 0;

    std::size_t size() const { return samples.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    // (n, 1, H, W) batch of the given sample indices
    Tensor batch(const std::vector<int>& indices) const;
    Tensor all_images() const;
    std::vector<int> labels() const;  // throws if any sample is unlabeled
};

// How the attacker's auxiliary set relates to the victim's training distribution.
struct AuxiliarySpec {
    std::string kind;    // "same" | "generic" | "distinct"
    std::string source;  // registered dataset id
    std::set<std::string> excluded_classes;
    double fraction = 1.0;
};

// Parses the dataset's standard published binary files below data_dir/<name>/.
// mnist and cifar10 are built in; facescrub/celeba load from a prepared
// INVD1 container at data_dir/<name>.invd1 when one exists.
Dataset load_dataset(const std::string& name, int height, int width, const std::string& data_dir);

// Stratified, deterministic, disjoint and exhaustive train/test partition.
std::pair<Dataset, Dataset> make_splits(const Dataset& dataset, double train_fraction, std::uint64_t seed);

// Builds the attacker's training set for the inversion model. Labels are dropped.
Dataset compose_auxiliary(const Dataset& source, const AuxiliarySpec& spec,
                          const std::set<std::string>& victim_train_classes,
                          const std::unordered_set<std::string>& victim_train_ids);

// Restricts to k randomly chosen classes, re-indexing labels to [0, k).
Dataset select_class_subset(const Dataset& dataset, int k, std::uint64_t seed);

// INVD1 processed-dataset container.
void save_container(const Dataset& dataset, const std::string& path);
Dataset load_container(const std::string& path);

// PREDINV_DATA_DIR environment override, else "./data".
std::string default_data_dir();

// Bilinear resize with clamping back to [0,1].
std::vector<float> resize_bilinear(const float* src, int sh, int sw, int dh, int dw);

}  // namespace predinv::data
