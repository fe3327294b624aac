#pragma once

#include "predinv/nn/layers.hpp"
#include "predinv/trunc.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace predinv::models {

using nlohmann::json;

// Convolutional encoder ending in softmax. Per block: conv 3x3/s1/p1, batch
// norm, 2x2 max-pool, ReLU; then two fully-connected layers.
struct ClassifierSpec {
    int height = 32, width = 32;
    int num_classes = 10;
    int blocks = 3;                 // 3 for 32x32 input, 4 for 64x64
    std::vector<int> channels;      // per-block outputs; default doubles from 32
    std::vector<int> fc_dims;       // {hidden, num_classes}

    void normalize();               // fill defaulted fields
    void validate() const;
    json to_json() const;
    static ClassifierSpec from_json(const json& j);
};

// Transposed-convolutional decoder. First block expands the k-vector to a 4x4
// map (kernel 4, stride 1), every later block doubles the side (kernel 4,
// stride 2, pad 1). Hidden blocks use batch norm + Tanh, the last Sigmoid.
struct InversionSpec {
    int input_dim = 10;
    int blocks = 4;                 // 4 for 32x32 output, 5 for 64x64
    int height = 32, width = 32;
    std::vector<int> channels;      // per-block outputs; last must be 1

    void normalize();
    void validate() const;
    json to_json() const;
    static InversionSpec from_json(const json& j);
};

// Activation records for one forward pass through either network.
struct TrainCtx {
    std::vector<nn::Cache> caches;
    Mat fc1_in, fc2_in;
    std::vector<std::uint8_t> fc_relu_mask;
    Mat vec_in;  // decoder input rows
};

class Classifier {
public:
    Classifier() = default;
    Classifier(ClassifierSpec spec, std::uint64_t seed);

    const ClassifierSpec& spec() const { return spec_; }

    // Inference entry points; deterministic, use stored normalization statistics.
    Mat logits(const Tensor& images) const;
    Mat predict(const Tensor& images) const;  // softmax(logits)

    // Training-path forward; keeps activations in ctx for a later backward.
    Mat forward(const Tensor& images, TrainCtx& ctx, bool training);
    void backward(const Mat& dlogits, TrainCtx& ctx);
    Tensor backward_to_input(const Mat& dlogits, TrainCtx& ctx);

    std::vector<nn::ParamView> params();
    std::vector<nn::BufView> buffers();

    std::uint64_t seed = 0;
    int epochs_seen = 0;

private:
    Mat forward_impl(const Tensor& images, TrainCtx* ctx, bool training) const;
    Tensor backward_impl(const Mat& dlogits, TrainCtx& ctx, bool need_dx);

    ClassifierSpec spec_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::BatchNorm2d> bns_;
    nn::MaxPool2d pool_;
    nn::Activation relu_{nn::Act::ReLU};
    nn::Linear fc1_, fc2_;
};

class InversionModel {
public:
    InversionModel() = default;
    InversionModel(InversionSpec spec, std::uint64_t seed);

    const InversionSpec& spec() const { return spec_; }

    Tensor decode(const Mat& vecs) const;  // inference; output pixels clamped by Sigmoid
    Tensor forward(const Mat& vecs, TrainCtx& ctx, bool training);
    Mat backward(const Tensor& drecon, TrainCtx& ctx);  // returns d(input vectors)

    std::vector<nn::ParamView> params();  // includes the rescale constant c
    std::vector<nn::BufView> buffers();

    trunc::RescaleState rescale_state() const { return {c_, eps_}; }
    float rescale_c() const { return c_; }
    float& rescale_c_grad() { return gc_; }

    std::uint64_t seed = 0;
    int epochs_seen = 0;
    int trained_m = -1;           // truncation level seen during training; -1 unknown
    bool rescaled_inputs = true;  // whether training fed log-rescaled predictions

private:
    Tensor forward_impl(const Mat& vecs, TrainCtx* ctx, bool training) const;

    InversionSpec spec_;
    std::vector<nn::ConvTranspose2d> tconvs_;
    std::vector<nn::BatchNorm2d> bns_;
    nn::Activation tanh_{nn::Act::Tanh}, sigmoid_{nn::Act::Sigmoid};
    float c_ = 0.0f, gc_ = 0.0f;
    float eps_ = 1e-8f;
};

// Checkpoint container: "INVM1" magic, JSON header, named float32 blobs.
void save_classifier(Classifier& model, const std::string& path);
Classifier load_classifier(const std::string& path);
void save_inversion(InversionModel& model, const std::string& path);
InversionModel load_inversion(const std::string& path);

}  // namespace predinv::models
