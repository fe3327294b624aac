#pragma once

#include "predinv/rng.hpp"
#include "predinv/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace predinv::nn {

// Named view into a layer's parameters and their gradient slot.
struct ParamView {
    std::string name;
    float* w = nullptr;
    float* g = nullptr;
    std::size_t size = 0;
};

// Non-learnable state that still belongs in a checkpoint (batch-norm running stats).
struct BufView {
    std::string name;
    float* p = nullptr;
    std::size_t size = 0;
};

// Per-layer activation record for one forward pass. Inference passes nullptr and
// leaves the layer untouched, so parameter sets can be shared across threads.
struct Cache {
    Tensor x;                  // saved input
    Tensor y;                  // saved output, for activations
    std::vector<int> argmax;   // max-pool winners
    std::vector<float> mean;   // batch-norm statistics actually used
    std::vector<float> invstd;
    bool train_stats = false;  // whether batch stats (vs running) were used
    int xn = 0, xc = 0, xh = 0, xw = 0;  // input shape when the input itself is not kept
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

struct Conv2d {
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
    std::vector<float> W, b, gW, gb;  // W is (cout, cin*k*k)

    Conv2d() = default;
    Conv2d(int cin_, int cout_, int k_, int stride_, int pad_);

    void init(Rng& rng);
    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Tensor& dy, const Cache& cache);  // accumulates gW/gb, returns dx
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

struct ConvTranspose2d {
    int cin = 0, cout = 0, k = 4, stride = 2, pad = 1;
    std::vector<float> W, b, gW, gb;  // W is (cin, cout*k*k)

    ConvTranspose2d() = default;
    ConvTranspose2d(int cin_, int cout_, int k_, int stride_, int pad_);

    int out_dim(int in) const { return (in - 1) * stride - 2 * pad + k; }
    void init(Rng& rng);
    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Tensor& dy, const Cache& cache);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

struct BatchNorm2d {
    int c = 0;
    float momentum = 0.1f, eps = 1e-5f;
    std::vector<float> gamma, beta, ggamma, gbeta;
    std::vector<float> running_mean, running_var;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c_);

    // Training-mode forward: batch statistics, running averages updated.
    Tensor forward_train(const Tensor& x, Cache& cache);
    // Inference-mode forward: stored statistics only; cache optional (needed when a
    // backward-to-input pass follows, e.g. optimization-based inversion).
    Tensor forward_eval(const Tensor& x, Cache* cache) const;
    Tensor backward(const Tensor& dy, const Cache& cache);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
    void collect_buffers(const std::string& prefix, std::vector<BufView>& out);
};

struct MaxPool2d {
    int k = 2, stride = 2;
    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

enum class Act { ReLU, Tanh, Sigmoid };

struct Activation {
    Act kind = Act::ReLU;
    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

struct Linear {
    int in = 0, out = 0;
    std::vector<float> W, b, gW, gb;  // W is (out, in)

    Linear() = default;
    Linear(int in_, int out_);

    void init(Rng& rng);
    Mat forward(const Mat& x, Mat* saved_x) const;
    Mat backward(const Mat& dy, const Mat& saved_x);
    void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// Row-wise stable softmax.
Mat softmax(const Mat& logits);

// Mean cross-entropy over the batch; writes dL/dlogits when dlogits != nullptr.
double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* dlogits);

// Mean squared error between image batches under the given reduction
// ("per-pixel-mean" or "per-image-sum"); writes dL/drecon when asked.
double mse_loss(const Tensor& recon, const Tensor& target, const std::string& reduction, Tensor* drecon);

void set_threads(int n);  // 0 = hardware default

}  // namespace predinv::nn
