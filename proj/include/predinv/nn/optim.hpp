#pragma once

#include "predinv/nn/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace predinv::nn {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<ParamView>& params) = 0;
    static void zero_grad(std::vector<ParamView>& params);
};

class Adam : public Optimizer {
public:
    explicit Adam(float lr = 1e-3f, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(std::vector<ParamView>& params) override;

private:
    float lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

class Sgd : public Optimizer {
public:
    explicit Sgd(float lr) : lr_(lr) {}
    void step(std::vector<ParamView>& params) override;

private:
    float lr_;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, float lr);

}  // namespace predinv::nn
