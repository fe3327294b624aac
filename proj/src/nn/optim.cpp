#include "predinv/nn/optim.hpp"

#include "predinv/errors.hpp"

#include <cmath>
#include <memory>

namespace predinv::nn {

void Optimizer::zero_grad(std::vector<ParamView>& params) {
    for (auto& p : params) std::fill(p.g, p.g + p.size, 0.0f);
}

void Adam::step(std::vector<ParamView>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size, 0.0f);
            v_.emplace_back(p.size, 0.0f);
        }
    }
    ++t_;
    const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        float* m = m_[pi].data();
        float* v = v_[pi].data();
        for (std::size_t j = 0; j < p.size; ++j) {
            const float g = p.g[j];
            m[j] = beta1_ * m[j] + (1.0f - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0f - beta2_) * g * g;
            const float mhat = m[j] / bc1;
            const float vhat = v[j] / bc2;
            p.w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Sgd::step(std::vector<ParamView>& params) {
    for (auto& p : params) {
        for (std::size_t j = 0; j < p.size; ++j) p.w[j] -= lr_ * p.g[j];
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, float lr) {
    if (name == "adam") return std::make_unique<Adam>(lr);
    if (name == "sgd") return std::make_unique<Sgd>(lr);
    throw ValidationError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

}  // namespace predinv::nn
