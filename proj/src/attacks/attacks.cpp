#include "predinv/attacks/attacks.hpp"

#include "predinv/errors.hpp"
#include "predinv/nn/layers.hpp"
#include "predinv/rng.hpp"
#include "predinv/trunc.hpp"

#include <cmath>
#include <cstdio>

namespace predinv::attacks {

void MiaPriorConfig::validate() const {
    if (steps < 0) throw ValidationError("mia: steps must be >= 0");
    if (alpha < 1.0f) throw ValidationError("mia: alpha must be >= 1");
    if (tv_beta < 1.0f) throw ValidationError("mia: tv_beta must be >= 1");
    if (alpha_weight < 0.0f || tv_weight < 0.0f) throw ValidationError("mia: prior weights must be >= 0");
    if (!(step_size > 0.0f)) throw ValidationError("mia: step_size must be > 0");
    if (loss != "cross-entropy" && loss != "l2") throw ValidationError("mia: loss must be cross-entropy or l2");
    if (init != "gray" && init != "noise") throw ValidationError("mia: init must be gray or noise");
}

json MiaPriorConfig::to_json() const {
    return json{{"alpha", alpha},         {"alpha_weight", alpha_weight},
                {"tv_beta", tv_beta},     {"tv_weight", tv_weight},
                {"steps", steps},         {"step_size", step_size},
                {"clamp", clamp},         {"loss", loss},
                {"init", init}};
}

MiaPriorConfig MiaPriorConfig::from_json(const json& j) {
    MiaPriorConfig c;
    c.alpha = j.value("alpha", c.alpha);
    c.alpha_weight = j.value("alpha_weight", c.alpha_weight);
    c.tv_beta = j.value("tv_beta", c.tv_beta);
    c.tv_weight = j.value("tv_weight", c.tv_weight);
    c.steps = j.value("steps", c.steps);
    c.step_size = j.value("step_size", c.step_size);
    c.clamp = j.value("clamp", c.clamp);
    c.loss = j.value("loss", c.loss);
    c.init = j.value("init", c.init);
    c.validate();
    return c;
}

// ------------------------------------------------------------ reconstruct

AttackResult reconstruct(const models::InversionModel& inv, const Mat& observed,
                         std::optional<bool> rescale) {
    const int k = inv.spec().input_dim;
    if (observed.cols() != k) throw ValidationError("reconstruct: observed dimension mismatch");

    int max_nonzero = 0;
    for (int i = 0; i < observed.rows(); ++i) {
        int nz = 0;
        for (int j = 0; j < k; ++j) {
            if (observed(i, j) != 0.0f) ++nz;
        }
        max_nonzero = std::max(max_nonzero, nz);
    }
    const bool use_rescale = rescale.value_or(inv.rescaled_inputs);
    Mat u = use_rescale ? trunc::rescale_to_logits(observed, inv.rescale_state()) : observed;

    AttackResult res;
    res.images = inv.decode(u);
    res.meta = {{"rescaled", use_rescale}, {"observed_m", max_nonzero}, {"trained_m", inv.trained_m}};
    if (inv.trained_m > 0 && max_nonzero > inv.trained_m) {
        res.meta["truncation_mismatch"] = true;
        std::fprintf(stderr,
                     "reconstruct: observed vectors carry %d nonzero scores but the model was "
                     "trained at m=%d\n",
                     max_nonzero, inv.trained_m);
    }
    return res;
}

AttackResult infer_classes(const models::InversionModel& inv, int k, float confidence) {
    if (k != inv.spec().input_dim) throw ValidationError("infer_classes: k does not match the model input");
    Mat rows = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        auto v = trunc::one_hot(i, k, confidence);
        for (int j = 0; j < k; ++j) rows(i, j) = v[j];
    }
    AttackResult res = reconstruct(inv, rows);
    res.target_classes.resize(k);
    res.target_ids.resize(k);
    for (int i = 0; i < k; ++i) {
        res.target_classes[i] = i;
        res.target_ids[i] = "class#" + std::to_string(i);
    }
    res.meta["confidence"] = confidence;
    if (inv.trained_m != 1) {
        res.meta["regime_mismatch"] = true;
        std::fprintf(stderr, "infer_classes: model was trained at m=%d, not the m=1 regime\n",
                     inv.trained_m);
    }
    return res;
}

// ------------------------------------------------------------------- MIA

namespace {

double alpha_norm(const Tensor& x, float alpha) {
    double s = 0.0;
    for (float v : x.v) s += std::pow(std::abs(static_cast<double>(v)), alpha);
    return s;
}

void alpha_norm_grad(const Tensor& x, float alpha, float weight, Tensor& grad) {
    for (std::size_t j = 0; j < x.size(); ++j) {
        const float v = x.v[j];
        if (v == 0.0f) continue;
        const float mag = std::pow(std::abs(v), alpha - 1.0f);
        grad.v[j] += weight * alpha * (v > 0.0f ? mag : -mag);
    }
}

}  // namespace

AttackResult mia_invert(const models::Classifier& classifier, int target_class,
                        const MiaPriorConfig& prior, std::uint64_t seed) {
    prior.validate();
    const auto& spec = classifier.spec();
    if (target_class < 0 || target_class >= spec.num_classes) {
        throw ValidationError("mia_invert: target class out of range");
    }
    models::Classifier model = classifier;  // white-box copy; gradients stay local

    Tensor x(1, 1, spec.height, spec.width);
    if (prior.init == "gray") {
        std::fill(x.v.begin(), x.v.end(), 0.5f);
    } else {
        Rng rng = derive_rng(seed, "mia-init");
        for (float& v : x.v) v = rng.unit();
    }
    const std::vector<int> target{target_class};

    double loss_initial = 0.0, loss_final = 0.0;
    float confidence = 0.0f;
    for (int step = 0; step <= prior.steps; ++step) {
        models::TrainCtx ctx;
        Mat z = model.forward(x, ctx, false);  // stored statistics; single image
        Mat dz;
        double loss;
        if (prior.loss == "cross-entropy") {
            loss = nn::cross_entropy(z, target, &dz);
        } else {
            Mat p = nn::softmax(z);
            Mat diff = p;
            diff(0, target_class) -= 1.0f;
            loss = diff.squaredNorm();
            // d/dz of ||softmax(z) - y||^2
            const float dot = (2.0f * diff).cwiseProduct(p).sum();
            dz = p.cwiseProduct(2.0f * diff) - p * dot;
        }
        loss += prior.alpha_weight * alpha_norm(x, prior.alpha);
        loss += prior.tv_weight * tv_penalty(x.data(), x.h, x.w, prior.tv_beta);
        if (!std::isfinite(loss)) {
            throw TrainingError("mia_invert: non-finite loss at step " + std::to_string(step));
        }
        Mat pcur = nn::softmax(z);
        confidence = pcur(0, target_class);
        if (step == 0) loss_initial = loss;
        loss_final = loss;
        if (step == prior.steps) break;

        Tensor dx = model.backward_to_input(dz, ctx);
        if (prior.alpha_weight > 0.0f) alpha_norm_grad(x, prior.alpha, prior.alpha_weight, dx);
        if (prior.tv_weight > 0.0f) {
            tv_penalty_grad(x.data(), x.h, x.w, prior.tv_beta, prior.tv_weight, dx.data());
        }
        for (std::size_t j = 0; j < x.size(); ++j) {
            x.v[j] -= prior.step_size * dx.v[j];
            if (prior.clamp) x.v[j] = std::clamp(x.v[j], 0.0f, 1.0f);
        }
    }

    AttackResult res;
    res.images = x;
    res.target_classes = {target_class};
    res.target_ids = {"class#" + std::to_string(target_class)};
    res.metrics = {confidence};
    res.meta = {{"loss_initial", loss_initial},
                {"loss_final", loss_final},
                {"confidence", confidence},
                {"steps", prior.steps},
                {"prior", prior.to_json()}};
    return res;
}

// -------------------------------------------------------------------- TV

double tv_penalty(const float* image, int h, int w, float beta) {
    if (h < 2 || w < 2) throw ValidationError("tv_penalty: image must be at least 2x2");
    double total = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double s = 0.0;
            if (j + 1 < w) {
                const double dh = static_cast<double>(image[i * w + j + 1]) - image[i * w + j];
                s += dh * dh;
            }
            if (i + 1 < h) {
                const double dv = static_cast<double>(image[(i + 1) * w + j]) - image[i * w + j];
                s += dv * dv;
            }
            if (s > 0.0) total += std::pow(s, beta / 2.0);
        }
    }
    return total;
}

double tv_penalty(const Tensor& single_image, float beta) {
    if (single_image.n != 1 || single_image.c != 1) {
        throw ValidationError("tv_penalty: expected a single-plane image");
    }
    return tv_penalty(single_image.data(), single_image.h, single_image.w, beta);
}

void tv_penalty_grad(const float* image, int h, int w, float beta, float weight, float* grad) {
    if (h < 2 || w < 2) throw ValidationError("tv_penalty: image must be at least 2x2");
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double s = 0.0;
            double dh = 0.0, dv = 0.0;
            if (j + 1 < w) {
                dh = static_cast<double>(image[i * w + j + 1]) - image[i * w + j];
                s += dh * dh;
            }
            if (i + 1 < h) {
                dv = static_cast<double>(image[(i + 1) * w + j]) - image[i * w + j];
                s += dv * dv;
            }
            if (s <= 0.0) continue;
            const double coef = weight * (beta / 2.0) * std::pow(s, beta / 2.0 - 1.0);
            if (j + 1 < w) {
                grad[i * w + j + 1] += static_cast<float>(coef * 2.0 * dh);
                grad[i * w + j] -= static_cast<float>(coef * 2.0 * dh);
            }
            if (i + 1 < h) {
                grad[(i + 1) * w + j] += static_cast<float>(coef * 2.0 * dv);
                grad[i * w + j] -= static_cast<float>(coef * 2.0 * dv);
            }
        }
    }
}

}  // namespace predinv::attacks
