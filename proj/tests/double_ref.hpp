#pragma once

// Independent double-precision replica of the two tiny network architectures,
// used as the finite-difference oracle for gradient checks. Deliberately
// written as plain loops, sharing no code with the library's forward path.

#include "predinv/models/models.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace doubleref {

using Params = std::map<std::string, std::vector<double>>;

inline Params snapshot(std::vector<predinv::nn::ParamView> views) {
    Params p;
    for (const auto& v : views) p[v.name] = std::vector<double>(v.w, v.w + v.size);
    return p;
}

struct Plane {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
};

inline std::vector<Plane> conv2d(const std::vector<Plane>& xs, const std::vector<double>& W,
                                 const std::vector<double>& b, int cin, int cout, int k, int stride,
                                 int pad) {
    std::vector<Plane> ys;
    for (const auto& x : xs) {
        const int oh = (x.h + 2 * pad - k) / stride + 1;
        const int ow = (x.w + 2 * pad - k) / stride + 1;
        Plane y(cout, oh, ow);
        for (int co = 0; co < cout; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b[co];
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < k; ++ky) {
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += W[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx] *
                                       x.at(ci, iy, ix);
                            }
                        }
                    }
                    y.at(co, oy, ox) = acc;
                }
            }
        }
        ys.push_back(std::move(y));
    }
    return ys;
}

// transposed conv with weight layout (cin, cout, k, k)
inline std::vector<Plane> tconv2d(const std::vector<Plane>& xs, const std::vector<double>& W,
                                  const std::vector<double>& b, int cin, int cout, int k, int stride,
                                  int pad) {
    std::vector<Plane> ys;
    for (const auto& x : xs) {
        const int oh = (x.h - 1) * stride - 2 * pad + k;
        const int ow = (x.w - 1) * stride - 2 * pad + k;
        Plane y(cout, oh, ow);
        for (int co = 0; co < cout; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) y.at(co, oy, ox) = b[co];
            }
        }
        for (int ci = 0; ci < cin; ++ci) {
            for (int iy = 0; iy < x.h; ++iy) {
                for (int ix = 0; ix < x.w; ++ix) {
                    const double xv = x.at(ci, iy, ix);
                    for (int co = 0; co < cout; ++co) {
                        for (int ky = 0; ky < k; ++ky) {
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * stride + ky - pad;
                                const int ox = ix * stride + kx - pad;
                                if (oy < 0 || oy >= y.h || ox < 0 || ox >= y.w) continue;
                                y.at(co, oy, ox) +=
                                    xv * W[((static_cast<std::size_t>(ci) * cout + co) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
        ys.push_back(std::move(y));
    }
    return ys;
}

inline void batchnorm_train(std::vector<Plane>& xs, const std::vector<double>& gamma,
                            const std::vector<double>& beta, double eps = 1e-5) {
    const int c = xs.front().c;
    const int plane = xs.front().h * xs.front().w;
    const double N = static_cast<double>(xs.size()) * plane;
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0.0, sq = 0.0;
        for (const auto& x : xs) {
            for (int j = 0; j < plane; ++j) {
                const double v = x.v[static_cast<std::size_t>(ci) * plane + j];
                sum += v;
                sq += v * v;
            }
        }
        const double mean = sum / N;
        const double var = std::max(sq / N - mean * mean, 0.0);
        const double invstd = 1.0 / std::sqrt(var + eps);
        for (auto& x : xs) {
            for (int j = 0; j < plane; ++j) {
                auto& v = x.v[static_cast<std::size_t>(ci) * plane + j];
                v = gamma[ci] * ((v - mean) * invstd) + beta[ci];
            }
        }
    }
}

inline void maxpool2(std::vector<Plane>& xs) {
    for (auto& x : xs) {
        Plane y(x.c, x.h / 2, x.w / 2);
        for (int ci = 0; ci < x.c; ++ci) {
            for (int oy = 0; oy < y.h; ++oy) {
                for (int ox = 0; ox < y.w; ++ox) {
                    double best = x.at(ci, 2 * oy, 2 * ox);
                    for (int ky = 0; ky < 2; ++ky) {
                        for (int kx = 0; kx < 2; ++kx) {
                            best = std::max(best, x.at(ci, 2 * oy + ky, 2 * ox + kx));
                        }
                    }
                    y.at(ci, oy, ox) = best;
                }
            }
        }
        x = std::move(y);
    }
}

inline void relu(std::vector<Plane>& xs) {
    for (auto& x : xs) {
        for (auto& v : x.v) v = v > 0.0 ? v : 0.0;
    }
}

// full classification objective of the tiny classifier: CE + lambda * sum W^2
inline double classifier_loss(const predinv::models::ClassifierSpec& spec, const Params& params,
                              const predinv::Tensor& images, const std::vector<int>& labels,
                              double lambda) {
    std::vector<Plane> xs;
    for (int i = 0; i < images.n; ++i) {
        Plane p(1, images.h, images.w);
        const float* src = images.sample(i);
        for (std::size_t j = 0; j < p.v.size(); ++j) p.v[j] = src[j];
        xs.push_back(std::move(p));
    }
    int cin = 1;
    for (int b = 0; b < spec.blocks; ++b) {
        const std::string pre = "block" + std::to_string(b);
        xs = conv2d(xs, params.at(pre + ".conv.W"), params.at(pre + ".conv.b"), cin, spec.channels[b],
                    3, 1, 1);
        batchnorm_train(xs, params.at(pre + ".bn.gamma"), params.at(pre + ".bn.beta"));
        maxpool2(xs);
        relu(xs);
        cin = spec.channels[b];
    }
    const auto& W1 = params.at("fc1.W");
    const auto& b1 = params.at("fc1.b");
    const auto& W2 = params.at("fc2.W");
    const auto& b2 = params.at("fc2.b");
    const int flat = xs.front().c * xs.front().h * xs.front().w;
    const int hidden = static_cast<int>(b1.size());
    const int k = static_cast<int>(b2.size());

    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<double> h(hidden), z(k);
        for (int o = 0; o < hidden; ++o) {
            double acc = b1[o];
            for (int j = 0; j < flat; ++j) acc += W1[static_cast<std::size_t>(o) * flat + j] * xs[i].v[j];
            h[o] = acc > 0.0 ? acc : 0.0;
        }
        for (int o = 0; o < k; ++o) {
            double acc = b2[o];
            for (int j = 0; j < hidden; ++j) acc += W2[static_cast<std::size_t>(o) * hidden + j] * h[j];
            z[o] = acc;
        }
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - mx);
        total += mx + std::log(lse) - z[labels[i]];
    }
    double loss = total / static_cast<double>(xs.size());
    if (lambda > 0.0) {
        for (const auto& [name, vals] : params) {
            if (name.size() >= 2 && name.substr(name.size() - 2) == ".W") {
                for (double v : vals) loss += lambda * v * v;
            }
        }
    }
    return loss;
}

// blackbox reconstruction objective of the tiny decoder, from raw predictions
inline double inversion_loss(const predinv::models::InversionSpec& spec, const Params& params,
                             const predinv::Mat& preds, const predinv::Tensor& targets, int m,
                             bool rescale, const std::string& reduction, double eps_floor = 1e-8) {
    const int k = spec.input_dim;
    std::vector<Plane> xs;
    for (int i = 0; i < preds.rows(); ++i) {
        // truncate to the m largest (stable, lower index wins), then rescale
        std::vector<double> row(k);
        for (int j = 0; j < k; ++j) row[j] = preds(i, j);
        if (m >= 1 && m < k) {
            std::vector<int> order(k);
            for (int j = 0; j < k; ++j) order[j] = j;
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return row[a] > row[b]; });
            std::vector<double> kept(k, 0.0);
            for (int j = 0; j < m; ++j) kept[order[j]] = row[order[j]];
            row = kept;
        }
        const double c = params.at("rescale.c")[0];
        Plane p(k, 1, 1);
        for (int j = 0; j < k; ++j) {
            p.v[j] = rescale ? std::log(std::max(row[j], eps_floor)) + c : row[j];
        }
        xs.push_back(std::move(p));
    }
    int cin = spec.input_dim;
    for (int b = 0; b < spec.blocks; ++b) {
        const std::string pre = "block" + std::to_string(b);
        const bool first = b == 0;
        xs = tconv2d(xs, params.at(pre + ".tconv.W"), params.at(pre + ".tconv.b"), cin,
                     spec.channels[b], 4, first ? 1 : 2, first ? 0 : 1);
        if (b + 1 < spec.blocks) {
            batchnorm_train(xs, params.at(pre + ".bn.gamma"), params.at(pre + ".bn.beta"));
            for (auto& x : xs) {
                for (auto& v : x.v) v = std::tanh(v);
            }
        } else {
            for (auto& x : xs) {
                for (auto& v : x.v) v = 1.0 / (1.0 + std::exp(-v));
            }
        }
        cin = spec.channels[b];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const float* t = targets.sample(static_cast<int>(i));
        for (std::size_t j = 0; j < xs[i].v.size(); ++j) {
            const double d = xs[i].v[j] - t[j];
            total += d * d;
        }
    }
    const double n = static_cast<double>(xs.size());
    if (reduction == "per-image-sum") return total / n;
    return total / (n * xs.front().v.size());
}

}  // namespace doubleref
