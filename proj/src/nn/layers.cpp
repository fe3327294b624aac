#include "predinv/nn/layers.hpp"

#include "predinv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace predinv::nn {

namespace {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// image (c,H,W) -> cols (c*k*k, oh*ow)
void im2col(const float* img, int c, int H, int W, int k, int stride, int pad, float* cols) {
    const int oh = conv_out_dim(H, k, stride, pad);
    const int ow = conv_out_dim(W, k, stride, pad);
    const int P = oh * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) {
                        std::fill(row + oy * ow, row + (oy + 1) * ow, 0.0f);
                        continue;
                    }
                    const float* src = img + (static_cast<std::size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        row[oy * ow + ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// adjoint of im2col; img must be zeroed by the caller
void col2im(const float* cols, int c, int H, int W, int k, int stride, int pad, float* img) {
    const int oh = conv_out_dim(H, k, stride, pad);
    const int ow = conv_out_dim(W, k, stride, pad);
    const int P = oh * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    float* dst = img + (static_cast<std::size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

void init_uniform(std::vector<float>& w, int fan_in, Rng& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (float& x : w) x = rng.uniform(-bound, bound);
}

}  // namespace

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n > 0 ? n : 0);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin_, int cout_, int k_, int stride_, int pad_)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_),
      W(static_cast<std::size_t>(cout_) * cin_ * k_ * k_),
      b(cout_), gW(W.size(), 0.0f), gb(cout_, 0.0f) {}

void Conv2d::init(Rng& rng) {
    init_uniform(W, cin * k * k, rng);
    std::fill(b.begin(), b.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
    const int oh = conv_out_dim(x.h, k, stride, pad);
    const int ow = conv_out_dim(x.w, k, stride, pad);
    const int P = oh * ow;
    const int ck2 = cin * k * k;
    Tensor y(x.n, cout, oh, ow);
    ConstMatMap Wm(W.data(), cout, ck2);

#pragma omp parallel
    {
        std::vector<float> cols(static_cast<std::size_t>(ck2) * P);
#pragma omp for schedule(static)
        for (int i = 0; i < x.n; ++i) {
            im2col(x.sample(i), cin, x.h, x.w, k, stride, pad, cols.data());
            MatMap yi(y.sample(i), cout, P);
            yi.noalias() = Wm * ConstMatMap(cols.data(), ck2, P);
            for (int co = 0; co < cout; ++co) yi.row(co).array() += b[co];
        }
    }
    if (cache) cache->x = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.x;
    const int oh = dy.h, ow = dy.w, P = oh * ow;
    const int ck2 = cin * k * k;
    Tensor dx(x.n, x.c, x.h, x.w);
    ConstMatMap Wm(W.data(), cout, ck2);

    const int T = max_threads();
    std::vector<std::vector<double>> gW_part(T, std::vector<double>(W.size(), 0.0));
    std::vector<std::vector<double>> gb_part(T, std::vector<double>(cout, 0.0));

#pragma omp parallel
    {
#ifdef _OPENMP
        const int t = omp_get_thread_num();
#else
        const int t = 0;
#endif
        std::vector<float> cols(static_cast<std::size_t>(ck2) * P);
        std::vector<float> dcols(static_cast<std::size_t>(ck2) * P);
        Mat gW_local = Mat::Zero(cout, ck2);
#pragma omp for schedule(static)
        for (int i = 0; i < x.n; ++i) {
            ConstMatMap dyi(dy.sample(i), cout, P);
            // data gradient
            MatMap(dcols.data(), ck2, P).noalias() = Wm.transpose() * dyi;
            col2im(dcols.data(), cin, x.h, x.w, k, stride, pad, dx.sample(i));
            // weight gradient
            im2col(x.sample(i), cin, x.h, x.w, k, stride, pad, cols.data());
            gW_local.noalias() += dyi * ConstMatMap(cols.data(), ck2, P).transpose();
            for (int co = 0; co < cout; ++co) gb_part[t][co] += dyi.row(co).sum();
        }
        for (std::size_t j = 0; j < W.size(); ++j) gW_part[t][j] = gW_local.data()[j];
    }
    for (int t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < W.size(); ++j) gW[j] += static_cast<float>(gW_part[t][j]);
        for (int co = 0; co < cout; ++co) gb[co] += static_cast<float>(gb_part[t][co]);
    }
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int cin_, int cout_, int k_, int stride_, int pad_)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_),
      W(static_cast<std::size_t>(cin_) * cout_ * k_ * k_),
      b(cout_), gW(W.size(), 0.0f), gb(cout_, 0.0f) {}

void ConvTranspose2d::init(Rng& rng) {
    init_uniform(W, cin * k * k, rng);
    std::fill(b.begin(), b.end(), 0.0f);
}

Tensor ConvTranspose2d::forward(const Tensor& x, Cache* cache) const {
    const int OH = out_dim(x.h), OW = out_dim(x.w);
    const int Pin = x.h * x.w;
    const int ck2 = cout * k * k;
    Tensor y(x.n, cout, OH, OW);
    ConstMatMap Wm(W.data(), cin, ck2);

#pragma omp parallel
    {
        std::vector<float> cols(static_cast<std::size_t>(ck2) * Pin);
#pragma omp for schedule(static)
        for (int i = 0; i < x.n; ++i) {
            ConstMatMap xi(x.sample(i), cin, Pin);
            MatMap(cols.data(), ck2, Pin).noalias() = Wm.transpose() * xi;
            col2im(cols.data(), cout, OH, OW, k, stride, pad, y.sample(i));
            MatMap yi(y.sample(i), cout, OH * OW);
            for (int co = 0; co < cout; ++co) yi.row(co).array() += b[co];
        }
    }
    if (cache) cache->x = x;
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.x;
    const int OH = dy.h, OW = dy.w;
    const int Pin = x.h * x.w;
    const int ck2 = cout * k * k;
    Tensor dx(x.n, x.c, x.h, x.w);
    ConstMatMap Wm(W.data(), cin, ck2);

    const int T = max_threads();
    std::vector<std::vector<double>> gW_part(T, std::vector<double>(W.size(), 0.0));
    std::vector<std::vector<double>> gb_part(T, std::vector<double>(cout, 0.0));

#pragma omp parallel
    {
#ifdef _OPENMP
        const int t = omp_get_thread_num();
#else
        const int t = 0;
#endif
        std::vector<float> dycols(static_cast<std::size_t>(ck2) * Pin);
        Mat gW_local = Mat::Zero(cin, ck2);
#pragma omp for schedule(static)
        for (int i = 0; i < x.n; ++i) {
            im2col(dy.sample(i), cout, OH, OW, k, stride, pad, dycols.data());
            ConstMatMap dyc(dycols.data(), ck2, Pin);
            MatMap(dx.sample(i), cin, Pin).noalias() = Wm * dyc;
            gW_local.noalias() += ConstMatMap(x.sample(i), cin, Pin) * dyc.transpose();
            ConstMatMap dyi(dy.sample(i), cout, OH * OW);
            for (int co = 0; co < cout; ++co) gb_part[t][co] += dyi.row(co).sum();
        }
        for (std::size_t j = 0; j < W.size(); ++j) gW_part[t][j] = gW_local.data()[j];
    }
    for (int t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < W.size(); ++j) gW[j] += static_cast<float>(gW_part[t][j]);
        for (int co = 0; co < cout; ++co) gb[co] += static_cast<float>(gb_part[t][co]);
    }
    return dx;
}

void ConvTranspose2d::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int c_)
    : c(c_), gamma(c_, 1.0f), beta(c_, 0.0f), ggamma(c_, 0.0f), gbeta(c_, 0.0f),
      running_mean(c_, 0.0f), running_var(c_, 1.0f) {}

Tensor BatchNorm2d::forward_train(const Tensor& x, Cache& cache) {
    const int plane = x.plane();
    const std::size_t N = static_cast<std::size_t>(x.n) * plane;
    Tensor y(x.n, x.c, x.h, x.w);
    cache.mean.assign(c, 0.0f);
    cache.invstd.assign(c, 0.0f);
    cache.train_stats = true;

#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.sample(i) + static_cast<std::size_t>(ci) * plane;
            for (int j = 0; j < plane; ++j) {
                sum += p[j];
                sq += static_cast<double>(p[j]) * p[j];
            }
        }
        const double mean = sum / static_cast<double>(N);
        const double var = std::max(sq / static_cast<double>(N) - mean * mean, 0.0);
        const float invstd = 1.0f / std::sqrt(static_cast<float>(var) + eps);
        cache.mean[ci] = static_cast<float>(mean);
        cache.invstd[ci] = invstd;
        running_mean[ci] = (1.0f - momentum) * running_mean[ci] + momentum * static_cast<float>(mean);
        running_var[ci] = (1.0f - momentum) * running_var[ci] + momentum * static_cast<float>(var);
        const float g = gamma[ci], bb = beta[ci], mu = cache.mean[ci];
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.sample(i) + static_cast<std::size_t>(ci) * plane;
            float* q = y.sample(i) + static_cast<std::size_t>(ci) * plane;
            for (int j = 0; j < plane; ++j) q[j] = g * ((p[j] - mu) * invstd) + bb;
        }
    }
    cache.x = x;
    return y;
}

Tensor BatchNorm2d::forward_eval(const Tensor& x, Cache* cache) const {
    const int plane = x.plane();
    Tensor y(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci) {
        const float mu = running_mean[ci];
        const float invstd = 1.0f / std::sqrt(running_var[ci] + eps);
        const float g = gamma[ci], bb = beta[ci];
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.sample(i) + static_cast<std::size_t>(ci) * plane;
            float* q = y.sample(i) + static_cast<std::size_t>(ci) * plane;
            for (int j = 0; j < plane; ++j) q[j] = g * ((p[j] - mu) * invstd) + bb;
        }
    }
    if (cache) {
        cache->x = x;
        cache->train_stats = false;
        cache->mean.assign(running_mean.begin(), running_mean.end());
        cache->invstd.resize(c);
        for (int ci = 0; ci < c; ++ci) cache->invstd[ci] = 1.0f / std::sqrt(running_var[ci] + eps);
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.x;
    const int plane = x.plane();
    const double N = static_cast<double>(x.n) * plane;
    Tensor dx(x.n, x.c, x.h, x.w);

#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci) {
        const float mu = cache.mean[ci], invstd = cache.invstd[ci], g = gamma[ci];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const float* px = x.sample(i) + static_cast<std::size_t>(ci) * plane;
            const float* pd = dy.sample(i) + static_cast<std::size_t>(ci) * plane;
            for (int j = 0; j < plane; ++j) {
                sum_dy += pd[j];
                sum_dy_xhat += static_cast<double>(pd[j]) * ((px[j] - mu) * invstd);
            }
        }
        ggamma[ci] += static_cast<float>(sum_dy_xhat);
        gbeta[ci] += static_cast<float>(sum_dy);
        if (cache.train_stats) {
            for (int i = 0; i < x.n; ++i) {
                const float* px = x.sample(i) + static_cast<std::size_t>(ci) * plane;
                const float* pd = dy.sample(i) + static_cast<std::size_t>(ci) * plane;
                float* pq = dx.sample(i) + static_cast<std::size_t>(ci) * plane;
                for (int j = 0; j < plane; ++j) {
                    const double xhat = (px[j] - mu) * invstd;
                    pq[j] = static_cast<float>(
                        (g * invstd / N) * (N * pd[j] - sum_dy - xhat * sum_dy_xhat));
                }
            }
        } else {
            // running statistics were constants in the forward pass
            const float scale = g * invstd;
            for (int i = 0; i < x.n; ++i) {
                const float* pd = dy.sample(i) + static_cast<std::size_t>(ci) * plane;
                float* pq = dx.sample(i) + static_cast<std::size_t>(ci) * plane;
                for (int j = 0; j < plane; ++j) pq[j] = scale * pd[j];
            }
        }
    }
    return dx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamView>& out) {
    out.push_back({prefix + ".gamma", gamma.data(), ggamma.data(), gamma.size()});
    out.push_back({prefix + ".beta", beta.data(), gbeta.data(), beta.size()});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<BufView>& out) {
    out.push_back({prefix + ".running_mean", running_mean.data(), running_mean.size()});
    out.push_back({prefix + ".running_var", running_var.data(), running_var.size()});
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, Cache* cache) const {
    const int oh = (x.h - k) / stride + 1;
    const int ow = (x.w - k) / stride + 1;
    Tensor y(x.n, x.c, oh, ow);
    if (cache) cache->argmax.assign(y.size(), 0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
        for (int ci = 0; ci < x.c; ++ci) {
            const float* plane = x.sample(i) + static_cast<std::size_t>(ci) * x.plane();
            float* out = y.sample(i) + static_cast<std::size_t>(ci) * y.plane();
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    int best = (oy * stride) * x.w + ox * stride;
                    float bv = plane[best];
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int idx = (oy * stride + ky) * x.w + ox * stride + kx;
                            if (plane[idx] > bv) {
                                bv = plane[idx];
                                best = idx;
                            }
                        }
                    }
                    out[oy * ow + ox] = bv;
                    if (cache) {
                        cache->argmax[((static_cast<std::size_t>(i) * x.c + ci) * oh + oy) * ow + ox] =
                            ci * x.plane() + best;
                    }
                }
            }
        }
    }
    if (cache) {
        cache->xn = x.n;
        cache->xc = x.c;
        cache->xh = x.h;
        cache->xw = x.w;
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy, const Cache& cache) const {
    Tensor dx(cache.xn, cache.xc, cache.xh, cache.xw);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < dy.n; ++i) {
        float* dst = dx.sample(i);
        const float* src = dy.sample(i);
        const std::size_t base = static_cast<std::size_t>(i) * dy.per_sample();
        for (int j = 0; j < dy.per_sample(); ++j) dst[cache.argmax[base + j]] += src[j];
    }
    return dx;
}

// ------------------------------------------------------------ Activation

Tensor Activation::forward(const Tensor& x, Cache* cache) const {
    Tensor y(x.n, x.c, x.h, x.w);
    const std::size_t sz = x.size();
    switch (kind) {
        case Act::ReLU:
            for (std::size_t j = 0; j < sz; ++j) y.v[j] = x.v[j] > 0.0f ? x.v[j] : 0.0f;
            break;
        case Act::Tanh:
            for (std::size_t j = 0; j < sz; ++j) y.v[j] = std::tanh(x.v[j]);
            break;
        case Act::Sigmoid:
            for (std::size_t j = 0; j < sz; ++j) y.v[j] = 1.0f / (1.0f + std::exp(-x.v[j]));
            break;
    }
    if (cache) cache->y = y;
    return y;
}

Tensor Activation::backward(const Tensor& dy, const Cache& cache) const {
    const Tensor& y = cache.y;
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t sz = dy.size();
    switch (kind) {
        case Act::ReLU:
            for (std::size_t j = 0; j < sz; ++j) dx.v[j] = y.v[j] > 0.0f ? dy.v[j] : 0.0f;
            break;
        case Act::Tanh:
            for (std::size_t j = 0; j < sz; ++j) dx.v[j] = dy.v[j] * (1.0f - y.v[j] * y.v[j]);
            break;
        case Act::Sigmoid:
            for (std::size_t j = 0; j < sz; ++j) dx.v[j] = dy.v[j] * y.v[j] * (1.0f - y.v[j]);
            break;
    }
    return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_, int out_)
    : in(in_), out(out_), W(static_cast<std::size_t>(out_) * in_), b(out_),
      gW(W.size(), 0.0f), gb(out_, 0.0f) {}

void Linear::init(Rng& rng) {
    init_uniform(W, in, rng);
    std::fill(b.begin(), b.end(), 0.0f);
}

Mat Linear::forward(const Mat& x, Mat* saved_x) const {
    ConstMatMap Wm(W.data(), out, in);
    Mat y = x * Wm.transpose();
    for (int co = 0; co < out; ++co) y.col(co).array() += b[co];
    if (saved_x) *saved_x = x;
    return y;
}

Mat Linear::backward(const Mat& dy, const Mat& saved_x) {
    ConstMatMap Wm(W.data(), out, in);
    MatMap gWm(gW.data(), out, in);
    gWm.noalias() += dy.transpose() * saved_x;
    for (int co = 0; co < out; ++co) gb[co] += dy.col(co).sum();
    return dy * Wm;
}

void Linear::collect(const std::string& prefix, std::vector<ParamView>& out_params) {
    out_params.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out_params.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

// ---------------------------------------------------------------- losses

Mat softmax(const Mat& logits) {
    Mat p = logits;
    for (int i = 0; i < p.rows(); ++i) {
        const float mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* dlogits) {
    const int n = static_cast<int>(logits.rows());
    const int k = static_cast<int>(logits.cols());
    if (static_cast<int>(labels.size()) != n) throw ValidationError("cross_entropy: label count mismatch");
    double total = 0.0;
    Mat p = softmax(logits);
    for (int i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= k) throw ValidationError("cross_entropy: label out of range");
        const float mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        total += lse - logits(i, y);
    }
    if (dlogits) {
        *dlogits = p / static_cast<float>(n);
        for (int i = 0; i < n; ++i) (*dlogits)(i, labels[i]) -= 1.0f / static_cast<float>(n);
    }
    return total / n;
}

double mse_loss(const Tensor& recon, const Tensor& target, const std::string& reduction, Tensor* drecon) {
    if (!recon.same_shape(target)) throw ValidationError("mse_loss: shape mismatch");
    const std::size_t sz = recon.size();
    double total = 0.0;
    for (std::size_t j = 0; j < sz; ++j) {
        const double d = static_cast<double>(recon.v[j]) - target.v[j];
        total += d * d;
    }
    double denom;
    if (reduction == "per-pixel-mean") {
        denom = static_cast<double>(sz);
    } else if (reduction == "per-image-sum") {
        denom = static_cast<double>(recon.n);
    } else {
        throw ValidationError("mse_loss: unknown reduction '" + reduction + "'");
    }
    if (drecon) {
        *drecon = Tensor(recon.n, recon.c, recon.h, recon.w);
        const float scale = static_cast<float>(2.0 / denom);
        for (std::size_t j = 0; j < sz; ++j) drecon->v[j] = scale * (recon.v[j] - target.v[j]);
    }
    return total / denom;
}

}  // namespace predinv::nn
