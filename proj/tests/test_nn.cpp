#include "predinv/errors.hpp"
#include "predinv/models/models.hpp"
#include "predinv/nn/layers.hpp"
#include "predinv/nn/optim.hpp"
#include "predinv/rng.hpp"
#include "predinv/train/train.hpp"
#include "predinv/trunc.hpp"

#include "double_ref.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace predinv;

namespace {

// Central differences on the double-precision reference objective vs the
// implementation's analytic float32 gradients. The reference is independent
// test code; h=1e-6 in double makes the numeric side essentially exact.
struct GradCheck {
    double worst_rel = 0.0;
    int checked = 0, skipped = 0;
};

GradCheck gradcheck(std::vector<nn::ParamView>& params,
                    const std::function<double(const doubleref::Params&)>& ref_loss,
                    const std::function<void()>& analytic, double h = 1e-6) {
    nn::Optimizer::zero_grad(params);
    analytic();
    doubleref::Params ref = doubleref::snapshot(params);
    GradCheck gc;
    for (auto& p : params) {
        auto& vals = ref.at(p.name);
        for (std::size_t j = 0; j < p.size; ++j) {
            const double keep = vals[j];
            vals[j] = keep + h;
            const double up = ref_loss(ref);
            vals[j] = keep - h;
            const double dn = ref_loss(ref);
            vals[j] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            const double analyticv = p.g[j];
            const double denom = std::max(std::abs(numeric), std::abs(analyticv));
            if (denom < 1e-4) {
                ++gc.skipped;
                continue;
            }
            gc.worst_rel = std::max(gc.worst_rel, std::abs(numeric - analyticv) / denom);
            ++gc.checked;
        }
    }
    return gc;
}

Tensor random_images(int n, int h, int w, std::uint64_t seed) {
    Tensor t(n, 1, h, w);
    Rng rng(seed);
    for (auto& v : t.v) v = rng.unit();
    return t;
}

}  // namespace

TEST_CASE("softmax hand examples") {
    Mat z(2, 2);
    z << 0.0f, std::log(3.0f), 1.0f, 1.0f;
    Mat p = nn::softmax(z);
    CHECK(p(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(p(0, 1) == doctest::Approx(0.75).epsilon(1e-6));
    CHECK(p(1, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p(1, 1) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("softmax rows are normalized and nonnegative") {
    Rng rng(3);
    Mat z(64, 10);
    for (int i = 0; i < z.rows(); ++i) {
        for (int j = 0; j < z.cols(); ++j) z(i, j) = rng.uniform(-20.0f, 20.0f);
    }
    Mat p = nn::softmax(z);
    for (int i = 0; i < p.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < p.cols(); ++j) {
            CHECK(p(i, j) >= 0.0f);
            sum += p(i, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax is shift invariant") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Mat z(1, 8);
        for (int j = 0; j < 8; ++j) z(0, j) = rng.uniform(-10.0f, 10.0f);
        const float c = rng.uniform(-50.0f, 50.0f);
        Mat zs = z.array() + c;
        Mat a = nn::softmax(z), b = nn::softmax(zs);
        for (int j = 0; j < 8; ++j) CHECK(std::abs(a(0, j) - b(0, j)) <= 1e-6f);
    }
}

TEST_CASE("mse_loss reductions and examples") {
    Tensor zeros(2, 1, 4, 4), ones(2, 1, 4, 4);
    std::fill(ones.v.begin(), ones.v.end(), 1.0f);
    CHECK(nn::mse_loss(zeros, zeros, "per-pixel-mean", nullptr) == doctest::Approx(0.0));
    CHECK(nn::mse_loss(zeros, ones, "per-pixel-mean", nullptr) == doctest::Approx(1.0));
    CHECK(nn::mse_loss(zeros, ones, "per-image-sum", nullptr) == doctest::Approx(16.0));
    CHECK_THROWS_AS(nn::mse_loss(zeros, Tensor(1, 1, 4, 4), "per-pixel-mean", nullptr), ValidationError);
    CHECK_THROWS_AS(nn::mse_loss(zeros, zeros, "bogus", nullptr), ValidationError);
}

TEST_CASE("classification loss gradients match central finite differences") {
    models::ClassifierSpec spec;
    spec.height = spec.width = 8;
    spec.blocks = 3;
    spec.num_classes = 3;
    spec.channels = {2, 3, 4};
    spec.fc_dims = {5, 3};
    models::Classifier model(spec, 123);

    Tensor x = random_images(2, 8, 8, 77);
    const std::vector<int> y{0, 2};
    auto params = model.params();

    // the reference objective itself must agree with the implementation
    const double impl = train::classifier_loss(model, x, y, 0.0f, false);
    const double ref = doubleref::classifier_loss(spec, doubleref::snapshot(params), x, y, 0.0);
    CHECK(impl == doctest::Approx(ref).epsilon(1e-4));

    SUBCASE("plain cross-entropy") {
        auto gc = gradcheck(
            params,
            [&](const doubleref::Params& p) { return doubleref::classifier_loss(spec, p, x, y, 0.0); },
            [&] { train::classifier_loss(model, x, y, 0.0f, true); });
        CHECK(gc.checked > 50);
        CHECK(gc.worst_rel <= 1e-3);
    }
    SUBCASE("with the weight penalty term") {
        auto gc = gradcheck(
            params,
            [&](const doubleref::Params& p) { return doubleref::classifier_loss(spec, p, x, y, 0.05); },
            [&] { train::classifier_loss(model, x, y, 0.05f, true); });
        CHECK(gc.checked > 50);
        CHECK(gc.worst_rel <= 1e-3);
    }
}

TEST_CASE("reconstruction loss gradients match central finite differences") {
    models::InversionSpec spec;
    spec.input_dim = 3;
    spec.blocks = 2;
    spec.height = spec.width = 8;
    spec.channels = {3, 1};
    models::InversionModel model(spec, 321);

    Mat preds(2, 3);
    preds << 0.7f, 0.2f, 0.1f, 0.15f, 0.8f, 0.05f;
    Tensor targets = random_images(2, 8, 8, 99);
    auto params = model.params();

    const double impl = train::inversion_loss(model, preds, targets, 2, true, "per-image-sum", false);
    const double ref =
        doubleref::inversion_loss(spec, doubleref::snapshot(params), preds, targets, 2, true, "per-image-sum");
    CHECK(impl == doctest::Approx(ref).epsilon(1e-4));

    SUBCASE("truncated + rescaled input path") {
        auto gc = gradcheck(
            params,
            [&](const doubleref::Params& p) {
                return doubleref::inversion_loss(spec, p, preds, targets, 2, true, "per-image-sum");
            },
            [&] { train::inversion_loss(model, preds, targets, 2, true, "per-image-sum", true); });
        CHECK(gc.checked > 50);
        CHECK(gc.worst_rel <= 1e-3);
    }
    SUBCASE("raw probability input path") {
        auto gc = gradcheck(
            params,
            [&](const doubleref::Params& p) {
                return doubleref::inversion_loss(spec, p, preds, targets, 0, false, "per-pixel-mean");
            },
            [&] { train::inversion_loss(model, preds, targets, 0, false, "per-pixel-mean", true); });
        CHECK(gc.checked > 50);
        CHECK(gc.worst_rel <= 1e-3);
    }
}

TEST_CASE("layer init is deterministic under the seed") {
    models::ClassifierSpec spec;
    spec.height = spec.width = 8;
    spec.blocks = 3;
    spec.num_classes = 2;
    spec.channels = {2, 2, 2};
    spec.fc_dims = {4, 2};
    models::Classifier a(spec, 55), b(spec, 55), c(spec, 56);
    auto pa = a.params(), pb = b.params(), pc = c.params();
    bool all_equal = true, any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pa[i].size; ++j) {
            if (pa[i].w[j] != pb[i].w[j]) all_equal = false;
            if (pa[i].w[j] != pc[i].w[j]) any_diff = true;
        }
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("adam and sgd move parameters in the gradient direction") {
    std::vector<float> w{1.0f, -1.0f}, g{0.5f, -0.5f};
    std::vector<nn::ParamView> params{{"w", w.data(), g.data(), 2}};
    SUBCASE("adam") {
        nn::Adam opt(0.1f);
        opt.step(params);
        CHECK(w[0] < 1.0f);
        CHECK(w[1] > -1.0f);
    }
    SUBCASE("sgd") {
        nn::Sgd opt(0.1f);
        opt.step(params);
        CHECK(w[0] == doctest::Approx(0.95f));
        CHECK(w[1] == doctest::Approx(-0.95f));
    }
    CHECK_THROWS_AS(nn::make_optimizer("rmsprop", 0.1f), ValidationError);
}
