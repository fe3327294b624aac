#include "predinv/errors.hpp"
#include "predinv/rng.hpp"
#include "predinv/trunc.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace predinv;

namespace {

std::vector<float> random_probability_vector(Rng& rng, int k) {
    std::vector<float> v(k);
    float sum = 0.0f;
    for (auto& x : v) {
        x = rng.unit() + 1e-6f;
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

std::set<int> support(const std::vector<float>& v) {
    std::set<int> s;
    for (int i = 0; i < static_cast<int>(v.size()); ++i) {
        if (v[i] != 0.0f) s.insert(i);
    }
    return s;
}

int argmax(const std::vector<float>& v) {
    int a = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[a]) a = i;
    }
    return a;
}

std::vector<float> softmax_vec(const std::vector<float>& z) {
    float mx = z[0];
    for (float x : z) mx = std::max(mx, x);
    std::vector<float> p(z.size());
    float sum = 0.0f;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
}

}  // namespace

TEST_CASE("truncate_m keeps the m largest values in place") {
    // worked example from the problem statement of m-truncation
    const std::vector<float> v{0.6f, 0.05f, 0.06f, 0.2f, 0.09f};
    const std::vector<float> expect{0.6f, 0.0f, 0.0f, 0.2f, 0.0f};
    CHECK(trunc::truncate_m(v, 2) == expect);
}

TEST_CASE("truncate_m with m=k is the identity") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(12));
        auto v = random_probability_vector(rng, k);
        CHECK(trunc::truncate_m(v, k) == v);
    }
}

TEST_CASE("truncate_m breaks ties toward lower indices") {
    const std::vector<float> v{0.25f, 0.25f, 0.25f, 0.25f};
    const auto out = trunc::truncate_m(v, 1);
    CHECK(out == std::vector<float>{0.25f, 0.0f, 0.0f, 0.0f});

    // brute force over all stable top-1 selections confirms index 0 is the
    // unique selection consistent with the stable rule
    const auto mask = trunc::top_m_mask(v.data(), 4, 1);
    CHECK(mask == std::vector<std::uint8_t>{1, 0, 0, 0});
}

TEST_CASE("truncate_m rejects out-of-range m") {
    const std::vector<float> v{0.5f, 0.5f};
    CHECK_THROWS_AS(trunc::truncate_m(v, 0), ValidationError);
    CHECK_THROWS_AS(trunc::truncate_m(v, 3), ValidationError);
}

TEST_CASE("truncate_m properties: idempotence, refinement, mass, argmax") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(15));
        auto v = random_probability_vector(rng, k);
        const int m1 = 1 + static_cast<int>(rng.below(k));
        const int m2 = m1 + static_cast<int>(rng.below(k - m1 + 1));

        auto t1 = trunc::truncate_m(v, m1);
        // idempotence
        CHECK(trunc::truncate_m(t1, m1) == t1);

        // monotone refinement (random positive entries are distinct with
        // probability one, so no ties straddle the cut)
        auto t2 = trunc::truncate_m(v, m2);
        const auto s1 = support(t1);
        const auto s2 = support(t2);
        for (int idx : s1) CHECK(s2.count(idx) == 1);

        // mass bound
        double mv = 0.0, mt = 0.0;
        for (float x : v) mv += x;
        for (float x : t1) mt += x;
        CHECK(mt <= mv + 1e-7);
        if (m1 == k) CHECK(mt == doctest::Approx(mv));

        // argmax preservation
        CHECK(argmax(t1) == argmax(v));
    }
}

TEST_CASE("one_hot basics") {
    CHECK(trunc::one_hot(2, 5) == std::vector<float>{0, 0, 1, 0, 0});
    CHECK(trunc::one_hot(0, 1) == std::vector<float>{1});
    CHECK_THROWS_AS(trunc::one_hot(5, 5), ValidationError);
    CHECK_THROWS_AS(trunc::one_hot(-1, 5), ValidationError);
    CHECK_THROWS_AS(trunc::one_hot(0, 3, 0.0f), ValidationError);
}

TEST_CASE("rescale_to_logits hand example") {
    trunc::RescaleState st;
    st.c = 0.0f;
    st.eps = 1e-8f;
    const auto out = trunc::rescale_to_logits(std::vector<float>{1.0f, 0.0f, 0.0f}, st);
    CHECK(out[0] == doctest::Approx(0.0f));
    CHECK(out[1] == doctest::Approx(std::log(1e-8f)));
    CHECK(out[2] == doctest::Approx(std::log(1e-8f)));
}

TEST_CASE("rescale_to_logits maps a uniform vector to a constant") {
    trunc::RescaleState st;
    st.c = 1.5f;
    for (int k : {2, 5, 10}) {
        std::vector<float> u(k, 1.0f / k);
        const auto out = trunc::rescale_to_logits(u, st);
        for (float x : out) CHECK(x == doctest::Approx(std::log(1.0f / k) + 1.5f));
    }
}

TEST_CASE("rescale round-trip: softmax(rescale(p)) == p for positive p") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(12));
        auto p = random_probability_vector(rng, k);
        trunc::RescaleState st;
        st.c = rng.uniform(-5.0f, 5.0f);
        const auto z = trunc::rescale_to_logits(p, st);
        const auto back = softmax_vec(z);
        for (int i = 0; i < k; ++i) CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-5));
    }
}

TEST_CASE("rescale_to_logits validates inputs") {
    trunc::RescaleState st;
    CHECK_THROWS_AS(trunc::rescale_to_logits(std::vector<float>{-0.1f, 1.1f}, st), ValidationError);
    st.eps = 0.0f;
    CHECK_THROWS_AS(trunc::rescale_to_logits(std::vector<float>{0.5f, 0.5f}, st), ValidationError);
}
