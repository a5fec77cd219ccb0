#include <doctest.h>

#include <cmath>

#include "oodcal/aleatoric.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/softmax.hpp"
#include "models.hpp"

using namespace oodcal;
using namespace oodcal::aleatoric;

TEST_SUITE("aleatoric") {

TEST_CASE("identity policy gives the plain prediction") {
    segnet::SegNet net(segnet::SegModelConfig{2, 4, 4, 3});
    auto x = ImageSlice(test::random_grid<float>(1, 16, 16, 1, 0.0, 1.0));
    auto e = estimate(net, x, augment::AugmentationPolicy::identity(), 6, 9);
    CHECK(e.n_aug == 6);
    CHECK(e.mu == net.forward(x).data());
    for (float v : e.var.values()) CHECK(v == 0.0f);
    auto p = alea_probability(net, x, augment::AugmentationPolicy::identity(), 4, 9);
    auto direct = softmax(net.forward(x));
    for (std::size_t i = 0; i < p.data().size(); ++i) CHECK(p.data()[i] == doctest::Approx(direct.data()[i]).epsilon(1e-12));
}

TEST_CASE("geometric policies are rejected") {
    test::LinearModel f(2.0);
    auto x = ImageSlice(TensorF::grid(1, 4, 4, 0.5f));
    CHECK_THROWS_AS(estimate(f, x, augment::AugmentationPolicy{}, 4, 1), Error);
    CHECK_NOTHROW(estimate(f, x, augment::AugmentationPolicy{}.photometric_only(), 4, 1));
}

TEST_CASE("linear model with additive noise: var = w^2 s^2") {
    const double w = 3.0, s = 0.05;
    test::LinearModel f(w);
    auto policy = augment::AugmentationPolicy::identity();
    policy.noise = true;
    policy.noise_std_range = {s, s};
    auto x = ImageSlice(TensorF::grid(1, 8, 8, 0.5f));
    const std::size_t n = 10000;
    auto e = estimate(f, x, policy, n, 21);
    const double want = w * w * s * s;
    // standard error of an unbiased Gaussian variance estimate
    const double se = want * std::sqrt(2.0 / static_cast<double>(n - 1));
    double mean_var = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t q = 0; q < 64; ++q) {
            const double v = e.var[c * 64 + q];
            CHECK(std::abs(v - want) < 4.5 * se);
            mean_var += v;
        }
    }
    mean_var /= 128.0;
    CHECK(std::abs(mean_var - want) < 3.0 * se);
    for (std::size_t q = 0; q < 64; ++q) CHECK(std::abs(e.mu[64 + q] - w * 0.5) < 3.0 * w * s / std::sqrt(n));
}

TEST_CASE("draws are prefix stable") {
    test::LinearModel f(4.0);
    auto policy = augment::AugmentationPolicy{}.photometric_only();
    auto x = ImageSlice(test::random_grid<float>(1, 8, 8, 3, 0.2, 0.8));
    auto a = augmented_logits(f, x, policy, 4, 5);
    auto b = augmented_logits(f, x, policy, 8, 5);
    for (std::size_t l = 0; l < 4; ++l) CHECK(a[l].data() == b[l].data());
    auto s4 = summarize(b, 4);
    auto direct = summarize(a);
    CHECK(s4.mu == direct.mu);
    CHECK(s4.var == direct.var);
    CHECK(s4.n_aug == 4);
}

TEST_CASE("summary statistics by hand") {
    std::vector<LogitMap> z;
    z.emplace_back(TensorF({2, 1, 1}, std::vector<float>{1.0f, -1.0f}));
    z.emplace_back(TensorF({2, 1, 1}, std::vector<float>{3.0f, 0.0f}));
    z.emplace_back(TensorF({2, 1, 1}, std::vector<float>{2.0f, 4.0f}));
    auto s = summarize(z);
    CHECK(s.mu[0] == doctest::Approx(2.0f));
    CHECK(s.mu[1] == doctest::Approx(1.0f));
    CHECK(s.var[0] == doctest::Approx(1.0f));
    CHECK(s.var[1] == doctest::Approx(7.0f));
    auto one = summarize(z, 1);
    CHECK(one.var[0] == 0.0f);

    // mean of the two softmaxes
    auto p = mean_softmax(z, 2);
    const double p0 = 1.0 / (1.0 + std::exp(-2.0)), p1 = 1.0 / (1.0 + std::exp(-3.0));
    CHECK(p.data()[0] == doctest::Approx(0.5 * (p0 + p1)).epsilon(1e-7));
    CHECK(p.data()[1] == doctest::Approx(1.0 - 0.5 * (p0 + p1)).epsilon(1e-7));
}

TEST_CASE("mean estimate converges with more draws") {
    test::LinearModel f(4.0);
    auto policy = augment::AugmentationPolicy{}.photometric_only();
    auto x = ImageSlice(test::random_grid<float>(1, 8, 8, 4, 0.2, 0.8));
    auto all = augmented_logits(f, x, policy, 256, 7);
    auto ref = summarize(all);
    auto dist = [&](std::size_t n) {
        auto s = summarize(all, n);
        double d = 0.0;
        for (std::size_t i = 0; i < s.mu.size(); ++i) d += std::pow(s.mu[i] - ref.mu[i], 2);
        return std::sqrt(d);
    };
    CHECK(dist(16) < dist(1));
    CHECK(dist(64) < dist(16));
}

}
