#include <doctest.h>

#include <cmath>

#include "oodcal/augment.hpp"
#include "support.hpp"

using namespace oodcal;
using namespace oodcal::augment;

TEST_SUITE("augment") {

TEST_CASE("parameter sampling") {
    AugmentationPolicy p;
    auto a = sample_params(p, 42);
    auto b = sample_params(p, 42);
    CHECK(a.gamma == b.gamma);
    CHECK(a.rotation_deg == b.rotation_deg);
    CHECK(a.noise_seed == b.noise_seed);

    AugmentationPolicy point = p;
    point.gamma_range = {1.2, 1.2};
    point.brightness_range = {0.05, 0.05};
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto q = sample_params(point, s);
        CHECK(q.gamma == 1.2);
        CHECK(q.brightness == 0.05);
    }

    double lo = 10.0, hi = -10.0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const double g = sample_params(p, s).gamma;
        lo = std::min(lo, g);
        hi = std::max(hi, g);
    }
    CHECK(lo >= 0.7);
    CHECK(hi <= 1.4);
    CHECK(lo < 0.71);
    CHECK(hi > 1.39);
}

TEST_CASE("toggling one transform does not move the others") {
    AugmentationPolicy p;
    AugmentationPolicy q = p;
    q.noise = false;
    auto a = sample_params(p, 7), b = sample_params(q, 7);
    CHECK(a.gamma == b.gamma);
    CHECK(a.contrast == b.contrast);
    CHECK(a.scale == b.scale);
    CHECK(b.noise_std == 0.0);
}

TEST_CASE("policy validation") {
    AugmentationPolicy p;
    CHECK_NOTHROW(p.validate());
    p.gamma_range = {1.1, 1.4};
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK(AugmentationPolicy{}.photometric_only().has_photometric());
    CHECK_FALSE(AugmentationPolicy{}.photometric_only().has_geometric());
}

TEST_CASE("photometric transforms") {
    auto x = ImageSlice(test::random_grid<float>(1, 8, 8, 1, 0.2, 0.8));
    CHECK(apply_photometric(x, AugParams{}).data() == x.data());

    AugParams bright;
    bright.brightness = 0.1;
    auto b = apply_photometric(x, bright);
    for (std::size_t i = 0; i < 64; ++i) CHECK(b.data()[i] == doctest::Approx(x.data()[i] + 0.1f).epsilon(1e-6));

    AugParams gamma;
    gamma.gamma = 2.0;
    auto g = apply_photometric(ImageSlice(TensorF::grid(1, 4, 4, 0.5f)), gamma);
    for (float v : g.data().values()) CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));

    AugParams contrast;
    contrast.contrast = 0.5;
    auto c = apply_photometric(x, contrast);
    double mx = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
        mx += x.data()[i];
        mc += c.data()[i];
    }
    CHECK(mc == doctest::Approx(mx).epsilon(1e-5));

    AugParams noisy;
    noisy.noise_std = 0.5;
    noisy.noise_seed = 3;
    const auto noisy_x = apply_photometric(x, noisy);
    for (float v : noisy_x.data().values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("geometric transforms") {
    const std::size_t n = 9;
    TensorF img = TensorF::grid(1, n, n, 0.0f);
    std::vector<std::uint8_t> idx(n * n, 0);
    img(0, 2, 6) = 1.0f;
    idx[2 * n + 6] = 1;
    auto x = ImageSlice(img);
    auto y = LabelMap::from_indices(idx, 2, n, n);

    auto [same_x, same_y] = apply_geometric(x, y, AugParams{});
    CHECK(same_x.data() == x.data());
    CHECK(same_y.indices() == y.indices());

    // 90 degrees about the centre (4, 4); the impulse at (2, 6) should land on (6, 6).
    AugParams rot;
    rot.rotation_deg = 90.0;
    auto [rx, ry] = apply_geometric(x, y, rot);
    std::size_t br = 0, bc = 0;
    float best = -1.0f;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (rx(r, c) > best) {
                best = rx(r, c);
                br = r;
                bc = c;
            }
        }
    }
    CHECK(best == doctest::Approx(1.0f).epsilon(1e-5));
    // forward map: (dx, dy) -> (ct dx - st dy, st dx + ct dy) with theta = 90 degrees
    const double dx = 6.0 - 4.0, dy = 2.0 - 4.0;
    CHECK(bc == static_cast<std::size_t>(std::lround(4.0 - dy)));
    CHECK(br == static_cast<std::size_t>(std::lround(4.0 + dx)));
    CHECK(ry.at(br, bc) == 1);

    AugmentationPolicy p;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto [gx, gy] = apply_geometric(x, y, sample_params(p, s));
        for (std::size_t q = 0; q < n * n; ++q) {
            float sum = 0.0f;
            for (std::size_t c = 0; c < 2; ++c) {
                const float v = gy.data()[c * n * n + q];
                CHECK((v == 0.0f || v == 1.0f));
                sum += v;
            }
            CHECK(sum == 1.0f);
        }
    }
}

}
