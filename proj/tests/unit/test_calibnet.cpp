#include <doctest.h>

#include <cmath>

#include "models.hpp"
#include "oodcal/calibnet.hpp"
#include "oodcal/nn/loss.hpp"
#include "oodcal/metrics.hpp"
#include "oodcal/softmax.hpp"

using namespace oodcal;
using namespace oodcal::calib;

namespace {

CalibNetConfig small(std::size_t classes = 2) {
    CalibNetConfig c;
    c.classes = classes;
    c.stem_channels = 4;
    c.width = 8;
    c.attention_hidden = 4;
    c.seed = 1;
    return c;
}

CalibInputs<float> random_inputs(std::size_t c, std::size_t n, std::uint64_t seed) {
    return {test::random_grid<float>(c, n, n, seed, -0.5, 0.5), test::random_grid<float>(c, n, n, seed + 1, -4.0, 4.0),
            test::random_grid<float>(c, n, n, seed + 2, 0.0, 2.0), test::random_grid<float>(c, n, n, seed + 3, -4.0, 4.0),
            test::random_grid<float>(1, n, n, seed + 4, 0.0, 1.0)};
}

// Two-class logits (0, d), label 1 drawn with probability sigmoid(d / truth_t).
std::pair<std::vector<LogitMap>, std::vector<LabelMap>> sigmoid_set(double scale, double truth_t, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t h = 100, w = 400;
    auto z = TensorF::grid(2, h, w);
    std::vector<std::uint8_t> y(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        const double d = rng.normal(0.0, 3.0);
        z[h * w + i] = static_cast<float>(scale * d);
        y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-d / truth_t))) ? 1 : 0;
    }
    return {{LogitMap(std::move(z))}, {LabelMap::from_indices(y, 2, h, w)}};
}

}  // namespace

TEST_SUITE("calibnet") {

TEST_CASE("config and variants") {
    auto c = small(4);
    CHECK(c.variant_name() == "proposed");
    CHECK(c.lts().variant_name() == "lts");
    CHECK(c.active_branches() == 5);
    CHECK(c.lts().active_branches() == 2);
    auto off = c;
    off.use_susceptibility = false;
    off.use_shape = false;
    CHECK(nn::parameter_count(CalibNet<float>(off).parameters()) ==
          nn::parameter_count(CalibNet<float>(c.lts()).parameters()));
    off.use_shape = true;
    CHECK(off.variant_name() == "shape-only");
    CHECK(parse_calibrator("ts") == CalibratorKind::global_ts);
    CHECK(parse_calibrator("uc") == CalibratorKind::uncalibrated);
    CHECK(parse_calibrator("proposed") == CalibratorKind::proposed);
    CHECK_THROWS_AS(parse_calibrator("platt"), Error);
    CHECK_FALSE(preserves_argmax(CalibratorKind::alea));
}

TEST_CASE("temperature is positive and keeps the argmax") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto cfg = small(4);
        cfg.seed = s;
        CalibNet<float> g(cfg);
        // exaggerate the weights so the temperature varies a lot
        Rng rng(s);
        for (auto* p : g.parameters()) {
            for (float& v : p->value.storage()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
        }
        auto in = random_inputs(4, 16, 10 * s);
        auto out = calibrate(g, in);
        for (float t : out.temperature.data().values()) CHECK(t >= 1e-3f);
        CHECK(argmax_labels(out.probability) == argmax_labels(LogitMap(in.z)));
    }
}

TEST_CASE("zero head output gives T = ln 2 + floor") {
    CalibNet<float> g(small(3));
    g.head().weight.value.fill(0.0f);
    g.head().bias.value.fill(0.0f);
    auto in = random_inputs(3, 8, 3);
    auto out = calibrate(g, in);
    for (float t : out.temperature.data().values()) CHECK(t == doctest::Approx(std::log(2.0) + 1e-3).epsilon(1e-6));
    // T < 1 sharpens: the top probability grows
    auto plain = softmax(LogitMap(in.z));
    const std::size_t plane = 64;
    for (std::size_t q = 0; q < plane; ++q) {
        double a = 0.0, b = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            a = std::max(a, plain.data()[c * plane + q]);
            b = std::max(b, out.probability.data()[c * plane + q]);
        }
        CHECK(b >= a);
    }
}

TEST_CASE("unit temperature reproduces the uncalibrated probabilities") {
    auto cfg = small(3);
    CalibNet<float> g(cfg);
    g.head().weight.value.fill(0.0f);
    g.head().bias.value.fill(static_cast<float>(std::log(std::expm1(1.0 - cfg.floor))));
    auto in = random_inputs(3, 8, 4);
    auto out = calibrate(g, in);
    auto plain = softmax(LogitMap(in.z));
    for (std::size_t i = 0; i < plain.data().size(); ++i) {
        CHECK(out.probability.data()[i] == doctest::Approx(plain.data()[i]).epsilon(1e-6));
    }
    // and the fresh head starts there too, up to the small random head weights
    CalibNet<float> fresh(cfg);
    auto t = fresh.forward(in);
    double dev = 0.0;
    for (float v : t.values()) dev += std::abs(v - 1.0);
    dev /= static_cast<double>(t.size());
    MESSAGE("fresh head mean |T - 1| = " << dev);
    CHECK(dev < 0.25);
}

TEST_CASE("misaligned inputs are rejected") {
    CalibNet<float> g(small(2));
    auto in = random_inputs(2, 8, 5);
    in.x = test::random_grid<float>(1, 4, 4, 1);
    CHECK_THROWS_AS(g.forward(in), Error);
    auto in2 = random_inputs(3, 8, 5);
    CHECK_THROWS_AS(g.forward(in2), Error);
}

TEST_CASE("NLL at T = 1 is the uncalibrated cross entropy") {
    auto [z, y] = sigmoid_set(1.0, 1.0, 2);
    const auto p = softmax(z[0]);
    double ce = 0.0;
    const std::size_t n = y[0].indices().size();
    for (std::size_t i = 0; i < n; ++i) ce -= std::log(p.data()[y[0].indices()[i] * n + i]);
    CHECK(temperature_nll(z, y, 1.0) == doctest::Approx(ce / n).epsilon(1e-10));
}

TEST_CASE("global temperature scaling") {
    {
        auto [z, y] = sigmoid_set(1.0, 1.0, 3);
        const double t = fit_global_ts(z, y);
        CHECK(std::abs(t - 1.0) < 0.05);
    }
    {
        auto [z, y] = sigmoid_set(3.0, 1.0, 4);
        const double t = fit_global_ts(z, y);
        CHECK(std::abs(t - 3.0) < 0.15);
    }
    {
        // 8 * one_hot(noisy labels), 20% of the labels flipped
        Rng rng(5);
        const std::size_t h = 50, w = 100;
        auto zt = TensorF::grid(2, h, w);
        std::vector<std::uint8_t> y(h * w);
        for (std::size_t i = 0; i < h * w; ++i) {
            const std::uint8_t truth = rng.bernoulli(0.5) ? 1 : 0;
            const std::uint8_t noisy = rng.bernoulli(0.2) ? 1 - truth : truth;
            zt[noisy * h * w + i] = 8.0f;
            y[i] = truth;
        }
        std::vector<LogitMap> z{LogitMap(zt)};
        std::vector<LabelMap> l{LabelMap::from_indices(y, 2, h, w)};
        const double t = fit_global_ts(z, l);
        CHECK(t > 0.0);
        CHECK(temperature_nll(z, l, t) < temperature_nll(z, l, 1.0));
        // 1-D grid oracle on [0.1, 10]
        double best = 1e300, best_t = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double g = 0.1 * std::pow(100.0, i / 2000.0);
            const double v = temperature_nll(z, l, g);
            if (v < best) {
                best = v;
                best_t = g;
            }
        }
        CHECK(temperature_nll(z, l, t) <= best + 1e-9);
        CHECK(t == doctest::Approx(best_t).epsilon(0.01));
    }
}

TEST_CASE("calibrator training on an over-confident model") {
    test::LinearModel f(40.0, 0.5);
    auto train = test::threshold_slices(8, 16, 1);
    auto policy = augment::AugmentationPolicy{}.photometric_only();
    auto lts = small(2).lts();
    auto sus = small(2);
    sus.use_shape = false;
    CalibTrainConfig t;
    t.epochs = 30;
    t.lr = 3e-3;
    t.batch_size = 2;
    t.n_aug = 3;
    auto r = train_calibrators({lts, sus}, f, nullptr, train, policy, t);
    REQUIRE(r.models.size() == 2);
    REQUIRE(r.loss[0].size() == 30);

    std::vector<LogitMap> z;
    std::vector<LabelMap> y;
    for (const auto& [x, l] : train) {
        z.push_back(f.forward(x));
        y.push_back(l);
    }
    const double before = temperature_nll(z, y, 1.0);
    double after = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto in = make_inputs(lts, z[i], train[i].first, nullptr, nullptr);
        auto out = calibrate(r.models[0].net(), in);
        after += nn::temperature_nll(in.z.cast<double>(), out.temperature.data().cast<double>(), y[i].indices()).loss;
    }
    after /= static_cast<double>(train.size());
    MESSAGE("training-set NLL " << before << " -> " << after);
    CHECK(after < before);
    CHECK(r.loss[1].back() < r.loss[1].front());

    auto again = train_calibrators({lts, sus}, f, nullptr, train, policy, t);
    CHECK(again.loss == r.loss);

    auto dir = test::scratch("calib_io");
    r.models[1].save(dir / "c");
    auto back = Calibrator::load(dir / "c");
    CHECK(back.config().variant_name() == "susceptibility-only");
    auto in = random_inputs(2, 16, 9);
    CHECK(back.net().forward(in) == r.models[1].net().forward(in));

    CHECK_THROWS_AS(train_calibrators({small(2)}, f, nullptr, train, policy, t), Error);

    // geometric input augmentation is allowed; (mu, var) still use the photometric part
    t.epochs = 3;
    auto geo = train_calibrators({sus}, f, nullptr, train, augment::AugmentationPolicy{}, t);
    CHECK(geo.loss[0] != r.loss[1]);
    t.augment_inputs = false;
    auto fixed = train_calibrators({sus}, f, nullptr, train, policy, t);
    CHECK(fixed.loss[0] != geo.loss[0]);
    for (double v : fixed.loss[0]) CHECK(std::isfinite(v));
}

}
