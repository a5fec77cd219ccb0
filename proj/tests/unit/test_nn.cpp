#include <doctest.h>

#include "oodcal/calibnet.hpp"
#include "oodcal/nn/layers.hpp"
#include "oodcal/nn/loss.hpp"
#include "oodcal/nn/optim.hpp"
#include "oodcal/nn/unet.hpp"
#include "support.hpp"

using namespace oodcal;
using namespace oodcal::nn;

namespace {

std::vector<std::uint8_t> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.uniform_int(0, static_cast<std::int64_t>(classes) - 1));
    return y;
}

// sum(out * w) as a scalar probe for single layers.
double probe(const TensorD& out, const TensorD& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
}

void zero(const ParamList<double>& ps) {
    for (auto* p : ps) p->zero_grad();
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("conv2d gradients") {
    Conv2d<double> conv("c", 2, 3, 3, 1);
    auto x = test::random_grid<double>(2, 5, 6, 2);
    auto w = test::random_grid<double>(3, 5, 6, 3);
    ParamList<double> ps;
    conv.collect(ps);
    zero(ps);
    Conv2d<double>::Cache cache;
    conv.forward(x, &cache);
    auto gx = conv.backward(w, cache);
    CHECK(test::gradient_check(ps, [&] { return probe(conv.forward(x), w); }) < 1e-6);

    // input gradient
    for (std::size_t i = 0; i < x.size(); i += 7) {
        auto xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        const double num = (probe(conv.forward(xp), w) - probe(conv.forward(xm), w)) / 2e-6;
        CHECK(gx[i] == doctest::Approx(num).epsilon(1e-6));
    }
    CHECK(conv.forward(x) == conv.forward(x));
}

TEST_CASE("transposed conv and pooling gradients") {
    UpConv2x2<double> up("u", 2, 3, 4);
    auto x = test::random_grid<double>(2, 3, 4, 5);
    auto w = test::random_grid<double>(3, 6, 8, 6);
    ParamList<double> ps;
    up.collect(ps);
    zero(ps);
    UpConv2x2<double>::Cache cache;
    CHECK(up.forward(x, &cache).shape() == std::vector<std::size_t>{3, 6, 8});
    up.backward(w, cache);
    CHECK(test::gradient_check(ps, [&] { return probe(up.forward(x), w); }) < 1e-6);

    auto px = test::random_grid<double>(2, 4, 6, 7);
    auto pw = test::random_grid<double>(2, 2, 3, 8);
    MaxPool2<double>::Cache pc;
    auto pooled = MaxPool2<double>::forward(px, &pc);
    CHECK(pooled(1, 1, 2) == std::max({px(1, 2, 4), px(1, 2, 5), px(1, 3, 4), px(1, 3, 5)}));
    auto g = MaxPool2<double>::backward(pw, pc);
    double total = 0.0;
    for (double v : g.values()) total += v;
    double want = 0.0;
    for (double v : pw.values()) want += v;
    CHECK(total == doctest::Approx(want));
    CHECK_THROWS_AS(MaxPool2<double>::forward(test::random_grid<double>(1, 3, 4, 1)), Error);
}

TEST_CASE("channel attention gradients") {
    ChannelAttention<double> se("se", 4, 2, 9);
    auto x = test::random_grid<double>(4, 3, 3, 10);
    auto w = test::random_grid<double>(4, 3, 3, 11);
    ParamList<double> ps;
    se.collect(ps);
    zero(ps);
    ChannelAttention<double>::Cache cache;
    se.forward(x, &cache);
    auto gx = se.backward(w, cache);
    CHECK(test::gradient_check(ps, [&] { return probe(se.forward(x), w); }) < 1e-6);
    for (std::size_t i = 0; i < x.size(); i += 5) {
        auto xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        const double num = (probe(se.forward(xp), w) - probe(se.forward(xm), w)) / 2e-6;
        CHECK(gx[i] == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("softplus floor") {
    TensorD h({1, 1, 3}, std::vector<double>{-50.0, 0.0, 50.0});
    auto t = softplus_floor(h, 1e-3);
    CHECK(t[0] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(t[1] == doctest::Approx(std::log(2.0) + 1e-3));
    CHECK(t[2] == doctest::Approx(50.0 + 1e-3));
    auto g = softplus_backward(TensorD({1, 1, 3}, 1.0), h);
    CHECK(g[1] == doctest::Approx(0.5));
}

TEST_CASE("dropout") {
    Dropout2d<double> d{0.5};
    auto x = test::random_grid<double>(8, 2, 2, 1);
    CHECK(d.forward(x, nullptr) == x);
    Rng rng(3);
    Dropout2d<double>::Cache cache;
    auto y = d.forward(x, &rng, &cache);
    for (std::size_t c = 0; c < 8; ++c) {
        const double s = cache.scale[c];
        CHECK((s == 0.0 || s == 2.0));
        CHECK(y(c, 1, 1) == x(c, 1, 1) * s);
    }
}

TEST_CASE("cross entropy and temperature NLL") {
    auto s = test::random_grid<double>(3, 4, 4, 1, -2.0, 2.0);
    auto y = random_labels(16, 3, 2);
    auto r = softmax_cross_entropy(s, y);
    for (std::size_t i = 0; i < s.size(); i += 3) {
        auto sp = s, sm = s;
        sp[i] += 1e-6;
        sm[i] -= 1e-6;
        const double num = (softmax_cross_entropy(sp, y).loss - softmax_cross_entropy(sm, y).loss) / 2e-6;
        CHECK(r.grad[i] == doctest::Approx(num).epsilon(1e-6));
    }

    auto t = test::random_grid<double>(1, 4, 4, 3, 0.3, 3.0);
    auto tr = temperature_nll(s, t, y);
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto tp = t, tm = t;
        tp[i] += 1e-6;
        tm[i] -= 1e-6;
        const double num = (temperature_nll(s, tp, y).loss - temperature_nll(s, tm, y).loss) / 2e-6;
        CHECK(tr.grad[i] == doctest::Approx(num).epsilon(1e-6));
    }
    // unit temperature is plain cross entropy
    CHECK(temperature_nll(s, TensorD({1, 4, 4}, 1.0), y).loss == doctest::Approx(r.loss).epsilon(1e-14));

    // perfect one-hot scores drive the loss to zero
    TensorD perfect = TensorD::grid(3, 4, 4, -60.0);
    for (std::size_t q = 0; q < 16; ++q) perfect[y[q] * 16 + q] = 60.0;
    CHECK(softmax_cross_entropy(perfect, y).loss < 1e-12);
}

TEST_CASE("shape prior loss gradient on a tiny UNet") {
    // logits in, logits out: the shape-prior objective with C = 2
    UNetConfig cfg{2, 2, 1, 1, 1, 0.0};
    UNet<double> net(cfg, 5);
    auto params = net.parameters();
    CHECK(parameter_count(params) <= 50);
    test::lift_biases(params);
    auto z = test::random_grid<double>(2, 8, 8, 6, -3.0, 3.0);
    auto y = random_labels(64, 2, 7);
    zero(params);
    UNet<double>::Tape tape;
    auto out = net.forward(z, tape, nullptr);
    net.backward(softmax_cross_entropy(out, y).grad, tape);
    const double err = test::gradient_check(params, [&] { return softmax_cross_entropy(net.forward(z), y).loss; });
    MESSAGE("tiny UNet: " << parameter_count(params) << " params, worst relative error " << err);
    CHECK(err <= 1e-3);
}

TEST_CASE("UNet with 3x3 kernels and depth 2") {
    UNetConfig cfg{1, 3, 2, 2, 3, 0.0};
    UNet<double> net(cfg, 8);
    auto params = net.parameters();
    auto x = test::random_grid<double>(1, 8, 8, 9, 0.0, 1.0);
    auto y = random_labels(64, 3, 10);
    zero(params);
    UNet<double>::Tape tape;
    net.backward(softmax_cross_entropy(net.forward(x, tape, nullptr), y).grad, tape);
    CHECK(test::gradient_check(params, [&] { return softmax_cross_entropy(net.forward(x), y).loss; }) <= 1e-3);
}

TEST_CASE("calibration loss gradient on a tiny network") {
    calib::CalibNetConfig cfg;
    cfg.classes = 2;
    cfg.stem_channels = 1;
    cfg.kernel = 1;
    cfg.width = 1;
    cfg.attention_hidden = 1;
    cfg.seed = 3;
    calib::CalibNet<double> g(cfg);
    auto params = g.parameters();
    CHECK(parameter_count(params) <= 50);
    // Spread the weights out so ReLUs are not all dead.
    Rng rng(4);
    for (auto* p : params) {
        for (double& v : p->value.storage()) v = rng.uniform(-1.0, 1.0);
    }
    calib::CalibInputs<double> in{test::random_grid<double>(2, 8, 8, 1, -0.5, 0.5),
                                  test::random_grid<double>(2, 8, 8, 2, -3.0, 3.0),
                                  test::random_grid<double>(2, 8, 8, 3, 0.0, 1.0),
                                  test::random_grid<double>(2, 8, 8, 4, -3.0, 3.0),
                                  test::random_grid<double>(1, 8, 8, 5, 0.0, 1.0)};
    auto y = random_labels(64, 2, 6);
    zero(params);
    calib::CalibNet<double>::Cache cache;
    auto t = g.forward(in, &cache);
    g.backward(temperature_nll(in.z, t, y).grad, cache);
    const double err =
        test::gradient_check(params, [&] { return temperature_nll(in.z, g.forward(in), y).loss; });
    MESSAGE("tiny calibration net: " << parameter_count(params) << " params, worst relative error " << err);
    CHECK(err <= 1e-3);
}

TEST_CASE("adam") {
    // minimise (w - 3)^2
    Param<double> w("w", {1});
    Adam<double> opt({&w}, 0.1);
    for (int i = 0; i < 500; ++i) {
        opt.zero_grad();
        w.grad[0] = 2.0 * (w.value[0] - 3.0);
        opt.step();
    }
    CHECK(w.value[0] == doctest::Approx(3.0).epsilon(1e-3));

    auto dir = test::scratch("params");
    Param<float> a("a", {2, 3});
    a.value.storage() = {1, 2, 3, 4, 5, 6};
    save_parameters<float>(dir / "p", {&a});
    Param<float> b("b", {2, 3});
    restore_parameters<float>(dir / "p", {&b});
    CHECK(b.value == a.value);
    Param<float> c("c", {5});
    CHECK_THROWS_AS(restore_parameters<float>(dir / "p", {&c}), Error);
}

}
