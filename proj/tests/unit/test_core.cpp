#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "oodcal/random.hpp"
#include "oodcal/softmax.hpp"
#include "oodcal/tensor_io.hpp"
#include "oodcal/types.hpp"
#include "support.hpp"

using namespace oodcal;

TEST_SUITE("core") {

TEST_CASE("softmax of symmetric logits") {
    auto two = softmax(LogitMap(TensorF::grid(2, 1, 1, 0.0f)));
    CHECK(two.data()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(two.data()[1] == doctest::Approx(0.5).epsilon(1e-15));
    auto three = softmax(LogitMap(TensorF::grid(3, 2, 2, 1.7f)));
    for (double v : three.data().values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax (2, 0) against long double evaluation") {
    TensorF z = TensorF::grid(2, 1, 1);
    z[0] = 2.0f;
    auto p = softmax(LogitMap(z));
    const long double e2 = std::exp(2.0L);
    const long double want = e2 / (e2 + 1.0L);
    CHECK(std::abs(p.data()[0] - static_cast<double>(want)) < 1e-15);
    CHECK(std::abs(p.data()[1] - static_cast<double>(1.0L - want)) < 1e-15);
}

TEST_CASE("softmax rejects non-finite logits and sums to one") {
    TensorF z = TensorF::grid(3, 2, 2);
    z[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(LogitMap{z}, Error);

    auto big = test::random_grid<float>(4, 5, 6, 3, -80.0, 80.0);
    auto p = softmax(LogitMap(big));
    for (std::size_t q = 0; q < p.data().plane(); ++q) {
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += p.data()[c * 30 + q];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("scaled softmax keeps the argmax") {
    auto z = test::random_grid<float>(4, 8, 8, 11, -5.0, 5.0);
    auto t = test::random_grid<float>(1, 8, 8, 12, 0.01, 20.0);
    LogitMap logits(z);
    CHECK(argmax_labels(softmax_scaled(logits, TemperatureMap(t))) == argmax_labels(logits));
    CHECK_THROWS_AS(softmax_scaled(logits, -1.0), Error);
    CHECK_THROWS_AS(TemperatureMap(TensorF::grid(1, 2, 2, 0.0f)), Error);
}

TEST_CASE("tensor round trip is bit exact") {
    auto dir = test::scratch("tensor_rt");
    auto t = test::random_grid<float>(2, 3, 3, 5);
    write_tensor(dir / "t", t);
    auto back = read_tensor<float>(dir / "t");
    CHECK(back == t);

    auto d = test::random_grid<double>(2, 3, 3, 6);
    write_tensor(dir / "d", d);
    CHECK(read_tensor<double>(dir / "d") == d);
}

TEST_CASE("tensor header and payload size mismatch") {
    auto dir = test::scratch("tensor_bad");
    write_tensor(dir / "t", TensorF::grid(1, 4, 4, 1.0f));
    std::filesystem::resize_file(dir / "t" / "data.bin", 15 * sizeof(float));
    CHECK_THROWS_AS(read_tensor<float>(dir / "t"), Error);
}

TEST_CASE("NaN payload loads with the non-finite flag") {
    auto dir = test::scratch("tensor_nan");
    TensorF t = TensorF::grid(1, 2, 2, 0.5f);
    t[3] = std::numeric_limits<float>::quiet_NaN();
    write_tensor(dir / "t", t);
    auto loaded = load_tensor<float>(dir / "t");
    CHECK_FALSE(loaded.finite);
    CHECK(std::isnan(loaded.tensor[3]));
}

TEST_CASE("label maps") {
    std::vector<std::uint8_t> idx{0, 1, 2, 1, 0, 3};
    auto y = LabelMap::from_indices(idx, 4, 2, 3);
    CHECK(y.indices() == idx);
    CHECK(y.at(1, 2) == 3);
    for (std::size_t q = 0; q < 6; ++q) {
        float s = 0.0f;
        for (std::size_t c = 0; c < 4; ++c) s += y.data()[c * 6 + q];
        CHECK(s == 1.0f);
    }
    TensorF bad = TensorF::grid(2, 1, 1, 1.0f);
    CHECK_THROWS_AS(LabelMap{bad}, Error);
}

TEST_CASE("split validation") {
    DatasetSplit s{{"a", "b"}, {"c"}, {"a"}};
    CHECK_THROWS_AS(s.validate(), Error);
    s.test = {"d"};
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("derived seeds") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    Rng a(9), b(9);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("rng distributions") {
    Rng rng(4);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const auto k = rng.uniform_int(-2, 3);
        CHECK(k >= -2);
        CHECK(k <= 3);
    }
}

TEST_CASE("minmax normalization") {
    TensorF t({1, 1, 3}, std::vector<float>{2.0f, 4.0f, 3.0f});
    auto n = normalize_minmax(t);
    CHECK(n[0] == 0.0f);
    CHECK(n[1] == 1.0f);
    CHECK(n[2] == doctest::Approx(0.5f));
    CHECK(normalize_minmax(TensorF::grid(1, 2, 2, 7.0f)) == TensorF::grid(1, 2, 2, 0.0f));
}

}
