#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "metric_cases.hpp"
#include "oodcal/metrics.hpp"
#include "support.hpp"

using namespace oodcal;
using namespace oodcal::metrics;

namespace {

ProbabilityMap two_class_column(const std::vector<double>& p1) {
    auto t = TensorD::grid(2, 1, p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        t[i] = 1.0 - p1[i];
        t[p1.size() + i] = p1[i];
    }
    return ProbabilityMap(std::move(t));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("bin assignment") {
    BinningConfig b{15};
    CHECK(b.bin_of(0.0) == 0);
    CHECK(b.bin_of(1.0) == 14);
    CHECK(b.bin_of(1.0 / 15.0) == 0);
    CHECK(b.bin_of(std::nextafter(1.0 / 15.0, 1.0)) == 1);
    for (std::size_t k = 1; k <= 15; ++k) CHECK(b.bin_of(b.edge(k)) == k - 1);
    CHECK_THROWS_AS(b.bin_of(1.5), Error);
}

TEST_CASE("hand example: ECE = 0.4") {
    std::vector<double> conf{0.9, 0.9, 0.6, 0.6};
    std::vector<std::uint8_t> correct{1, 0, 1, 1};
    CHECK(ece(conf, correct, BinningConfig{15}) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(oracle::ece(conf, {1, 0, 1, 1}, 15) == doctest::Approx(0.4).epsilon(1e-12));

    // same through the map form
    auto p = two_class_column({0.9, 0.9, 0.6, 0.6});
    auto y = LabelMap::from_indices({1, 0, 1, 1}, 2, 1, 4);
    CHECK(ece(p, y, Mask(4, 1)) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("ECE extremes and errors") {
    std::vector<double> ones(10, 1.0);
    CHECK(ece(ones, std::vector<std::uint8_t>(10, 1), BinningConfig{}) == 0.0);
    CHECK(ece(ones, std::vector<std::uint8_t>(10, 0), BinningConfig{}) == 1.0);
    auto p = two_class_column({0.7, 0.2});
    auto y = LabelMap::from_indices({1, 0}, 2, 1, 2);
    CHECK_THROWS_AS(ece(p, y, Mask(2, 0)), Error);
    CHECK_THROWS_AS(sce(p, y, Mask(2, 0)), Error);
}

TEST_CASE("SCE") {
    std::vector<double> ones(5, 1.0);
    CHECK(sce(ones, std::vector<std::uint8_t>(5, 0), 1, BinningConfig{}) == 0.0);

    auto p = two_class_column({0.8, 0.3, 0.55, 0.1});
    auto y = LabelMap::from_indices({1, 1, 0, 0}, 2, 1, 4);
    std::vector<std::vector<double>> probs{{0.2, 0.8}, {0.7, 0.3}, {0.45, 0.55}, {0.9, 0.1}};
    CHECK(sce(p, y, Mask(4, 1)) == doctest::Approx(oracle::sce(probs, {1, 1, 0, 0}, 2, 15)).epsilon(1e-14));

    // calibrated by construction: P(label = 1 | p1 = q) = q
    Rng rng(5);
    const std::size_t n = 200000;
    std::vector<double> flat(2 * n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = rng.uniform();
        flat[i] = 1.0 - q;
        flat[n + i] = q;
        labels[i] = rng.bernoulli(q) ? 1 : 0;
    }
    CHECK(sce(flat, labels, 2, BinningConfig{}) < 0.02);
}

TEST_CASE("ECE and SCE against the brute-force oracle") {
    auto a = oracle::compare_random_instances(1000, 77);
    CHECK(a.worst_ece <= 1e-12);
    CHECK(a.worst_sce <= 1e-12);
}

TEST_CASE("dilated ROI") {
    const std::size_t n = 32;
    CHECK(dilated_roi(LabelMap::from_indices(std::vector<std::uint8_t>(n * n, 0), 4, n, n)) == Mask(n * n, 0));
    CHECK(dilated_roi(LabelMap::from_indices(std::vector<std::uint8_t>(n * n, 2), 4, n, n)) == Mask(n * n, 1));

    std::vector<std::uint8_t> idx(n * n, 0);
    idx[16 * n + 16] = 1;
    auto roi = dilated_roi(LabelMap::from_indices(idx, 4, n, n), 10);
    // out(q) = max of in(q + o), o in [-5, 4], so q in [12, 21]
    std::size_t count = 0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const bool want = r >= 12 && r <= 21 && c >= 12 && c <= 21;
            CHECK(static_cast<bool>(roi[r * n + c]) == want);
            count += roi[r * n + c];
        }
    }
    CHECK(count == 100);

    std::vector<std::uint8_t> corner(n * n, 0);
    corner[0] = 3;
    std::size_t corner_count = 0;
    for (auto v : dilated_roi(LabelMap::from_indices(corner, 4, n, n), 10)) corner_count += v;
    CHECK(corner_count == 36);
}

TEST_CASE("dice, entropy and histograms") {
    std::vector<std::uint8_t> a{0, 1, 1, 2, 2, 2};
    auto d = dice(a, a, 4);
    for (double v : d) CHECK(v == 1.0);
    std::vector<std::uint8_t> b{0, 1, 2, 2, 2, 1};
    auto e = dice(a, b, 3);
    CHECK(e[1] == doctest::Approx(0.5));
    CHECK(e[2] == doctest::Approx(2.0 * 2.0 / 6.0));
    CHECK(mean_foreground(e) == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));

    auto uniform = ProbabilityMap(TensorD::grid(4, 3, 3, 0.25));
    const auto h = entropy_map(uniform);
    for (double v : h.values()) CHECK(v == doctest::Approx(std::log(4.0)).epsilon(1e-14));

    Rng rng(1);
    auto inst = oracle::random_instance(rng, 15);
    std::size_t roi = 0;
    for (auto m : inst.roi) roi += m;
    std::size_t hist = 0, rel = 0;
    for (auto c : confidence_histogram(inst.p, inst.roi)) hist += c;
    for (const auto& r : reliability_data(inst.p, inst.y, inst.roi)) rel += r.count;
    CHECK(hist == roi);
    CHECK(rel == roi);
}

TEST_CASE("slice statistics pool like the concatenated pixels") {
    Rng rng(3);
    CalibrationAccumulator acc(3, BinningConfig{});
    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    std::vector<std::vector<double>> slice_rows;
    for (int s = 0; s < 5; ++s) {
        oracle::Instance inst;
        do {
            inst = oracle::random_instance(rng, 15);
        } while (inst.p.classes() != 3);
        auto st = slice_stats(inst.p, inst.y, inst.roi);
        auto row = st.flatten();
        CHECK(row.size() == SliceStats::flat_size(3, 15));
        acc.add(SliceStats::unflatten(row, 3, 15));
        probs.insert(probs.end(), inst.probs.begin(), inst.probs.end());
        labels.insert(labels.end(), inst.labels.begin(), inst.labels.end());
    }
    CHECK(acc.ece() == doctest::Approx(oracle::top_label_ece(probs, labels, 15)).epsilon(1e-12));
    CHECK(acc.sce() == doctest::Approx(oracle::sce(probs, labels, 3, 15)).epsilon(1e-12));
    CHECK(acc.roi_pixels() == probs.size());

    auto report = make_report(acc, "proposed", "clean", 2, 15);
    nlohmann::json j = report;
    auto back = j.get<CalibrationReport>();
    CHECK(back.ece == report.ece);
    CHECK(back.bins.size() == 15);
    std::size_t total = 0;
    for (const auto& b : back.bins) total += b.count;
    CHECK(total == back.roi_pixels);
}

}
