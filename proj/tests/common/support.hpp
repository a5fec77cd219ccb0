#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "oodcal/nn/layers.hpp"
#include "oodcal/random.hpp"
#include "oodcal/tensor.hpp"

namespace test {

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("oodcal_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

template <typename T>
oodcal::Tensor<T> random_grid(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed, double lo = -1.0,
                              double hi = 1.0) {
    oodcal::Rng rng(seed);
    auto t = oodcal::Tensor<T>::grid(c, h, w);
    for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// Width-1 nets start with every ReLU dead or sitting on the kink at 0;
// positive biases keep the units live for finite differences.
inline void lift_biases(const oodcal::nn::ParamList<double>& params, double value = 0.3) {
    for (auto* p : params) {
        if (p->name.ends_with("bias")) p->value.fill(value);
    }
}

// Worst relative error |a - n| / max(|a| + |n|, floor) between analytic
// parameter gradients and central differences of loss().
inline double gradient_check(const oodcal::nn::ParamList<double>& params, const std::function<double()>& loss,
                             double h = 1e-6, double floor = 1e-7) {
    double worst = 0.0;
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double up = loss();
            p->value[i] = saved - h;
            const double down = loss();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad[i];
            const double err = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace test
