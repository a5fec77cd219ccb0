#include "oodcal/nn/loss.hpp"

#include <cmath>

namespace oodcal::nn {

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& scores, const std::vector<std::uint8_t>& labels) {
    const std::size_t c = scores.channels(), plane = scores.plane();
    require(labels.size() == plane, "softmax_cross_entropy: label size mismatch");
    LossResult<T> r{0.0, Tensor<T>(scores.shape())};
    const double inv_n = 1.0 / static_cast<double>(plane);
    std::vector<double> e(c);
    for (std::size_t p = 0; p < plane; ++p) {
        double mx = scores[p];
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, static_cast<double>(scores[k * plane + p]));
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            e[k] = std::exp(static_cast<double>(scores[k * plane + p]) - mx);
            sum += e[k];
        }
        const std::size_t y = labels[p];
        r.loss -= (static_cast<double>(scores[y * plane + p]) - mx - std::log(sum)) * inv_n;
        for (std::size_t k = 0; k < c; ++k) {
            const double g = e[k] / sum - (k == y ? 1.0 : 0.0);
            r.grad[k * plane + p] = static_cast<T>(g * inv_n);
        }
    }
    return r;
}

template <typename T>
LossResult<T> temperature_nll(const Tensor<T>& logits, const Tensor<T>& temperature,
                              const std::vector<std::uint8_t>& labels) {
    const std::size_t c = logits.channels(), plane = logits.plane();
    require(temperature.size() == plane, "temperature_nll: temperature map size mismatch");
    require(labels.size() == plane, "temperature_nll: label size mismatch");
    LossResult<T> r{0.0, Tensor<T>(temperature.shape())};
    const double inv_n = 1.0 / static_cast<double>(plane);
    std::vector<double> s(c);
    for (std::size_t p = 0; p < plane; ++p) {
        const double t = static_cast<double>(temperature[p]);
        double mx = -INFINITY;
        for (std::size_t k = 0; k < c; ++k) {
            s[k] = static_cast<double>(logits[k * plane + p]) / t;
            mx = std::max(mx, s[k]);
        }
        double sum = 0.0, expected_z = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double e = std::exp(s[k] - mx);
            sum += e;
            expected_z += e * static_cast<double>(logits[k * plane + p]);
        }
        expected_z /= sum;
        const std::size_t y = labels[p];
        r.loss -= (s[y] - mx - std::log(sum)) * inv_n;
        // d/dt [-z_y / t + logsumexp(z / t)] = (z_y - E_p[z]) / t^2
        const double zy = static_cast<double>(logits[y * plane + p]);
        r.grad[p] = static_cast<T>((zy - expected_z) / (t * t) * inv_n);
    }
    return r;
}

template LossResult<float> softmax_cross_entropy<float>(const Tensor<float>&, const std::vector<std::uint8_t>&);
template LossResult<double> softmax_cross_entropy<double>(const Tensor<double>&, const std::vector<std::uint8_t>&);
template LossResult<float> temperature_nll<float>(const Tensor<float>&, const Tensor<float>&,
                                                  const std::vector<std::uint8_t>&);
template LossResult<double> temperature_nll<double>(const Tensor<double>&, const Tensor<double>&,
                                                    const std::vector<std::uint8_t>&);

}  // namespace oodcal::nn
