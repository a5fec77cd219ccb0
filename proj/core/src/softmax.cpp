#include "oodcal/softmax.hpp"

#include <cmath>

namespace oodcal {

void softmax_pixel(std::span<const double> scores, std::span<double> out) {
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        out[k] = std::exp(scores[k] - mx);
        sum += out[k];
    }
    for (double& v : out) v /= sum;
}

namespace {

template <typename Scale>
ProbabilityMap softmax_impl(const TensorF& z, Scale inv_temperature_at) {
    const std::size_t c = z.channels();
    const std::size_t plane = z.plane();
    TensorD out(z.shape());
    std::vector<double> scores(c), probs(c);
    for (std::size_t p = 0; p < plane; ++p) {
        const double inv_t = inv_temperature_at(p);
        for (std::size_t k = 0; k < c; ++k) scores[k] = static_cast<double>(z[k * plane + p]) * inv_t;
        softmax_pixel(scores, probs);
        for (std::size_t k = 0; k < c; ++k) out[k * plane + p] = probs[k];
    }
    return ProbabilityMap(std::move(out));
}

}  // namespace

ProbabilityMap softmax(const LogitMap& logits) {
    return softmax_impl(logits.data(), [](std::size_t) { return 1.0; });
}

ProbabilityMap softmax_scaled(const LogitMap& logits, const TemperatureMap& temperature) {
    require(temperature.height() == logits.height() && temperature.width() == logits.width(),
            "softmax_scaled: temperature map does not match logit spatial size");
    const TensorF& t = temperature.data();
    return softmax_impl(logits.data(), [&](std::size_t p) { return 1.0 / static_cast<double>(t[p]); });
}

ProbabilityMap softmax_scaled(const LogitMap& logits, double temperature) {
    require(temperature > 0.0 && std::isfinite(temperature), "softmax_scaled: temperature must be positive");
    const double inv = 1.0 / temperature;
    return softmax_impl(logits.data(), [inv](std::size_t) { return inv; });
}

namespace {

template <typename T>
std::vector<std::uint8_t> argmax_impl(const Tensor<T>& s) {
    const std::size_t c = s.channels();
    const std::size_t plane = s.plane();
    std::vector<std::uint8_t> out(plane, 0);
    for (std::size_t p = 0; p < plane; ++p) {
        T best = s[p];
        std::uint8_t arg = 0;
        for (std::size_t k = 1; k < c; ++k) {
            const T v = s[k * plane + p];
            if (v > best) {
                best = v;
                arg = static_cast<std::uint8_t>(k);
            }
        }
        out[p] = arg;
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> argmax_labels(const TensorF& scores) { return argmax_impl(scores); }
std::vector<std::uint8_t> argmax_labels(const TensorD& scores) { return argmax_impl(scores); }

}  // namespace oodcal
