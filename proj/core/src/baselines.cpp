#include <cmath>

#include "oodcal/calibnet.hpp"
#include "oodcal/nn/loss.hpp"

namespace oodcal::calib {

double temperature_nll(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels, double t) {
    require(!logits.empty() && logits.size() == labels.size(), "temperature_nll: need matching logits and labels");
    require(t > 0.0, "temperature_nll: temperature must be positive");
    double total = 0.0, pixels = 0.0;
    std::vector<double> s;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const TensorF& z = logits[i].data();
        const auto& y = labels[i].indices();
        const std::size_t c = z.channels(), plane = z.plane();
        require(y.size() == plane, "temperature_nll: label size mismatch");
        s.resize(c);
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = -INFINITY;
            for (std::size_t k = 0; k < c; ++k) {
                s[k] = z[k * plane + p] / t;
                mx = std::max(mx, s[k]);
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) sum += std::exp(s[k] - mx);
            total += mx + std::log(sum) - s[y[p]];
        }
        pixels += static_cast<double>(plane);
    }
    return total / pixels;
}

double fit_global_ts(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels) {
    // NLL is convex in 1/T, hence unimodal in log T.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(0.05), b = std::log(20.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = temperature_nll(logits, labels, std::exp(c));
    double fd = temperature_nll(logits, labels, std::exp(d));
    while (b - a > 1e-6) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = temperature_nll(logits, labels, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = temperature_nll(logits, labels, std::exp(d));
        }
    }
    return std::exp(0.5 * (a + b));
}

double fit_global_ts(const LogitModel& segmenter, const std::vector<LabeledSlice>& slices) {
    std::vector<LogitMap> logits;
    std::vector<LabelMap> labels;
    for (const auto& [x, y] : slices) {
        logits.push_back(segmenter.forward(x));
        labels.push_back(y);
    }
    return fit_global_ts(logits, labels);
}

}  // namespace oodcal::calib
