#include "oodcal/metrics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "oodcal/softmax.hpp"

namespace oodcal::metrics {

std::size_t BinningConfig::bin_of(double confidence) const {
    require(num_bins >= 1, "BinningConfig: need at least one bin");
    require(confidence >= 0.0 && confidence <= 1.0, "BinningConfig: confidence outside [0, 1]");
    // Smallest k with confidence <= k / B; the product may round across an edge.
    auto k = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(num_bins)));
    k = std::clamp<std::size_t>(k, 1, num_bins);
    while (k > 1 && confidence <= edge(k - 1)) --k;
    while (k < num_bins && confidence > edge(k)) ++k;
    return k - 1;
}

Mask dilate(const Mask& mask, std::size_t height, std::size_t width, std::size_t kernel) {
    require(mask.size() == height * width, "dilate: mask size mismatch");
    require(kernel >= 1, "dilate: kernel must be positive");
    const long lo = -static_cast<long>(kernel / 2);
    const long hi = static_cast<long>(kernel) - 1 - static_cast<long>(kernel / 2);
    const auto h = static_cast<long>(height), w = static_cast<long>(width);
    // Separable: a square element is a row max followed by a column max.
    Mask rows(mask.size(), 0), out(mask.size(), 0);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            std::uint8_t v = 0;
            for (long o = std::max(lo, -x); o <= hi && x + o < w && !v; ++o) v = mask[y * w + x + o] != 0;
            rows[y * w + x] = v;
        }
    }
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            std::uint8_t v = 0;
            for (long o = std::max(lo, -y); o <= hi && y + o < h && !v; ++o) v = rows[(y + o) * w + x];
            out[y * w + x] = v;
        }
    }
    return out;
}

Mask dilated_roi(const LabelMap& y, std::size_t kernel) {
    Mask fg(y.indices().size());
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = y.indices()[i] != 0;
    return dilate(fg, y.height(), y.width(), kernel);
}

std::vector<BinRecord> bin_statistics(std::span<const double> confidence, std::span<const std::uint8_t> correct,
                                      const BinningConfig& bins) {
    require(confidence.size() == correct.size(), "bin_statistics: size mismatch");
    std::vector<BinRecord> r(bins.num_bins);
    for (std::size_t i = 0; i < confidence.size(); ++i) {
        auto& b = r[bins.bin_of(confidence[i])];
        b.confidence_sum += confidence[i];
        b.correct_sum += correct[i] ? 1.0 : 0.0;
        ++b.count;
    }
    return r;
}

double calibration_error(const std::vector<BinRecord>& records) {
    std::size_t n = 0;
    double gap = 0.0;
    for (const auto& b : records) {
        n += b.count;
        gap += std::abs(b.correct_sum - b.confidence_sum);
    }
    require(n > 0, "calibration error: no pixels in the region of interest");
    return gap / static_cast<double>(n);
}

double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct, const BinningConfig& bins) {
    return calibration_error(bin_statistics(confidence, correct, bins));
}

double sce(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t classes,
           const BinningConfig& bins) {
    const std::size_t n = labels.size();
    require(classes >= 1 && probs.size() == classes * n, "sce: probability/label size mismatch");
    require(n > 0, "sce: no pixels in the region of interest");
    std::vector<std::uint8_t> correct(n);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < n; ++i) correct[i] = labels[i] == c;
        total += ece(probs.subspan(c * n, n), correct, bins);
    }
    return total / static_cast<double>(classes);
}

namespace {

void check_pair(const ProbabilityMap& p, const LabelMap& y, const Mask& roi) {
    require(p.classes() == y.classes() && p.height() == y.height() && p.width() == y.width(),
            "metrics: probability map and label differ in shape");
    require(roi.size() == y.height() * y.width(), "metrics: ROI size mismatch");
}

// ROI-restricted confidences, correctness and class-major probabilities.
struct Gathered {
    std::vector<double> confidence;
    std::vector<std::uint8_t> correct, labels;
    std::vector<double> probs;
};

Gathered gather(const ProbabilityMap& p, const LabelMap& y, const Mask& roi) {
    check_pair(p, y, roi);
    const std::size_t c = p.classes(), plane = roi.size();
    const auto pred = argmax_labels(p);
    Gathered g;
    for (std::size_t i = 0; i < plane; ++i) {
        if (!roi[i]) continue;
        g.confidence.push_back(p.data()[pred[i] * plane + i]);
        g.correct.push_back(pred[i] == y.indices()[i]);
        g.labels.push_back(y.indices()[i]);
    }
    const std::size_t n = g.labels.size();
    g.probs.resize(c * n);
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t j = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            if (roi[i]) g.probs[k * n + j++] = p.data()[k * plane + i];
        }
    }
    return g;
}

}  // namespace

double ece(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins) {
    const auto g = gather(p, y, roi);
    return ece(g.confidence, g.correct, bins);
}

double sce(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins) {
    const auto g = gather(p, y, roi);
    return sce(g.probs, g.labels, p.classes(), bins);
}

std::vector<BinRecord> reliability_data(const ProbabilityMap& p, const LabelMap& y, const Mask& roi,
                                        const BinningConfig& bins) {
    const auto g = gather(p, y, roi);
    return bin_statistics(g.confidence, g.correct, bins);
}

std::vector<std::size_t> confidence_histogram(const ProbabilityMap& p, const Mask& roi, const BinningConfig& bins) {
    require(roi.size() == p.height() * p.width(), "confidence_histogram: ROI size mismatch");
    const std::size_t plane = roi.size();
    const auto pred = argmax_labels(p);
    std::vector<std::size_t> counts(bins.num_bins, 0);
    for (std::size_t i = 0; i < plane; ++i) {
        if (roi[i]) ++counts[bins.bin_of(p.data()[pred[i] * plane + i])];
    }
    return counts;
}

std::vector<double> dice(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                         std::size_t classes) {
    require(predicted.size() == truth.size(), "dice: size mismatch");
    std::vector<double> inter(classes, 0.0), a(classes, 0.0), b(classes, 0.0);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        require(predicted[i] < classes && truth[i] < classes, "dice: label out of range");
        a[predicted[i]] += 1;
        b[truth[i]] += 1;
        if (predicted[i] == truth[i]) inter[truth[i]] += 1;
    }
    std::vector<double> d(classes);
    for (std::size_t c = 0; c < classes; ++c) d[c] = a[c] + b[c] > 0 ? 2.0 * inter[c] / (a[c] + b[c]) : 1.0;
    return d;
}

double mean_foreground(const std::vector<double>& per_class) {
    require(per_class.size() >= 2, "mean_foreground: need a background and at least one foreground class");
    double s = 0.0;
    for (std::size_t c = 1; c < per_class.size(); ++c) s += per_class[c];
    return s / static_cast<double>(per_class.size() - 1);
}

TensorD entropy_map(const ProbabilityMap& p) {
    const std::size_t c = p.classes(), plane = p.height() * p.width();
    TensorD h = TensorD::grid(1, p.height(), p.width(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = p.data()[k * plane + i];
            if (v > 0.0) h[i] -= v * std::log(v);
        }
    }
    return h;
}

SliceStats::SliceStats(std::size_t classes, std::size_t num_bins)
    : top(num_bins),
      per_class(classes, std::vector<BinRecord>(num_bins)),
      intersection(classes, 0.0),
      predicted(classes, 0.0),
      truth(classes, 0.0) {}

void SliceStats::merge(const SliceStats& o) {
    require(o.top.size() == top.size() && o.per_class.size() == per_class.size(), "SliceStats: layout mismatch");
    auto add = [](std::vector<BinRecord>& a, const std::vector<BinRecord>& b) {
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k].confidence_sum += b[k].confidence_sum;
            a[k].correct_sum += b[k].correct_sum;
            a[k].count += b[k].count;
        }
    };
    add(top, o.top);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        add(per_class[c], o.per_class[c]);
        intersection[c] += o.intersection[c];
        predicted[c] += o.predicted[c];
        truth[c] += o.truth[c];
    }
    roi_pixels += o.roi_pixels;
}

double SliceStats::sce() const {
    double s = 0.0;
    for (const auto& r : per_class) s += calibration_error(r);
    return s / static_cast<double>(per_class.size());
}

std::vector<double> SliceStats::dice() const {
    std::vector<double> d(intersection.size());
    for (std::size_t c = 0; c < d.size(); ++c) {
        d[c] = predicted[c] + truth[c] > 0 ? 2.0 * intersection[c] / (predicted[c] + truth[c]) : 1.0;
    }
    return d;
}

std::size_t SliceStats::flat_size(std::size_t classes, std::size_t num_bins) {
    return 3 * num_bins * (classes + 1) + 3 * classes + 1;
}

std::vector<double> SliceStats::flatten() const {
    std::vector<double> row;
    row.reserve(flat_size(per_class.size(), top.size()));
    auto put = [&](const std::vector<BinRecord>& r) {
        for (const auto& b : r) {
            row.push_back(b.confidence_sum);
            row.push_back(b.correct_sum);
            row.push_back(static_cast<double>(b.count));
        }
    };
    put(top);
    for (const auto& r : per_class) put(r);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        row.push_back(intersection[c]);
        row.push_back(predicted[c]);
        row.push_back(truth[c]);
    }
    row.push_back(static_cast<double>(roi_pixels));
    return row;
}

SliceStats SliceStats::unflatten(std::span<const double> row, std::size_t classes, std::size_t num_bins) {
    require(row.size() == flat_size(classes, num_bins), "SliceStats: row length does not match the layout");
    SliceStats s(classes, num_bins);
    std::size_t i = 0;
    auto get = [&](std::vector<BinRecord>& r) {
        for (auto& b : r) {
            b.confidence_sum = row[i++];
            b.correct_sum = row[i++];
            b.count = static_cast<std::size_t>(row[i++]);
        }
    };
    get(s.top);
    for (auto& r : s.per_class) get(r);
    for (std::size_t c = 0; c < classes; ++c) {
        s.intersection[c] = row[i++];
        s.predicted[c] = row[i++];
        s.truth[c] = row[i++];
    }
    s.roi_pixels = static_cast<std::size_t>(row[i]);
    return s;
}

SliceStats slice_stats(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins) {
    check_pair(p, y, roi);
    const std::size_t classes = p.classes(), plane = roi.size();
    SliceStats s(classes, bins.num_bins);
    const auto pred = argmax_labels(p);
    const auto& truth = y.indices();
    for (std::size_t i = 0; i < plane; ++i) {
        s.predicted[pred[i]] += 1;
        s.truth[truth[i]] += 1;
        if (pred[i] == truth[i]) s.intersection[truth[i]] += 1;
        if (!roi[i]) continue;
        ++s.roi_pixels;
        const double conf = p.data()[pred[i] * plane + i];
        auto& b = s.top[bins.bin_of(conf)];
        b.confidence_sum += conf;
        b.correct_sum += pred[i] == truth[i] ? 1.0 : 0.0;
        ++b.count;
        for (std::size_t c = 0; c < classes; ++c) {
            const double q = p.data()[c * plane + i];
            auto& bc = s.per_class[c][bins.bin_of(q)];
            bc.confidence_sum += q;
            bc.correct_sum += truth[i] == c ? 1.0 : 0.0;
            ++bc.count;
        }
    }
    return s;
}

CalibrationAccumulator::CalibrationAccumulator(std::size_t classes, const BinningConfig& bins)
    : bins_(bins), total_(classes, bins.num_bins) {
    require(classes >= 1 && bins.num_bins >= 1, "CalibrationAccumulator: bad configuration");
}

void CalibrationAccumulator::add(const ProbabilityMap& p, const LabelMap& y, const Mask& roi) {
    require(p.classes() == total_.per_class.size(), "CalibrationAccumulator: class count mismatch");
    total_.merge(slice_stats(p, y, roi, bins_));
}

void CalibrationAccumulator::add(const SliceStats& s) { total_.merge(s); }

CalibrationReport make_report(const CalibrationAccumulator& acc, std::string calibrator, std::string corruption,
                              std::uint64_t seed, std::size_t num_bins) {
    CalibrationReport r;
    r.calibrator = std::move(calibrator);
    r.corruption = std::move(corruption);
    r.seed = seed;
    r.ece = acc.ece();
    r.sce = acc.sce();
    r.dice = acc.dice();
    r.bins = acc.reliability();
    r.roi_pixels = acc.roi_pixels();
    r.num_bins = num_bins;
    return r;
}

void to_json(nlohmann::json& j, const BinRecord& b) {
    j = {{"confidence_sum", b.confidence_sum}, {"correct_sum", b.correct_sum}, {"count", b.count}};
}

void from_json(const nlohmann::json& j, BinRecord& b) {
    j.at("confidence_sum").get_to(b.confidence_sum);
    j.at("correct_sum").get_to(b.correct_sum);
    j.at("count").get_to(b.count);
}

void to_json(nlohmann::json& j, const CalibrationReport& r) {
    j = {{"calibrator", r.calibrator}, {"corruption", r.corruption}, {"seed", r.seed},
         {"ece", r.ece},               {"sce", r.sce},               {"dice", r.dice},
         {"bins", r.bins},             {"roi_pixels", r.roi_pixels}, {"num_bins", r.num_bins}};
}

void from_json(const nlohmann::json& j, CalibrationReport& r) {
    j.at("calibrator").get_to(r.calibrator);
    j.at("corruption").get_to(r.corruption);
    j.at("seed").get_to(r.seed);
    j.at("ece").get_to(r.ece);
    j.at("sce").get_to(r.sce);
    j.at("dice").get_to(r.dice);
    j.at("bins").get_to(r.bins);
    j.at("roi_pixels").get_to(r.roi_pixels);
    j.at("num_bins").get_to(r.num_bins);
}

}  // namespace oodcal::metrics
