#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/types.hpp"

namespace oodcal::metrics {

// Equal-width bins on [0, 1]. Bin k (1-based) covers (b_{k-1}, b_k] with
// b_k = k / num_bins; a confidence of exactly 0 goes to bin 1.
struct BinningConfig {
    std::size_t num_bins = 15;

    // 0-based bin index.
    std::size_t bin_of(double confidence) const;
    double edge(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(num_bins); }
};

using Mask = std::vector<std::uint8_t>;  // M * N, row-major, 0 or 1

// Foreground (any class but 0) dilated by a kernel x kernel square:
// out(q) = max of in(q + o) over o in [-(kernel/2), kernel - 1 - kernel/2] per axis.
Mask dilated_roi(const LabelMap& y, std::size_t kernel = 10);
Mask dilate(const Mask& mask, std::size_t height, std::size_t width, std::size_t kernel);

struct BinRecord {
    double confidence_sum = 0.0;
    double correct_sum = 0.0;
    std::size_t count = 0;

    double mean_confidence() const { return count ? confidence_sum / static_cast<double>(count) : 0.0; }
    double accuracy() const { return count ? correct_sum / static_cast<double>(count) : 0.0; }
};

// Bin statistics from per-pixel (confidence, correct) pairs.
std::vector<BinRecord> bin_statistics(std::span<const double> confidence, std::span<const std::uint8_t> correct,
                                      const BinningConfig& bins);
// sum_k |correct_k - confidence_k| / n over the records.
double calibration_error(const std::vector<BinRecord>& records);

double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct, const BinningConfig& bins);
// probs is channel-major C x n; labels has n entries in [0, C).
double sce(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t classes,
           const BinningConfig& bins);

// Map-level forms over the pixels where roi is nonzero. Empty ROI throws.
double ece(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins = {});
double sce(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins = {});
std::vector<BinRecord> reliability_data(const ProbabilityMap& p, const LabelMap& y, const Mask& roi,
                                        const BinningConfig& bins = {});
std::vector<std::size_t> confidence_histogram(const ProbabilityMap& p, const Mask& roi, const BinningConfig& bins = {});

// Per-class 2|A n B| / (|A| + |B|); a class absent from both gives 1.
std::vector<double> dice(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                         std::size_t classes);
double mean_foreground(const std::vector<double>& per_class);

// -sum_c p log p per pixel (natural log, 0 log 0 = 0), 1 x M x N.
TensorD entropy_map(const ProbabilityMap& p);

// Sufficient statistics of one slice for pooled ECE, SCE and Dice.
struct SliceStats {
    std::vector<BinRecord> top;                     // max-confidence bins, ROI pixels
    std::vector<std::vector<BinRecord>> per_class;  // class-probability bins, ROI pixels
    std::vector<double> intersection, predicted, truth;  // per class, whole slice
    std::size_t roi_pixels = 0;

    SliceStats() = default;
    SliceStats(std::size_t classes, std::size_t num_bins);

    void merge(const SliceStats& other);
    double ece() const { return calibration_error(top); }
    double sce() const;
    std::vector<double> dice() const;

    // Fixed-length numeric layout for storage as a tensor row.
    std::vector<double> flatten() const;
    static SliceStats unflatten(std::span<const double> row, std::size_t classes, std::size_t num_bins);
    static std::size_t flat_size(std::size_t classes, std::size_t num_bins);
};

// Correctness and confidence use argmax(p); Dice counts cover the whole slice.
SliceStats slice_stats(const ProbabilityMap& p, const LabelMap& y, const Mask& roi, const BinningConfig& bins = {});

// Pixel-pooled accumulation over many slices.
class CalibrationAccumulator {
public:
    CalibrationAccumulator(std::size_t classes, const BinningConfig& bins = {});

    void add(const ProbabilityMap& p, const LabelMap& y, const Mask& roi);
    void add(const SliceStats& s);

    double ece() const { return total_.ece(); }
    double sce() const { return total_.sce(); }
    std::vector<double> dice() const { return total_.dice(); }
    const std::vector<BinRecord>& reliability() const { return total_.top; }
    std::size_t roi_pixels() const { return total_.roi_pixels; }

private:
    BinningConfig bins_;
    SliceStats total_;
};

struct CalibrationReport {
    std::string calibrator;
    std::string corruption;
    std::uint64_t seed = 0;
    double ece = 0.0;
    double sce = 0.0;
    std::vector<double> dice;  // per class, computed over whole slices
    std::vector<BinRecord> bins;
    std::size_t roi_pixels = 0;
    std::size_t num_bins = 15;
};

CalibrationReport make_report(const CalibrationAccumulator& acc, std::string calibrator, std::string corruption,
                              std::uint64_t seed, std::size_t num_bins);

void to_json(nlohmann::json& j, const BinRecord& b);
void from_json(const nlohmann::json& j, BinRecord& b);
void to_json(nlohmann::json& j, const CalibrationReport& r);
void from_json(const nlohmann::json& j, CalibrationReport& r);

}  // namespace oodcal::metrics
