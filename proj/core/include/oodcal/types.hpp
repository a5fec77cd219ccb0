#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodcal/tensor.hpp"

namespace oodcal {

// Closed interval [lo, hi] used for sampling ranges.
struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool valid() const { return lo <= hi; }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

// One grayscale slice, shape 1 x M x N.
class ImageSlice {
public:
    ImageSlice() = default;
    ImageSlice(TensorF data, std::string case_id = {}, int slice_index = 0);

    const TensorF& data() const { return data_; }
    std::size_t height() const { return data_.height(); }
    std::size_t width() const { return data_.width(); }
    float operator()(std::size_t y, std::size_t x) const { return data_(0, y, x); }

    const std::string& case_id() const { return case_id_; }
    int slice_index() const { return slice_index_; }

    // Same identity, new pixels.
    ImageSlice with_data(TensorF data) const { return ImageSlice(std::move(data), case_id_, slice_index_); }

private:
    TensorF data_;
    std::string case_id_;
    int slice_index_ = 0;
};

// One-hot ground truth, C x M x N with C >= 2.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(TensorF onehot);
    static LabelMap from_indices(const std::vector<std::uint8_t>& indices, std::size_t classes,
                                 std::size_t height, std::size_t width);

    const TensorF& data() const { return onehot_; }
    const std::vector<std::uint8_t>& indices() const { return indices_; }
    std::size_t classes() const { return onehot_.channels(); }
    std::size_t height() const { return onehot_.height(); }
    std::size_t width() const { return onehot_.width(); }
    int at(std::size_t y, std::size_t x) const { return indices_[y * width() + x]; }

private:
    TensorF onehot_;
    std::vector<std::uint8_t> indices_;
};

class LogitMap {
public:
    LogitMap() = default;
    explicit LogitMap(TensorF data);
    const TensorF& data() const { return data_; }
    std::size_t classes() const { return data_.channels(); }
    std::size_t height() const { return data_.height(); }
    std::size_t width() const { return data_.width(); }

private:
    TensorF data_;
};

// Per-pixel class probabilities. Stored in float64 so that metric oracles
// can be compared at machine precision.
class ProbabilityMap {
public:
    ProbabilityMap() = default;
    explicit ProbabilityMap(TensorD data);
    const TensorD& data() const { return data_; }
    std::size_t classes() const { return data_.channels(); }
    std::size_t height() const { return data_.height(); }
    std::size_t width() const { return data_.width(); }

private:
    TensorD data_;
};

// Strictly positive per-pixel temperature, one channel shared by all classes.
class TemperatureMap {
public:
    TemperatureMap() = default;
    explicit TemperatureMap(TensorF data);
    static TemperatureMap constant(std::size_t height, std::size_t width, float value);
    const TensorF& data() const { return data_; }
    std::size_t height() const { return data_.height(); }
    std::size_t width() const { return data_.width(); }

private:
    TensorF data_;
};

enum class SplitRole { segmentation_train, calibration_train, intra_domain_test };

struct DatasetSplit {
    std::vector<std::string> train;       // segmentation-train
    std::vector<std::string> validation;  // calibration-train
    std::vector<std::string> test;        // intra-domain-test

    // Throws if any case id appears in more than one list.
    void validate() const;
};

std::string to_string(SplitRole role);

// Per-slice min-max normalization to [0, 1]; a constant image maps to zeros.
TensorF normalize_minmax(TensorF image);

}  // namespace oodcal
