#include "oodcal/types.hpp"

#include <cmath>
#include <set>

namespace oodcal {

namespace {

void require_rank3(const std::vector<std::size_t>& shape, const char* what) {
    require(shape.size() == 3, std::string(what) + ": expected a C x M x N grid, got " + shape_string(shape));
}

}  // namespace

ImageSlice::ImageSlice(TensorF data, std::string case_id, int slice_index)
    : data_(std::move(data)), case_id_(std::move(case_id)), slice_index_(slice_index) {
    require_rank3(data_.shape(), "ImageSlice");
    require(data_.channels() == 1, "ImageSlice: expected a single channel, got " + shape_string(data_.shape()));
    require(data_.all_finite(), "ImageSlice: non-finite intensity");
}

LabelMap::LabelMap(TensorF onehot) : onehot_(std::move(onehot)) {
    require_rank3(onehot_.shape(), "LabelMap");
    const std::size_t c = onehot_.channels();
    require(c >= 2, "LabelMap: need at least 2 classes");
    const std::size_t plane = onehot_.plane();
    indices_.assign(plane, 0);
    for (std::size_t p = 0; p < plane; ++p) {
        float sum = 0.0f;
        for (std::size_t k = 0; k < c; ++k) {
            const float v = onehot_[k * plane + p];
            require(v == 0.0f || v == 1.0f, "LabelMap: entries must be 0 or 1");
            sum += v;
            if (v == 1.0f) indices_[p] = static_cast<std::uint8_t>(k);
        }
        require(sum == 1.0f, "LabelMap: each pixel must have exactly one active class");
    }
}

LabelMap LabelMap::from_indices(const std::vector<std::uint8_t>& indices, std::size_t classes,
                                std::size_t height, std::size_t width) {
    require(indices.size() == height * width, "LabelMap::from_indices: size mismatch");
    TensorF onehot = TensorF::grid(classes, height, width, 0.0f);
    const std::size_t plane = height * width;
    for (std::size_t p = 0; p < plane; ++p) {
        require(indices[p] < classes, "LabelMap::from_indices: class index out of range");
        onehot[indices[p] * plane + p] = 1.0f;
    }
    return LabelMap(std::move(onehot));
}

LogitMap::LogitMap(TensorF data) : data_(std::move(data)) {
    require_rank3(data_.shape(), "LogitMap");
    require(data_.all_finite(), "LogitMap: non-finite logit");
}

ProbabilityMap::ProbabilityMap(TensorD data) : data_(std::move(data)) {
    require_rank3(data_.shape(), "ProbabilityMap");
    const std::size_t c = data_.channels();
    const std::size_t plane = data_.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double v = data_[k * plane + p];
            require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "ProbabilityMap: value outside [0, 1]");
            sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-6, "ProbabilityMap: channel sum differs from 1");
    }
}

TemperatureMap::TemperatureMap(TensorF data) : data_(std::move(data)) {
    require_rank3(data_.shape(), "TemperatureMap");
    require(data_.channels() == 1, "TemperatureMap: must be single-channel");
    for (float v : data_.values()) {
        require(std::isfinite(v) && v > 0.0f, "TemperatureMap: temperatures must be finite and positive");
    }
}

TemperatureMap TemperatureMap::constant(std::size_t height, std::size_t width, float value) {
    return TemperatureMap(TensorF::grid(1, height, width, value));
}

void DatasetSplit::validate() const {
    std::set<std::string> seen;
    for (const auto* list : {&train, &validation, &test}) {
        for (const auto& id : *list) {
            require(seen.insert(id).second, "DatasetSplit: case '" + id + "' appears in more than one split");
        }
    }
}

std::string to_string(SplitRole role) {
    switch (role) {
        case SplitRole::segmentation_train: return "segmentation-train";
        case SplitRole::calibration_train: return "calibration-train";
        case SplitRole::intra_domain_test: return "intra-domain-test";
    }
    return "unknown";
}

TensorF normalize_minmax(TensorF image) {
    if (image.empty()) return image;
    const auto [lo, hi] = std::minmax_element(image.storage().begin(), image.storage().end());
    const float mn = *lo;
    const float range = *hi - *lo;
    for (float& v : image.storage()) v = range > 0.0f ? (v - mn) / range : 0.0f;
    return image;
}

}  // namespace oodcal
