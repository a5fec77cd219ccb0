#pragma once

#include <cstdint>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/types.hpp"

namespace oodcal::augment {

// Training-time augmentation. The susceptibility estimator reuses the
// photometric part of the same policy.
struct AugmentationPolicy {
    bool brightness = true;
    Range brightness_range{-0.1, 0.1};
    bool contrast = true;
    Range contrast_range{0.8, 1.2};
    bool gamma = true;
    Range gamma_range{0.7, 1.4};
    bool noise = true;
    Range noise_std_range{0.0, 0.05};

    bool affine = true;
    Range rotation_deg{-15.0, 15.0};
    Range scale{0.9, 1.1};
    Range translation{-5.0, 5.0};
    bool elastic = true;
    double elastic_spacing = 16.0;
    double elastic_std = 1.5;

    static AugmentationPolicy identity();
    AugmentationPolicy photometric_only() const;
    bool has_geometric() const { return affine || elastic; }
    bool has_photometric() const { return brightness || contrast || gamma || noise; }
    // Every enabled range must be non-empty and contain the identity value.
    void validate() const;
};

struct AugParams {
    double brightness = 0.0;
    double contrast = 1.0;
    double gamma = 1.0;
    double noise_std = 0.0;
    std::uint64_t noise_seed = 0;

    double rotation_deg = 0.0;
    double scale = 1.0;
    double shift_x = 0.0;
    double shift_y = 0.0;
    bool elastic = false;
    double elastic_spacing = 16.0;
    double elastic_std = 0.0;
    std::uint64_t elastic_seed = 0;

    bool photometric_identity() const {
        return brightness == 0.0 && contrast == 1.0 && gamma == 1.0 && noise_std == 0.0;
    }
    bool geometric_identity() const {
        return rotation_deg == 0.0 && scale == 1.0 && shift_x == 0.0 && shift_y == 0.0 &&
               (!elastic || elastic_std == 0.0);
    }
};

// Each transform draws from its own stream derived from `seed`, so the
// result is deterministic and toggling one transform does not shift the others.
AugParams sample_params(const AugmentationPolicy& policy, std::uint64_t seed);

// contrast about the image mean -> brightness -> gamma of the clipped value
// -> additive Gaussian noise -> clip to [0, 1]. Identity steps are skipped,
// so identity parameters pass the image through bit-exactly.
ImageSlice apply_photometric(const ImageSlice& x, const AugParams& params);

// Same spatial warp for both: bilinear for the image, nearest neighbour for
// the label (which stays one-hot). Outside the field of view: 0 / background.
std::pair<ImageSlice, LabelMap> apply_geometric(const ImageSlice& x, const LabelMap& y, const AugParams& params);

void to_json(nlohmann::json& j, const AugmentationPolicy& p);
void from_json(const nlohmann::json& j, AugmentationPolicy& p);

}  // namespace oodcal::augment
