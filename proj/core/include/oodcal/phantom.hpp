#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/types.hpp"

namespace oodcal::phantom {

// Class indices of the synthetic short-axis phantom.
enum Class : std::uint8_t { background = 0, right_ventricle = 1, myocardium = 2, left_ventricle = 3 };
inline constexpr std::size_t class_count = 4;

struct PhantomConfig {
    std::size_t image_size = 128;
    std::size_t classes = class_count;
    int slices_per_case = 3;

    // Geometry, in pixels for a 128 x 128 slice (see for_size) and radians.
    Range lv_radius{12.0, 20.0};
    Range myo_thickness{5.0, 9.0};
    Range rv_thickness{6.0, 14.0};
    Range rv_gap{0.0, 1.5};
    Range rv_extent{1.2, 2.4};
    Range rv_direction{2.74, 3.54};
    double center_jitter = 8.0;
    // Radius scale drop between consecutive slices (basal to apical).
    double slice_shrink = 0.12;

    // Mean intensity per class, indexed by Class.
    std::array<double, class_count> class_intensity{0.08, 0.72, 0.32, 0.85};
    double noise_std = 0.04;
    double gradient_amplitude = 0.08;

    // Background clutter: a body ellipse and bright blobs away from the heart.
    // Labelled background; they force the segmenter to use shape context.
    double body_intensity = 0.22;
    int distractor_count = 3;
    Range distractor_radius{4.0, 10.0};
    Range distractor_intensity{0.45, 0.85};

    std::uint64_t seed = 0;

    // Default config with geometry scaled from the 128-pixel reference to `size`.
    static PhantomConfig for_size(std::size_t size);
    // Throws on empty ranges, non-positive sizes or a class count other than 4.
    void validate() const;
};

using Slice = std::pair<ImageSlice, LabelMap>;

// Deterministic in (config, case_seed). Throws if no non-degenerate geometry
// fitting the image is found within 100 draws.
std::vector<Slice> generate_case(const PhantomConfig& config, std::uint64_t case_seed,
                                 const std::string& case_id = "case");

std::string case_name(std::size_t index);
std::uint64_t case_seed(std::uint64_t dataset_seed, std::size_t index);

// Shuffled, disjoint split with sizes from the largest-remainder rounding
// of ratios * |case_ids|. Ratios must sum to 1.
DatasetSplit make_splits(const std::vector<std::string>& case_ids, const std::array<double, 3>& ratios,
                         std::uint64_t seed);

// Writes every case in the core tensor layout plus manifest.json with case
// ids and split roles. Returns the split.
DatasetSplit write_dataset(const std::filesystem::path& root, const PhantomConfig& config, std::size_t case_count,
                           const std::array<double, 3>& ratios, std::uint64_t split_seed);

DatasetSplit read_manifest_split(const std::filesystem::path& root);

void to_json(nlohmann::json& j, const PhantomConfig& c);
void from_json(const nlohmann::json& j, PhantomConfig& c);

}  // namespace oodcal::phantom
