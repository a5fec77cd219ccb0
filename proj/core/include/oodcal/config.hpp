#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/augment.hpp"
#include "oodcal/calibnet.hpp"
#include "oodcal/corruption.hpp"
#include "oodcal/phantom.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/shapeprior.hpp"

namespace oodcal::harness {

struct ExperimentConfig {
    std::string name = "default";

    phantom::PhantomConfig phantom;
    std::size_t case_count = 100;
    std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
    std::uint64_t data_seed = 20240601;
    // When set, cases are imported from this directory (core layout) instead of generated.
    std::string import_dir;

    augment::AugmentationPolicy augmentation;
    segnet::SegModelConfig segmenter;
    segnet::SegTrainConfig seg_training;
    shapeprior::ShapePriorConfig shape_prior;
    calib::CalibNetConfig calibnet;
    calib::CalibTrainConfig calib_training;

    std::vector<corruption::Kind> corruptions{corruption::Kind::bias_field, corruption::Kind::motion,
                                              corruption::Kind::ghosting, corruption::Kind::spike};
    std::vector<corruption::Severity> severities{corruption::Severity::moderate};
    std::uint64_t corruption_seed = 7;

    std::vector<calib::CalibratorKind> calibrators{calib::CalibratorKind::uncalibrated, calib::CalibratorKind::global_ts,
                                                   calib::CalibratorKind::lts, calib::CalibratorKind::alea,
                                                   calib::CalibratorKind::proposed};
    std::size_t num_bins = 15;
    std::size_t roi_kernel = 10;
    std::size_t test_n_aug = 6;
    std::vector<std::size_t> na_ablation{1, 2, 4, 6, 8, 16};
    bool component_ablation = true;
    // Number of test slices per suite stored as full maps for figures.
    std::size_t figure_slices = 1;

    std::vector<std::uint64_t> seeds{0, 1, 2};

    // Acceptance-scale defaults: 128 x 128, 100 cases, reduced epochs.
    static ExperimentConfig benchmark();
    // 32 x 32, 8 cases, 20 epochs.
    static ExperimentConfig smoke();

    // Throws with the offending field in the message.
    void validate() const;
    // Corrupted suites as tags, e.g. "ghosting-moderate"; "clean" first.
    std::vector<std::string> suite_tags() const;
    std::vector<corruption::CorruptionSpec> corrupted_suites() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Absent keys keep their defaults; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

}  // namespace oodcal::harness
