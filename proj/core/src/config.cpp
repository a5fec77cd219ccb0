#include "oodcal/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "oodcal/json_util.hpp"

namespace oodcal::harness {

ExperimentConfig ExperimentConfig::benchmark() {
    ExperimentConfig c;
    c.name = "benchmark";
    c.phantom = phantom::PhantomConfig::for_size(128);
    c.case_count = 100;
    c.segmenter.base_channels = 8;
    c.seg_training.epochs = 16;
    c.seg_training.val_every = 4;
    c.shape_prior.epochs = 100;
    c.calib_training.epochs = 20;
    return c;
}

ExperimentConfig ExperimentConfig::smoke() {
    ExperimentConfig c;
    c.name = "smoke";
    c.phantom = phantom::PhantomConfig::for_size(32);
    c.case_count = 8;
    c.segmenter.base_channels = 8;
    c.seg_training.epochs = 20;
    c.shape_prior.epochs = 20;
    c.calib_training.epochs = 20;
    c.calibnet.stem_channels = 4;
    c.calibnet.width = 8;
    c.calibnet.attention_hidden = 4;
    c.seeds = {0, 1};
    return c;
}

void ExperimentConfig::validate() const {
    phantom.validate();
    require(case_count >= 3, "config.case_count: need at least 3 cases");
    double sum = 0.0;
    for (double r : split_ratios) {
        require(r >= 0.0, "config.split_ratios: negative ratio");
        sum += r;
    }
    require(std::abs(sum - 1.0) < 1e-9, "config.split_ratios: must sum to 1");
    augmentation.validate();
    require(segmenter.classes == phantom.classes, "config.segmenter.classes: must equal phantom.classes");
    require(calibnet.classes == segmenter.classes, "config.calibnet.classes: must equal segmenter.classes");
    const std::size_t factor = std::size_t{1} << segmenter.depth;
    require(phantom.image_size % factor == 0, "config.phantom.image_size: must be divisible by 2^segmenter.depth");
    require(phantom.image_size % (std::size_t{1} << shape_prior.depth) == 0,
            "config.phantom.image_size: must be divisible by 2^shape_prior.depth");
    shape_prior.validate();
    calibnet.validate();
    require(seg_training.epochs >= 1 && calib_training.epochs >= 1, "config: epochs must be >= 1");
    require(calib_training.n_aug >= 1 && test_n_aug >= 1, "config: n_aug must be >= 1");
    require(num_bins >= 1, "config.num_bins: must be >= 1");
    require(roi_kernel >= 1, "config.roi_kernel: must be >= 1");
    require(!seeds.empty(), "config.seeds: at least one seed");
    require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), "config.seeds: duplicates");
    require(!calibrators.empty(), "config.calibrators: at least one calibrator");
    for (std::size_t n : na_ablation) require(n >= 1, "config.na_ablation: entries must be >= 1");
    for (auto k : corruptions) require(k != corruption::Kind::identity, "config.corruptions: 'clean' is implicit");
}

std::vector<corruption::CorruptionSpec> ExperimentConfig::corrupted_suites() const {
    std::vector<corruption::CorruptionSpec> out;
    for (auto k : corruptions) {
        for (auto s : severities) out.push_back(corruption::CorruptionSpec::preset(k, s, corruption_seed));
    }
    return out;
}

std::vector<std::string> ExperimentConfig::suite_tags() const {
    std::vector<std::string> tags{"clean"};
    for (const auto& s : corrupted_suites()) tags.push_back(s.tag());
    return tags;
}

namespace {

template <typename E, typename ToS>
nlohmann::json names(const std::vector<E>& v, ToS to_s) {
    auto a = nlohmann::json::array();
    for (auto e : v) a.push_back(to_s(e));
    return a;
}

template <typename E, typename Parse>
void read_names(const nlohmann::json& j, const char* key, std::vector<E>& out, Parse parse) {
    if (auto it = j.find(key); it != j.end()) {
        out.clear();
        for (const auto& s : *it) out.push_back(parse(s.get<std::string>()));
    }
}

}  // namespace

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"name", c.name},
         {"phantom", c.phantom},
         {"case_count", c.case_count},
         {"split_ratios", c.split_ratios},
         {"data_seed", c.data_seed},
         {"import_dir", c.import_dir},
         {"augmentation", c.augmentation},
         {"segmenter", c.segmenter},
         {"seg_training", c.seg_training},
         {"shape_prior", c.shape_prior},
         {"calibnet", c.calibnet},
         {"calib_training", c.calib_training},
         {"corruptions", names(c.corruptions, [](corruption::Kind k) { return corruption::to_string(k); })},
         {"severities", names(c.severities, [](corruption::Severity s) { return corruption::to_string(s); })},
         {"corruption_seed", c.corruption_seed},
         {"calibrators", names(c.calibrators, [](calib::CalibratorKind k) { return calib::to_string(k); })},
         {"num_bins", c.num_bins},
         {"roi_kernel", c.roi_kernel},
         {"test_n_aug", c.test_n_aug},
         {"na_ablation", c.na_ablation},
         {"component_ablation", c.component_ablation},
         {"figure_slices", c.figure_slices},
         {"seeds", c.seeds}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    require(j.is_object(), "config: expected a JSON object");
    static const std::set<std::string> known{
        "name",        "phantom",     "case_count",      "split_ratios", "data_seed",      "import_dir",
        "augmentation", "segmenter",  "seg_training",    "shape_prior",  "calibnet",       "calib_training",
        "corruptions", "severities",  "corruption_seed", "calibrators",  "num_bins",       "roi_kernel",
        "test_n_aug",  "na_ablation", "component_ablation", "figure_slices", "seeds"};
    for (const auto& [key, value] : j.items()) {
        require(known.count(key) > 0, "config: unknown key '" + key + "'");
    }
    read_optional(j, "name", c.name);
    read_optional(j, "phantom", c.phantom);
    read_optional(j, "case_count", c.case_count);
    read_optional(j, "split_ratios", c.split_ratios);
    read_optional(j, "data_seed", c.data_seed);
    read_optional(j, "import_dir", c.import_dir);
    read_optional(j, "augmentation", c.augmentation);
    read_optional(j, "segmenter", c.segmenter);
    read_optional(j, "seg_training", c.seg_training);
    read_optional(j, "shape_prior", c.shape_prior);
    read_optional(j, "calibnet", c.calibnet);
    read_optional(j, "calib_training", c.calib_training);
    read_names(j, "corruptions", c.corruptions, corruption::parse_kind);
    read_names(j, "severities", c.severities, corruption::parse_severity);
    read_optional(j, "corruption_seed", c.corruption_seed);
    read_names(j, "calibrators", c.calibrators, calib::parse_calibrator);
    read_optional(j, "num_bins", c.num_bins);
    read_optional(j, "roi_kernel", c.roi_kernel);
    read_optional(j, "test_n_aug", c.test_n_aug);
    read_optional(j, "na_ablation", c.na_ablation);
    read_optional(j, "component_ablation", c.component_ablation);
    read_optional(j, "figure_slices", c.figure_slices);
    read_optional(j, "seeds", c.seeds);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(bool(in), "cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config " + path.string() + ": " + e.what());
    }
    ExperimentConfig c;
    try {
        from_json(j, c);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace oodcal::harness
