#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oodcal/config.hpp"

namespace oodcal::harness {

namespace fs = std::filesystem;

// Failure inside a named pipeline stage; what() starts with "[stage] ".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Method keys evaluated per seed and suite. Besides the calibrator kinds
// these include the component-ablation variants and "proposed@na=<n>".
std::vector<std::string> method_keys(const ExperimentConfig& config);
std::string na_method(std::size_t n_aug);

// Paths inside a run directory.
struct RunLayout {
    fs::path root;

    fs::path config() const { return root / "config.json"; }
    fs::path manifest() const { return root / "manifest.json"; }
    fs::path data() const { return root / "data"; }
    fs::path seed_dir(std::uint64_t seed) const { return root / "seeds" / ("seed_" + std::to_string(seed)); }
    fs::path segnet(std::uint64_t seed) const { return seed_dir(seed) / "segnet"; }
    fs::path shape_prior(std::uint64_t seed) const { return seed_dir(seed) / "shapeprior"; }
    fs::path calibrator(std::uint64_t seed, const std::string& variant) const {
        return seed_dir(seed) / "calib" / variant;
    }
    fs::path global_ts(std::uint64_t seed) const { return seed_dir(seed) / "calib" / "global_ts.json"; }
    fs::path calibrated(std::uint64_t seed, const std::string& method, const std::string& suite) const {
        return seed_dir(seed) / "calibrated" / method / suite;
    }
    fs::path evaluation(std::uint64_t seed) const { return seed_dir(seed) / "eval"; }
    fs::path report() const { return root / "report"; }
};

// Stage bookkeeping in <run>/manifest.json: per stage key the input hash and
// the artifacts it produced (relative to the run root).
class StageManifest {
public:
    explicit StageManifest(fs::path root);

    bool up_to_date(const std::string& stage, const std::string& hash) const;
    void record(const std::string& stage, const std::string& hash, std::vector<std::string> artifacts);
    std::optional<std::string> hash_of(const std::string& stage) const;
    std::vector<std::string> artifacts() const;
    const nlohmann::json& json() const { return data_; }

private:
    void save() const;
    fs::path root_;
    nlohmann::json data_;
};

class Pipeline {
public:
    // Creates the run directory or reopens it. A run directory holding a
    // different config is rejected.
    Pipeline(const fs::path& run_dir, const ExperimentConfig& config);
    static Pipeline open(const fs::path& run_dir);

    void gen_data();
    void train_seg();
    void train_shape();
    void train_calib();
    void corrupt();
    void corrupt(const corruption::CorruptionSpec& spec);
    // Writes per-slice statistics (and figure maps) of every method for every suite.
    void calibrate();
    void calibrate(calib::CalibratorKind kind);
    void evaluate();
    void report();
    void run_all();

    // Stage keys recomputed by this object, in order; skipped stages are absent.
    const std::vector<std::string>& executed() const { return executed_; }
    const ExperimentConfig& config() const { return config_; }
    const RunLayout& layout() const { return layout_; }

    // Progress lines go here (default: none).
    std::function<void(const std::string&)> log;

private:
    void calibrate_methods(const std::vector<std::string>& methods);
    bool run_stage(const std::string& key, const nlohmann::json& inputs,
                   const std::function<std::vector<std::string>()>& body);
    std::string stage_hash(const std::string& key, const nlohmann::json& inputs) const;
    std::string require_stage(const std::string& stage, const std::string& needed) const;
    void say(const std::string& line) const;

    ExperimentConfig config_;
    RunLayout layout_;
    StageManifest manifest_;
    std::vector<std::string> executed_;
};

// Reads <run>/report/*.csv into rows of string cells (header first).
std::vector<std::vector<std::string>> read_csv(const fs::path& path);

}  // namespace oodcal::harness
