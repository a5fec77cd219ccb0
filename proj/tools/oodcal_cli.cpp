#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oodcal/config.hpp"
#include "oodcal/pipeline.hpp"

namespace fs = std::filesystem;
using namespace oodcal;

namespace {

struct Common {
    std::string run_dir;
    std::string config_path;
    std::string preset;
    std::vector<std::uint64_t> seeds;
    std::optional<std::size_t> image_size, cases, seg_epochs, shape_epochs, calib_epochs, n_aug, test_n_aug, num_bins;
    std::string import_dir;
    bool quiet = false;

    bool has_overrides() const {
        return !config_path.empty() || !preset.empty() || !seeds.empty() || image_size || cases || seg_epochs ||
               shape_epochs || calib_epochs || n_aug || test_n_aug || num_bins || !import_dir.empty();
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--run-dir", c.run_dir, "Run directory")->required();
    app->add_option("--config", c.config_path, "Experiment config JSON");
    app->add_option("--preset", c.preset, "Start from a preset config")->check(CLI::IsMember({"default", "smoke", "benchmark"}));
    app->add_option("--seeds", c.seeds, "Seed list");
    app->add_option("--image-size", c.image_size, "Phantom image size (M = N)");
    app->add_option("--cases", c.cases, "Number of phantom cases");
    app->add_option("--seg-epochs", c.seg_epochs, "Segmenter epochs");
    app->add_option("--shape-epochs", c.shape_epochs, "Shape prior epochs");
    app->add_option("--calib-epochs", c.calib_epochs, "Calibration network epochs");
    app->add_option("--n-aug", c.n_aug, "Augmentations per training iteration for (mu, var)");
    app->add_option("--test-n-aug", c.test_n_aug, "Augmentations at test time");
    app->add_option("--num-bins", c.num_bins, "Calibration bins");
    app->add_option("--import", c.import_dir, "Import cases in the core tensor layout instead of generating");
    app->add_flag("-q,--quiet", c.quiet, "No progress output");
}

harness::ExperimentConfig build_config(const Common& c) {
    harness::ExperimentConfig cfg;
    if (!c.config_path.empty()) {
        cfg = harness::load_config(c.config_path);
    } else if (c.preset == "smoke") {
        cfg = harness::ExperimentConfig::smoke();
    } else if (c.preset == "benchmark") {
        cfg = harness::ExperimentConfig::benchmark();
    }
    if (!c.seeds.empty()) cfg.seeds = c.seeds;
    if (c.image_size) {
        const auto seed = cfg.phantom.seed;
        cfg.phantom = phantom::PhantomConfig::for_size(*c.image_size);
        cfg.phantom.seed = seed;
    }
    if (c.cases) cfg.case_count = *c.cases;
    if (c.seg_epochs) cfg.seg_training.epochs = static_cast<int>(*c.seg_epochs);
    if (c.shape_epochs) cfg.shape_prior.epochs = static_cast<int>(*c.shape_epochs);
    if (c.calib_epochs) cfg.calib_training.epochs = static_cast<int>(*c.calib_epochs);
    if (c.n_aug) cfg.calib_training.n_aug = *c.n_aug;
    if (c.test_n_aug) cfg.test_n_aug = *c.test_n_aug;
    if (c.num_bins) cfg.num_bins = *c.num_bins;
    if (!c.import_dir.empty()) cfg.import_dir = c.import_dir;
    cfg.validate();
    return cfg;
}

harness::Pipeline make_pipeline(const Common& c) {
    const fs::path run = c.run_dir;
    harness::Pipeline p = (fs::exists(run / "config.json") && !c.has_overrides())
                              ? harness::Pipeline::open(run)
                              : harness::Pipeline(run, build_config(c));
    if (!c.quiet) p.log = [](const std::string& line) { std::cerr << line << '\n'; };
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-hoc calibration of segmentation networks under domain shift: data, training, evaluation."};
    app.require_subcommand(1);

    Common common;
    std::string kind, severity = "moderate", calibrator;
    std::uint64_t corruption_seed = 0;
    bool seed_given = false;

    struct Sub {
        const char* name;
        const char* help;
    };
    const std::vector<Sub> subs{{"gen-data", "Generate (or import) the dataset and splits"},
                                {"train-seg", "Train the segmentation network per seed"},
                                {"train-shape", "Train the shape prior per seed"},
                                {"train-calib", "Train the calibration networks and fit global TS per seed"},
                                {"corrupt", "Write corrupted copies of the test images"},
                                {"calibrate", "Apply calibrators to every test suite"},
                                {"evaluate", "Pooled ECE / SCE / Dice per method, suite and seed"},
                                {"report", "Tables, ablation CSVs and figures"},
                                {"run-all", "Every stage in order; completed stages are skipped"}};
    std::map<std::string, CLI::App*> apps;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, common);
        apps[s.name] = sub;
    }
    apps["corrupt"]->add_option("--kind", kind, "bias_field | motion | ghosting | spike (default: configured suites)");
    apps["corrupt"]->add_option("--severity", severity, "mild | moderate | severe");
    apps["corrupt"]->add_option("--seed", corruption_seed, "Corruption seed")->each([&](const std::string&) { seed_given = true; });
    apps["calibrate"]->add_option("--kind", calibrator, "proposed | lts | ts | alea | uc (default: all configured)");

    CLI11_PARSE(app, argc, argv);

    std::string stage;
    for (const auto& s : subs) {
        if (apps[s.name]->parsed()) stage = s.name;
    }
    try {
        auto pipeline = make_pipeline(common);
        if (stage == "gen-data") {
            pipeline.gen_data();
        } else if (stage == "train-seg") {
            pipeline.train_seg();
        } else if (stage == "train-shape") {
            pipeline.train_shape();
        } else if (stage == "train-calib") {
            pipeline.train_calib();
        } else if (stage == "corrupt") {
            if (kind.empty()) {
                pipeline.corrupt();
            } else {
                auto spec = corruption::CorruptionSpec::preset(corruption::parse_kind(kind),
                                                               corruption::parse_severity(severity),
                                                               seed_given ? corruption_seed : pipeline.config().corruption_seed);
                pipeline.corrupt(spec);
            }
        } else if (stage == "calibrate") {
            if (calibrator.empty()) {
                pipeline.calibrate();
            } else {
                pipeline.calibrate(calib::parse_calibrator(calibrator));
            }
        } else if (stage == "evaluate") {
            pipeline.evaluate();
        } else if (stage == "report") {
            pipeline.report();
        } else if (stage == "run-all") {
            pipeline.run_all();
        }
    } catch (const harness::StageError& e) {
        std::cerr << "oodcal " << stage << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "oodcal " << stage << ": [" << stage << "] " << e.what() << '\n';
        return 1;
    }
    return 0;
}
