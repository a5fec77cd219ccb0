#include "oodcal/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "oodcal/aleatoric.hpp"
#include "oodcal/metrics.hpp"
#include "oodcal/random.hpp"
#include "oodcal/report.hpp"
#include "oodcal/softmax.hpp"
#include "oodcal/tensor_io.hpp"

namespace oodcal::harness {

using nlohmann::json;

std::string na_method(std::size_t n_aug) { return "proposed@na=" + std::to_string(n_aug); }

namespace {

const char* const lts_variant = "lts";
const char* const proposed_variant = "proposed";
const char* const susceptibility_variant = "susceptibility-only";
const char* const shape_variant = "shape-only";

bool is_na_method(const std::string& m) { return m.rfind("proposed@na=", 0) == 0; }

std::size_t na_of(const std::string& m) { return std::stoul(m.substr(std::string("proposed@na=").size())); }

std::vector<calib::CalibNetConfig> calib_variants(const ExperimentConfig& c, std::uint64_t seed) {
    calib::CalibNetConfig base = c.calibnet;
    base.seed = derive_seed(seed, "calibnet-init", c.calibnet.seed);
    std::vector<calib::CalibNetConfig> v{base.lts(), base};
    if (c.component_ablation) {
        auto sus = base, shape = base;
        sus.use_shape = false;
        shape.use_susceptibility = false;
        v.push_back(sus);
        v.push_back(shape);
    }
    return v;
}

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string seed_key(const std::string& stage, std::uint64_t seed) { return stage + "/seed_" + std::to_string(seed); }

std::string run_path(const fs::path& p, const fs::path& root) { return fs::relative(p, root).generic_string(); }

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(bool(in), "missing " + path.string());
    return json::parse(in);
}

}  // namespace

std::vector<std::string> method_keys(const ExperimentConfig& config) {
    std::vector<std::string> m;
    for (auto k : config.calibrators) m.push_back(calib::to_string(k));
    const bool proposed = std::count(config.calibrators.begin(), config.calibrators.end(),
                                     calib::CalibratorKind::proposed) > 0;
    if (proposed && config.component_ablation) {
        if (!std::count(m.begin(), m.end(), "lts")) m.push_back("lts");
        m.push_back(susceptibility_variant);
        m.push_back(shape_variant);
    }
    if (proposed) {
        for (std::size_t n : config.na_ablation) m.push_back(na_method(n));
    }
    return m;
}

StageManifest::StageManifest(fs::path root) : root_(std::move(root)) {
    const fs::path p = root_ / "manifest.json";
    if (fs::exists(p)) {
        data_ = read_json(p);
    } else {
        data_ = {{"version", "oodcal-run-1"}, {"stages", json::object()}};
    }
}

bool StageManifest::up_to_date(const std::string& stage, const std::string& hash) const {
    const auto& stages = data_.at("stages");
    auto it = stages.find(stage);
    if (it == stages.end() || it->at("hash") != hash) return false;
    for (const auto& a : it->at("artifacts")) {
        if (!fs::exists(root_ / a.get<std::string>())) return false;
    }
    return true;
}

void StageManifest::record(const std::string& stage, const std::string& hash, std::vector<std::string> artifacts) {
    data_["stages"][stage] = {{"hash", hash}, {"artifacts", std::move(artifacts)}};
    save();
}

std::optional<std::string> StageManifest::hash_of(const std::string& stage) const {
    const auto& stages = data_.at("stages");
    auto it = stages.find(stage);
    if (it == stages.end()) return std::nullopt;
    return it->at("hash").get<std::string>();
}

std::vector<std::string> StageManifest::artifacts() const {
    std::vector<std::string> out;
    for (const auto& [key, s] : data_.at("stages").items()) {
        for (const auto& a : s.at("artifacts")) out.push_back(a.get<std::string>());
    }
    return out;
}

void StageManifest::save() const {
    fs::create_directories(root_);
    const fs::path tmp = root_ / "manifest.json.tmp";
    std::ofstream(tmp) << data_.dump(2) << '\n';
    fs::rename(tmp, root_ / "manifest.json");
}

Pipeline::Pipeline(const fs::path& run_dir, const ExperimentConfig& config)
    : config_(config), layout_{run_dir}, manifest_(run_dir) {
    config_.validate();
    if (fs::exists(layout_.config())) {
        const ExperimentConfig existing = load_config(layout_.config());
        require(json(existing).dump() == json(config_).dump(),
                "run directory " + run_dir.string() + " already holds a different config; use a new directory");
    } else {
        save_config(layout_.config(), config_);
    }
}

Pipeline Pipeline::open(const fs::path& run_dir) {
    require(fs::exists(run_dir / "config.json"), "no run at " + run_dir.string() + " (missing config.json)");
    return Pipeline(run_dir, load_config(run_dir / "config.json"));
}

void Pipeline::say(const std::string& line) const {
    if (log) log(line);
}

std::string Pipeline::stage_hash(const std::string& key, const json& inputs) const {
    return hex(fnv1a(key + "\n" + inputs.dump()));
}

std::string Pipeline::require_stage(const std::string& stage, const std::string& needed) const {
    auto h = manifest_.hash_of(needed);
    if (!h) throw StageError(stage, "requires stage '" + needed + "', which has not completed");
    return *h;
}

bool Pipeline::run_stage(const std::string& key, const json& inputs,
                         const std::function<std::vector<std::string>()>& body) {
    const std::string hash = stage_hash(key, inputs);
    if (manifest_.up_to_date(key, hash)) {
        say(key + ": up to date");
        return false;
    }
    say(key + ": running");
    std::vector<std::string> artifacts;
    try {
        artifacts = body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(key, e.what());
    }
    manifest_.record(key, hash, std::move(artifacts));
    executed_.push_back(key);
    return true;
}

namespace {

std::vector<LabeledSlice> load_cases(const fs::path& data, const std::vector<std::string>& ids,
                                     const std::string& subdir = "image") {
    std::vector<LabeledSlice> out;
    for (const auto& id : ids) {
        for (auto& s : read_case(data, id, subdir)) out.push_back(std::move(s));
    }
    return out;
}

std::string subdir_for(const std::string& suite) { return suite == "clean" ? "image" : "image." + suite; }

std::uint64_t slice_seed(std::uint64_t parent, const ImageSlice& x) {
    return derive_seed(parent, x.case_id(), static_cast<std::uint64_t>(x.slice_index()));
}

}  // namespace

void Pipeline::gen_data() {
    const json inputs = {{"phantom", config_.phantom},       {"case_count", config_.case_count},
                         {"split_ratios", config_.split_ratios}, {"data_seed", config_.data_seed},
                         {"import_dir", config_.import_dir}};
    run_stage("gen-data", inputs, [&] {
        const fs::path data = layout_.data();
        fs::remove_all(data);
        fs::create_directories(data);
        std::vector<std::string> ids;
        if (config_.import_dir.empty()) {
            phantom::write_dataset(data, config_.phantom, config_.case_count, config_.split_ratios, config_.data_seed);
            for (std::size_t i = 0; i < config_.case_count; ++i) ids.push_back(phantom::case_name(i));
        } else {
            // External slices already in the core layout: validate, copy, split.
            const fs::path src = config_.import_dir;
            require(fs::is_directory(src), "import directory " + src.string() + " does not exist");
            for (const auto& e : fs::directory_iterator(src)) {
                if (e.is_directory() && fs::is_directory(e.path() / "image") && fs::is_directory(e.path() / "label")) {
                    ids.push_back(e.path().filename().string());
                }
            }
            std::sort(ids.begin(), ids.end());
            require(!ids.empty(), "import directory holds no cases");
            for (const auto& id : ids) {
                auto slices = read_case(src, id);
                for (auto& [x, y] : slices) {
                    x = x.with_data(normalize_minmax(x.data()));
                    require(y.classes() == config_.segmenter.classes, "imported case " + id + ": class count differs");
                    require(x.height() == config_.phantom.image_size && x.width() == config_.phantom.image_size,
                            "imported case " + id + ": slice size differs from phantom.image_size");
                }
                write_case(data, id, slices);
            }
            const DatasetSplit split = phantom::make_splits(ids, config_.split_ratios, config_.data_seed);
            json m = {{"cases", ids},
                      {"source", src.string()},
                      {"splits",
                       {{to_string(SplitRole::segmentation_train), split.train},
                        {to_string(SplitRole::calibration_train), split.validation},
                        {to_string(SplitRole::intra_domain_test), split.test}}}};
            write_json(data / "manifest.json", m);
        }
        std::vector<std::string> artifacts{run_path(data / "manifest.json", layout_.root)};
        for (const auto& id : ids) artifacts.push_back(run_path(data / id, layout_.root));
        return artifacts;
    });
}

void Pipeline::train_seg() {
    const std::string data_hash = require_stage("train-seg", "gen-data");
    for (std::uint64_t seed : config_.seeds) {
        const std::string key = seed_key("train-seg", seed);
        const json inputs = {{"data", data_hash},
                             {"augmentation", config_.augmentation},
                             {"segmenter", config_.segmenter},
                             {"training", config_.seg_training},
                             {"seed", seed}};
        run_stage(key, inputs, [&] {
            const DatasetSplit split = phantom::read_manifest_split(layout_.data());
            const auto train = load_cases(layout_.data(), split.train);
            const auto val = load_cases(layout_.data(), split.validation);
            segnet::SegModelConfig mc = config_.segmenter;
            mc.seed = derive_seed(seed, "segnet-init", config_.segmenter.seed);
            segnet::SegTrainConfig tc = config_.seg_training;
            tc.seed = derive_seed(seed, "segnet-train", config_.seg_training.seed);
            auto result = segnet::train_segmenter(train, val, config_.augmentation, mc, tc);
            const fs::path dir = layout_.segnet(seed);
            fs::remove_all(dir);
            result.model.save(dir);
            write_json(dir / "log.json", json{{"log", result.log}, {"version", segnet::checkpoint_version},
                                              {"hash", hex(result.model.hash())}});
            return std::vector<std::string>{run_path(dir, layout_.root)};
        });
    }
}

void Pipeline::train_shape() {
    for (std::uint64_t seed : config_.seeds) {
        const std::string seg_hash = require_stage("train-shape", seed_key("train-seg", seed));
        const json inputs = {{"segnet", seg_hash}, {"shape_prior", config_.shape_prior}, {"seed", seed}};
        run_stage(seed_key("train-shape", seed), inputs, [&] {
            const DatasetSplit split = phantom::read_manifest_split(layout_.data());
            const auto val = load_cases(layout_.data(), split.validation);
            const auto seg = segnet::SegNet::load(layout_.segnet(seed));
            shapeprior::ShapePriorConfig sc = config_.shape_prior;
            sc.seed = derive_seed(seed, "shapeprior", config_.shape_prior.seed);
            auto result = shapeprior::train_shape_prior(seg, val, sc);
            const fs::path dir = layout_.shape_prior(seed);
            fs::remove_all(dir);
            result.model.save(dir);
            write_json(dir / "log.json", json{{"loss", result.loss}, {"hash", hex(result.model.hash())}});
            return std::vector<std::string>{run_path(dir, layout_.root)};
        });
    }
}

void Pipeline::train_calib() {
    for (std::uint64_t seed : config_.seeds) {
        const std::string shape_hash = require_stage("train-calib", seed_key("train-shape", seed));
        const json inputs = {{"shape", shape_hash},
                             {"calibnet", config_.calibnet},
                             {"training", config_.calib_training},
                             {"augmentation", config_.augmentation},
                             {"component_ablation", config_.component_ablation},
                             {"seed", seed}};
        run_stage(seed_key("train-calib", seed), inputs, [&] {
            const DatasetSplit split = phantom::read_manifest_split(layout_.data());
            const auto val = load_cases(layout_.data(), split.validation);
            const auto seg = segnet::SegNet::load(layout_.segnet(seed));
            const auto prior = shapeprior::ShapePrior::load(layout_.shape_prior(seed));
            const auto variants = calib_variants(config_, seed);
            calib::CalibTrainConfig tc = config_.calib_training;
            tc.seed = derive_seed(seed, "calib-train", config_.calib_training.seed);
            auto result =
                calib::train_calibrators(variants, seg, &prior, val, config_.augmentation, tc);
            fs::remove_all(layout_.seed_dir(seed) / "calib");
            std::vector<std::string> artifacts;
            for (std::size_t v = 0; v < variants.size(); ++v) {
                const fs::path dir = layout_.calibrator(seed, variants[v].variant_name());
                result.models[v].save(dir);
                write_json(dir / "log.json", json{{"loss", result.loss[v]}});
                artifacts.push_back(run_path(dir, layout_.root));
            }
            const double t = calib::fit_global_ts(seg, val);
            write_json(layout_.global_ts(seed), json{{"temperature", t}});
            artifacts.push_back(run_path(layout_.global_ts(seed), layout_.root));
            return artifacts;
        });
    }
}

void Pipeline::corrupt(const corruption::CorruptionSpec& spec) {
    const std::string data_hash = require_stage("corrupt", "gen-data");
    const std::string tag = spec.tag();
    require(spec.kind != corruption::Kind::identity, "corrupt: 'clean' needs no corrupted copy");
    const json inputs = {{"data", data_hash},
                         {"tag", tag},
                         {"seed", spec.seed},
                         {"bias", {spec.bias.order, spec.bias.coeff_range}},
                         {"ghosting", {spec.ghosting.num_ghosts, spec.ghosting.axis, spec.ghosting.intensity}},
                         {"spike", {spec.spike.intensity, spec.spike.position.has_value()}},
                         {"motion", {spec.motion.num_movements, spec.motion.max_rotation_deg, spec.motion.max_shift}}};
    run_stage("corrupt/" + tag, inputs, [&] {
        const DatasetSplit split = phantom::read_manifest_split(layout_.data());
        std::vector<std::string> artifacts;
        for (const auto& id : split.test) {
            const fs::path dir = layout_.data() / id / ("image." + tag);
            fs::remove_all(dir);
            for (const auto& [x, y] : read_case(layout_.data(), id)) {
                corruption::CorruptionSpec s = spec;
                s.seed = slice_seed(spec.seed, x);
                write_tensor(dir / slice_dir_name(x.slice_index()), corruption::apply(x, s).data());
            }
            artifacts.push_back(run_path(dir, layout_.root));
        }
        return artifacts;
    });
}

void Pipeline::corrupt() {
    for (const auto& spec : config_.corrupted_suites()) corrupt(spec);
}

void Pipeline::calibrate() { calibrate_methods(method_keys(config_)); }

void Pipeline::calibrate(calib::CalibratorKind kind) {
    const std::string name = calib::to_string(kind);
    std::vector<std::string> methods;
    for (const auto& m : method_keys(config_)) {
        const bool extra = m == susceptibility_variant || m == shape_variant || is_na_method(m);
        if (m == name || (kind == calib::CalibratorKind::proposed && extra)) methods.push_back(m);
    }
    require(!methods.empty(), "calibrate: kind '" + name + "' is not in the config's calibrator list");
    calibrate_methods(methods);
}

void Pipeline::calibrate_methods(const std::vector<std::string>& methods) {
    const auto suites = config_.suite_tags();
    json corrupt_hashes = json::object();
    for (const auto& tag : suites) {
        if (tag != "clean") corrupt_hashes[tag] = require_stage("calibrate", "corrupt/" + tag);
    }
    for (std::uint64_t seed : config_.seeds) {
        const std::string calib_hash = require_stage("calibrate", seed_key("train-calib", seed));
        std::vector<std::string> stale;
        std::map<std::string, std::string> hashes;
        for (const auto& m : methods) {
            const std::string key = seed_key("calibrate", seed) + "/" + m;
            const json inputs = {{"calib", calib_hash},        {"corrupt", corrupt_hashes},
                                 {"suites", suites},           {"test_n_aug", config_.test_n_aug},
                                 {"num_bins", config_.num_bins}, {"roi_kernel", config_.roi_kernel},
                                 {"figure_slices", config_.figure_slices}, {"augmentation", config_.augmentation}};
            hashes[m] = stage_hash(key, inputs);
            if (manifest_.up_to_date(key, hashes[m])) {
                say(key + ": up to date");
            } else {
                stale.push_back(m);
            }
        }
        if (stale.empty()) continue;
        const std::string stage = seed_key("calibrate", seed);
        say(stage + ": running " + std::to_string(stale.size()) + " methods");
        try {
            const DatasetSplit split = phantom::read_manifest_split(layout_.data());
            const auto seg = segnet::SegNet::load(layout_.segnet(seed));
            const auto prior = shapeprior::ShapePrior::load(layout_.shape_prior(seed));
            std::map<std::string, calib::Calibrator> nets;
            for (const auto& v : calib_variants(config_, seed)) {
                nets[v.variant_name()] = calib::Calibrator::load(layout_.calibrator(seed, v.variant_name()));
            }
            const double ts = read_json(layout_.global_ts(seed)).at("temperature").get<double>();
            const auto policy = config_.augmentation.photometric_only();
            const metrics::BinningConfig bins{config_.num_bins};

            std::size_t draws = 0;
            bool need_shape = false;
            for (const auto& m : stale) {
                if (m == "alea" || m == proposed_variant || m == susceptibility_variant) {
                    draws = std::max(draws, config_.test_n_aug);
                }
                if (is_na_method(m)) draws = std::max(draws, na_of(m));
                need_shape |= m == proposed_variant || m == shape_variant || is_na_method(m);
            }

            for (const auto& suite : suites) {
                const auto slices = load_cases(layout_.data(), split.test, subdir_for(suite));
                std::map<std::string, std::vector<double>> rows;
                json slice_ids = json::array();
                for (std::size_t si = 0; si < slices.size(); ++si) {
                    const auto& [x, y] = slices[si];
                    slice_ids.push_back({{"case", x.case_id()}, {"slice", x.slice_index()}});
                    const LogitMap z = seg.forward(x);
                    const ProbabilityMap pu = softmax(z);
                    const auto reference = argmax_labels(pu);
                    const auto roi = metrics::dilated_roi(y, config_.roi_kernel);
                    std::vector<LogitMap> augmented;
                    if (draws > 0) {
                        augmented = aleatoric::augmented_logits(seg, x, policy, draws,
                                                                slice_seed(derive_seed(seed, "test-augment"), x));
                    }
                    std::optional<shapeprior::ShapeResidual> residual;
                    if (need_shape) residual = shapeprior::shape_residual(prior, z).residual;
                    std::optional<aleatoric::SusceptibilityEstimate> sus;
                    if (draws >= config_.test_n_aug && draws > 0) sus = aleatoric::summarize(augmented, config_.test_n_aug);
                    const bool figure = si < config_.figure_slices;

                    for (const auto& m : stale) {
                        std::optional<TemperatureMap> temperature;
                        auto run_net = [&](const std::string& variant, const aleatoric::SusceptibilityEstimate* e) {
                            const auto& net = nets.at(variant);
                            const auto in = calib::make_inputs(net.config(), z, x, e, residual ? &*residual : nullptr);
                            auto out = calib::calibrate(net.net(), in);
                            temperature = std::move(out.temperature);
                            return std::move(out.probability);
                        };
                        ProbabilityMap p;
                        if (m == "uncalibrated") {
                            p = pu;
                        } else if (m == "global_ts") {
                            p = softmax_scaled(z, ts);
                        } else if (m == "alea") {
                            p = aleatoric::mean_softmax(augmented, config_.test_n_aug);
                        } else if (m == lts_variant || m == shape_variant) {
                            p = run_net(m, nullptr);
                        } else if (m == proposed_variant || m == susceptibility_variant) {
                            p = run_net(m, &*sus);
                        } else if (is_na_method(m)) {
                            const auto e = aleatoric::summarize(augmented, na_of(m));
                            p = run_net(proposed_variant, &e);
                        } else {
                            throw Error("unknown method " + m);
                        }
                        auto row = metrics::slice_stats(p, y, roi, bins).flatten();
                        const auto pred = argmax_labels(p);
                        double changed = 0.0;
                        for (std::size_t i = 0; i < pred.size(); ++i) changed += pred[i] != reference[i];
                        row.push_back(changed);
                        auto& r = rows[m];
                        r.insert(r.end(), row.begin(), row.end());
                        if (figure && !is_na_method(m)) {
                            const fs::path maps = layout_.calibrated(seed, m, suite) / "maps" /
                                                  (x.case_id() + "_" + slice_dir_name(x.slice_index()));
                            write_tensor(maps / "probability", p.data().cast<float>());
                            if (temperature) write_tensor(maps / "temperature", temperature->data());
                        }
                    }
                }
                const std::size_t width = metrics::SliceStats::flat_size(config_.segmenter.classes, bins.num_bins) + 1;
                for (const auto& m : stale) {
                    const fs::path dir = layout_.calibrated(seed, m, suite);
                    write_tensor(dir / "stats", TensorD({slices.size(), width}, rows[m]));
                    write_json(dir / "slices.json", slice_ids);
                }
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
        for (const auto& m : stale) {
            const std::string key = seed_key("calibrate", seed) + "/" + m;
            std::vector<std::string> artifacts;
            for (const auto& suite : suites) artifacts.push_back(run_path(layout_.calibrated(seed, m, suite), layout_.root));
            manifest_.record(key, hashes[m], artifacts);
            executed_.push_back(key);
        }
    }
}

void Pipeline::evaluate() {
    const auto methods = method_keys(config_);
    const auto suites = config_.suite_tags();
    json inputs = json::object();
    for (std::uint64_t seed : config_.seeds) {
        for (const auto& m : methods) {
            const std::string key = seed_key("calibrate", seed) + "/" + m;
            inputs[key] = require_stage("evaluate", key);
        }
    }
    run_stage("evaluate", inputs, [&] {
        std::vector<std::string> artifacts;
        const std::size_t classes = config_.segmenter.classes, nb = config_.num_bins;
        const std::size_t width = metrics::SliceStats::flat_size(classes, nb);
        for (std::uint64_t seed : config_.seeds) {
            const fs::path out = layout_.evaluation(seed);
            fs::remove_all(out);
            std::ostringstream per_slice;
            per_slice << "seed,method,suite,case,slice,roi_pixels,ece,sce,dice_fg\n";
            for (const auto& m : methods) {
                for (const auto& suite : suites) {
                    const fs::path dir = layout_.calibrated(seed, m, suite);
                    const TensorD stats = read_tensor<double>(dir / "stats");
                    const json ids = read_json(dir / "slices.json");
                    require(stats.rank() == 2 && stats.shape()[1] == width + 1 && stats.shape()[0] == ids.size(),
                            "statistics in " + dir.string() + " do not match the config");
                    metrics::CalibrationAccumulator acc(classes, {nb});
                    double changed = 0.0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        const std::span<const double> row = stats.values().subspan(i * (width + 1), width);
                        const auto s = metrics::SliceStats::unflatten(row, classes, nb);
                        acc.add(s);
                        changed += stats.values()[i * (width + 1) + width];
                        per_slice << seed << ',' << m << ',' << suite << ',' << ids[i]["case"].get<std::string>() << ','
                                  << ids[i]["slice"].get<int>() << ',' << s.roi_pixels << ','
                                  << report::fixed(s.roi_pixels ? s.ece() : 0.0) << ','
                                  << report::fixed(s.roi_pixels ? s.sce() : 0.0) << ','
                                  << report::fixed(metrics::mean_foreground(s.dice())) << '\n';
                    }
                    const auto r = metrics::make_report(acc, m, suite, seed, nb);
                    json j = r;
                    j["argmax_changed_pixels"] = changed;
                    j["slices"] = ids.size();
                    const fs::path file = out / m / (suite + ".json");
                    write_json(file, j);
                    artifacts.push_back(run_path(file, layout_.root));
                }
            }
            std::ofstream(out / "per_slice.csv") << per_slice.str();
            artifacts.push_back(run_path(out / "per_slice.csv", layout_.root));
        }
        return artifacts;
    });
}

void Pipeline::report() {
    const std::string eval_hash = require_stage("report", "evaluate");
    run_stage("report", json{{"evaluate", eval_hash}}, [&] { return report::write_report(config_, layout_); });
}

void Pipeline::run_all() {
    gen_data();
    train_seg();
    train_shape();
    train_calib();
    corrupt();
    calibrate();
    evaluate();
    report();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    require(bool(in), "missing " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace oodcal::harness
