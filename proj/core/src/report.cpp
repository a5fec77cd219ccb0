#include "oodcal/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oodcal/image_write.hpp"
#include "oodcal/metrics.hpp"
#include "oodcal/softmax.hpp"
#include "oodcal/tensor_io.hpp"

namespace oodcal::report {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

MeanStd mean_std(const std::vector<double>& v) {
    require(!v.empty(), "mean_std: no values");
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

namespace {

struct Eval {
    metrics::CalibrationReport report;
    double changed = 0.0;
};

std::string rel(const fs::path& p, const fs::path& root) { return fs::relative(p, root).generic_string(); }

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << text;
}

}  // namespace

std::vector<std::string> write_report(const harness::ExperimentConfig& config, const harness::RunLayout& layout) {
    const auto methods = harness::method_keys(config);
    const auto suites = config.suite_tags();

    std::vector<std::string> missing;
    for (std::uint64_t seed : config.seeds) {
        for (const auto& m : methods) {
            for (const auto& s : suites) {
                const fs::path f = layout.evaluation(seed) / m / (s + ".json");
                if (!fs::exists(f)) missing.push_back(rel(f, layout.root));
            }
        }
        if (!fs::exists(layout.evaluation(seed) / "per_slice.csv")) {
            missing.push_back(rel(layout.evaluation(seed) / "per_slice.csv", layout.root));
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing evaluation artifacts:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw Error(msg);
    }

    // evals[method][suite][seed index]
    std::map<std::string, std::map<std::string, std::vector<Eval>>> evals;
    for (std::uint64_t seed : config.seeds) {
        for (const auto& m : methods) {
            for (const auto& s : suites) {
                std::ifstream in(layout.evaluation(seed) / m / (s + ".json"));
                const json j = json::parse(in);
                evals[m][s].push_back({j.get<metrics::CalibrationReport>(), j.at("argmax_changed_pixels").get<double>()});
            }
        }
    }
    const fs::path out = layout.report();
    fs::remove_all(out);
    fs::create_directories(out);
    std::vector<std::string> artifacts;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(out / name, text);
        artifacts.push_back(rel(out / name, layout.root));
    };

    auto column = [&](const std::string& m, const std::string& s, auto field) {
        std::vector<double> v;
        for (const auto& e : evals.at(m).at(s)) v.push_back(field(e));
        return mean_std(v);
    };
    auto ece_of = [](const Eval& e) { return e.report.ece; };
    auto sce_of = [](const Eval& e) { return e.report.sce; };
    auto dice_of = [](const Eval& e) { return metrics::mean_foreground(e.report.dice); };

    {
        std::ostringstream t;
        t << "calibrator,suite,ece_mean,ece_std,sce_mean,sce_std,dice_mean,dice_std,argmax_changed_pixels,seeds\n";
        for (auto kind : config.calibrators) {
            const std::string m = calib::to_string(kind);
            for (const auto& s : suites) {
                const auto e = column(m, s, ece_of), c = column(m, s, sce_of), d = column(m, s, dice_of);
                double changed = 0.0;
                for (const auto& ev : evals.at(m).at(s)) changed += ev.changed;
                t << m << ',' << s << ',' << fixed(e.mean) << ',' << fixed(e.std) << ',' << fixed(c.mean) << ','
                  << fixed(c.std) << ',' << fixed(d.mean) << ',' << fixed(d.std) << ','
                  << static_cast<long long>(changed) << ',' << config.seeds.size() << '\n';
            }
        }
        emit("table1.csv", t.str());
    }

    {
        std::ostringstream t;
        t << "calibrator,suite,seed,ece,sce,dice,argmax_changed_pixels\n";
        for (const auto& m : methods) {
            for (const auto& s : suites) {
                for (std::size_t k = 0; k < config.seeds.size(); ++k) {
                    const auto& e = evals.at(m).at(s)[k];
                    t << m << ',' << s << ',' << config.seeds[k] << ',' << fixed(e.report.ece) << ','
                      << fixed(e.report.sce) << ',' << fixed(dice_of(e)) << ',' << static_cast<long long>(e.changed)
                      << '\n';
                }
            }
        }
        emit("per_seed.csv", t.str());
    }

    // Mean over corrupted suites per seed, then mean/std over seeds.
    auto corrupted_mean = [&](const std::string& m, auto field) {
        std::vector<double> per_seed;
        for (std::size_t k = 0; k < config.seeds.size(); ++k) {
            double acc = 0.0;
            std::size_t n = 0;
            for (const auto& s : suites) {
                if (s == "clean") continue;
                acc += field(evals.at(m).at(s)[k]);
                ++n;
            }
            per_seed.push_back(n ? acc / static_cast<double>(n) : 0.0);
        }
        return mean_std(per_seed);
    };

    if (evals.count("susceptibility-only")) {
        std::ostringstream t;
        t << "variant,susceptibility,shape,ece_mean,ece_std,sce_mean,sce_std\n";
        const std::vector<std::tuple<std::string, int, int>> rows{
            {"lts", 0, 0}, {"susceptibility-only", 1, 0}, {"shape-only", 0, 1}, {"proposed", 1, 1}};
        for (const auto& [m, a, b] : rows) {
            const auto e = corrupted_mean(m, ece_of), c = corrupted_mean(m, sce_of);
            t << m << ',' << a << ',' << b << ',' << fixed(e.mean) << ',' << fixed(e.std) << ',' << fixed(c.mean) << ','
              << fixed(c.std) << '\n';
        }
        emit("ablation_components.csv", t.str());
    }

    if (!config.na_ablation.empty() && evals.count(harness::na_method(config.na_ablation.front()))) {
        std::ostringstream t;
        t << "n_aug,ece_mean,ece_std,sce_mean,sce_std\n";
        for (std::size_t n : config.na_ablation) {
            const std::string m = harness::na_method(n);
            const auto e = corrupted_mean(m, ece_of), c = corrupted_mean(m, sce_of);
            t << n << ',' << fixed(e.mean) << ',' << fixed(e.std) << ',' << fixed(c.mean) << ',' << fixed(c.std) << '\n';
        }
        emit("ablation_na.csv", t.str());
    }

    {
        std::ostringstream t;
        bool header = false;
        for (std::uint64_t seed : config.seeds) {
            std::ifstream in(layout.evaluation(seed) / "per_slice.csv");
            std::string line;
            bool first = true;
            while (std::getline(in, line)) {
                if (first) {
                    first = false;
                    if (header) continue;
                    header = true;
                }
                t << line << '\n';
            }
        }
        emit("per_slice.csv", t.str());
    }

    // Reliability and histogram data pooled over seeds.
    std::map<std::string, std::map<std::string, std::vector<metrics::BinRecord>>> pooled;
    {
        std::ostringstream rel_csv, hist_csv;
        rel_csv << "method,suite,bin,lower,upper,mean_confidence,accuracy,count\n";
        hist_csv << "method,suite,bin,lower,upper,count\n";
        const metrics::BinningConfig bins{config.num_bins};
        for (const auto& m : methods) {
            for (const auto& s : suites) {
                std::vector<metrics::BinRecord> total(config.num_bins);
                for (const auto& e : evals.at(m).at(s)) {
                    for (std::size_t k = 0; k < total.size(); ++k) {
                        total[k].confidence_sum += e.report.bins[k].confidence_sum;
                        total[k].correct_sum += e.report.bins[k].correct_sum;
                        total[k].count += e.report.bins[k].count;
                    }
                }
                for (std::size_t k = 0; k < total.size(); ++k) {
                    rel_csv << m << ',' << s << ',' << k + 1 << ',' << fixed(bins.edge(k)) << ',' << fixed(bins.edge(k + 1))
                            << ',' << fixed(total[k].mean_confidence()) << ',' << fixed(total[k].accuracy()) << ','
                            << total[k].count << '\n';
                    hist_csv << m << ',' << s << ',' << k + 1 << ',' << fixed(bins.edge(k)) << ','
                             << fixed(bins.edge(k + 1)) << ',' << total[k].count << '\n';
                }
                pooled[m][s] = std::move(total);
            }
        }
        emit("reliability.csv", rel_csv.str());
        emit("histogram.csv", hist_csv.str());
    }

    // Figure panels: first seed, the stored example slices of every suite.
    const fs::path fig = out / "figures";
    const std::uint64_t seed = config.seeds.front();
    for (const auto& m : methods) {
        if (m.rfind("proposed@", 0) == 0) continue;
        for (const auto& s : suites) {
            const auto& b = pooled.at(m).at(s);
            const fs::path r = fig / ("reliability_" + m + "_" + s + ".ppm");
            image::write_ppm(r, image::reliability_diagram(b));
            std::vector<std::size_t> counts;
            for (const auto& rec : b) counts.push_back(rec.count);
            const fs::path h = fig / ("histogram_" + m + "_" + s + ".ppm");
            image::write_ppm(h, image::histogram_chart(counts));
            artifacts.push_back(rel(r, layout.root));
            artifacts.push_back(rel(h, layout.root));

            const fs::path maps = layout.calibrated(seed, m, s) / "maps";
            if (!fs::is_directory(maps)) continue;
            std::vector<fs::path> examples;
            for (const auto& e : fs::directory_iterator(maps)) examples.push_back(e.path());
            std::sort(examples.begin(), examples.end());
            for (const auto& ex : examples) {
                const std::string stem = s + "_" + ex.filename().string();
                const TensorD p = read_tensor<double>(ex / "probability");
                const ProbabilityMap pm(p);
                const TensorD ent = metrics::entropy_map(pm);
                const fs::path ef = fig / ("entropy_" + m + "_" + stem + ".ppm");
                image::write_ppm(ef, image::heatmap(ent.values(), ent.height(), ent.width(), 0.0,
                                                      std::log(static_cast<double>(p.channels()))));
                artifacts.push_back(rel(ef, layout.root));
                if (fs::exists(ex / "temperature")) {
                    const TensorD t = read_tensor<double>(ex / "temperature");
                    const fs::path tf = fig / ("temperature_" + m + "_" + stem + ".ppm");
                    image::write_ppm(tf, image::heatmap(t.values(), t.height(), t.width(), 0.0, 3.0));
                    artifacts.push_back(rel(tf, layout.root));
                }
                if (m == "uncalibrated") {
                    const auto pred = argmax_labels(pm);
                    const fs::path pf = fig / ("prediction_" + stem + ".ppm");
                    image::write_ppm(pf, image::label_image(pred, p.height(), p.width()));
                    artifacts.push_back(rel(pf, layout.root));
                }
            }
        }
    }
    return artifacts;
}

}  // namespace oodcal::report
