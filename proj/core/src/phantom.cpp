#include "oodcal/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "oodcal/json_util.hpp"
#include "oodcal/random.hpp"
#include "oodcal/tensor_io.hpp"

namespace oodcal::phantom {

namespace {

constexpr int kMaxGeometryAttempts = 100;

double sample(Rng& rng, const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a < 0) a += two_pi;
    return a - std::numbers::pi;
}

struct Geometry {
    double cx = 0, cy = 0;
    double lv_radius = 0;
    double myo_thickness = 0;
    double rv_gap = 0;
    double rv_thickness = 0;
    double rv_extent = 0;
    double rv_direction = 0;

    double outer_radius() const { return lv_radius + myo_thickness + rv_gap + rv_thickness; }

    Geometry scaled(double s) const {
        Geometry g = *this;
        g.lv_radius *= s;
        g.myo_thickness *= s;
        g.rv_gap *= s;
        g.rv_thickness *= s;
        return g;
    }

    std::uint8_t classify(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double d = std::hypot(dx, dy);
        if (d < lv_radius) return left_ventricle;
        const double myo_outer = lv_radius + myo_thickness;
        if (d < myo_outer) return myocardium;
        if (rv_extent > 0.0 && rv_thickness > 0.0) {
            const double delta = wrap_angle(std::atan2(dy, dx) - rv_direction);
            const double half = 0.5 * rv_extent;
            if (std::abs(delta) < half) {
                // Crescent: radial thickness tapers to zero at both tips.
                const double profile = std::sqrt(std::cos(0.5 * std::numbers::pi * delta / half));
                const double inner = myo_outer + rv_gap;
                if (d >= inner && d < inner + rv_thickness * profile) return right_ventricle;
            }
        }
        return background;
    }
};

struct Blob {
    double x, y, r, intensity;
};

Range scale_range(const Range& r, double s) { return {r.lo * s, r.hi * s}; }

}  // namespace

PhantomConfig PhantomConfig::for_size(std::size_t size) {
    PhantomConfig c;
    const double s = static_cast<double>(size) / 128.0;
    c.image_size = size;
    c.lv_radius = scale_range(c.lv_radius, s);
    c.myo_thickness = scale_range(c.myo_thickness, s);
    c.rv_thickness = scale_range(c.rv_thickness, s);
    c.rv_gap = scale_range(c.rv_gap, s);
    c.center_jitter *= s;
    c.distractor_radius = scale_range(c.distractor_radius, s);
    return c;
}

void PhantomConfig::validate() const {
    require(image_size >= 8, "PhantomConfig: image_size must be at least 8");
    require(classes == class_count, "PhantomConfig: the phantom has exactly 4 classes");
    require(slices_per_case >= 1, "PhantomConfig: slices_per_case must be >= 1");
    for (const Range* r : {&lv_radius, &myo_thickness, &rv_thickness, &rv_gap, &rv_extent, &rv_direction,
                           &distractor_radius, &distractor_intensity}) {
        require(r->valid(), "PhantomConfig: empty range");
    }
    require(lv_radius.lo > 0.0, "PhantomConfig: LV radius must be positive");
    require(myo_thickness.lo > 0.0, "PhantomConfig: myocardium thickness must be positive");
    require(rv_thickness.lo >= 0.0 && rv_gap.lo >= 0.0 && rv_extent.lo >= 0.0, "PhantomConfig: negative RV range");
    require(rv_extent.hi <= 2.0 * std::numbers::pi, "PhantomConfig: RV extent above 2*pi");
    require(center_jitter >= 0.0 && noise_std >= 0.0 && distractor_count >= 0, "PhantomConfig: negative parameter");
    require(slice_shrink >= 0.0 && slice_shrink * (slices_per_case - 1) < 0.9, "PhantomConfig: slice_shrink too large");
}

std::vector<Slice> generate_case(const PhantomConfig& config, std::uint64_t case_seed, const std::string& case_id) {
    config.validate();
    Rng rng(case_seed);
    const std::size_t n = config.image_size;
    const double centre = 0.5 * static_cast<double>(n - 1);

    Geometry geo;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxGeometryAttempts && !ok; ++attempt) {
        geo.cx = centre + rng.uniform(-config.center_jitter, config.center_jitter);
        geo.cy = centre + rng.uniform(-config.center_jitter, config.center_jitter);
        geo.lv_radius = sample(rng, config.lv_radius);
        geo.myo_thickness = sample(rng, config.myo_thickness);
        geo.rv_gap = sample(rng, config.rv_gap);
        geo.rv_thickness = sample(rng, config.rv_thickness);
        geo.rv_extent = sample(rng, config.rv_extent);
        geo.rv_direction = sample(rng, config.rv_direction);
        const double smallest = 1.0 - config.slice_shrink * (config.slices_per_case - 1);
        // LV must stay at least a couple of pixels wide on the smallest slice,
        // and the whole heart must fit with a 2-pixel margin.
        const bool lv_ok = geo.lv_radius * smallest >= 1.5 && geo.myo_thickness * smallest >= 1.0;
        const double margin = 2.0;
        const double r = geo.outer_radius();
        const bool fits = geo.cx - r >= margin && geo.cy - r >= margin && geo.cx + r <= n - 1 - margin &&
                          geo.cy + r <= n - 1 - margin;
        ok = lv_ok && fits;
    }
    require(ok, "generate_case: degenerate geometry after 100 attempts; check PhantomConfig ranges");

    // Clutter is shared by all slices of a case.
    std::vector<Blob> blobs;
    for (int b = 0; b < config.distractor_count; ++b) {
        for (int attempt = 0; attempt < kMaxGeometryAttempts; ++attempt) {
            const double r = sample(rng, config.distractor_radius);
            const double x = rng.uniform(r, static_cast<double>(n - 1) - r);
            const double y = rng.uniform(r, static_cast<double>(n - 1) - r);
            if (std::hypot(x - geo.cx, y - geo.cy) >= geo.outer_radius() + r + 3.0) {
                blobs.push_back({x, y, r, sample(rng, config.distractor_intensity)});
                break;
            }
        }
    }
    const double body_ax = 0.44 * n, body_ay = 0.38 * n;
    const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);

    std::vector<Slice> slices;
    for (int s = 0; s < config.slices_per_case; ++s) {
        const Geometry g = geo.scaled(1.0 - config.slice_shrink * s);
        std::vector<std::uint8_t> labels(n * n);
        TensorF image = TensorF::grid(1, n, n);
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                const double fx = static_cast<double>(x), fy = static_cast<double>(y);
                const std::uint8_t cls = g.classify(fx, fy);
                labels[y * n + x] = cls;
                double v = config.class_intensity[cls];
                if (cls == background) {
                    const double ex = (fx - centre) / body_ax, ey = (fy - centre) / body_ay;
                    if (ex * ex + ey * ey < 1.0) v = config.body_intensity;
                    for (const Blob& blob : blobs) {
                        if (std::hypot(fx - blob.x, fy - blob.y) < blob.r) v = blob.intensity;
                    }
                }
                const double u = 2.0 * fx / (n - 1) - 1.0, w = 2.0 * fy / (n - 1) - 1.0;
                v += config.gradient_amplitude * 0.5 * (std::cos(grad_angle) * u + std::sin(grad_angle) * w);
                if (config.noise_std > 0.0) v += rng.normal(0.0, config.noise_std);
                image(0, y, x) = static_cast<float>(v);
            }
        }
        slices.emplace_back(ImageSlice(normalize_minmax(std::move(image)), case_id, s),
                            LabelMap::from_indices(labels, class_count, n, n));
    }
    return slices;
}

std::string case_name(std::size_t index) {
    std::string digits = std::to_string(index);
    return "case_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

std::uint64_t case_seed(std::uint64_t dataset_seed, std::size_t index) {
    return derive_seed(dataset_seed, "phantom-case", index);
}

DatasetSplit make_splits(const std::vector<std::string>& case_ids, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
    double total = 0.0;
    std::size_t parts = 0;
    for (double r : ratios) {
        require(r >= 0.0, "make_splits: negative ratio");
        total += r;
        if (r > 0.0) ++parts;
    }
    require(std::abs(total - 1.0) < 1e-9, "make_splits: ratios must sum to 1");
    require(case_ids.size() >= parts, "make_splits: fewer cases than split parts");

    const std::size_t n = case_ids.size();
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i) {
            if (remainders[i] > remainders[best]) best = i;
        }
        ++sizes[best];
        remainders[best] = -1.0;
        ++assigned;
    }
    // Every non-empty ratio gets at least one case.
    for (std::size_t i = 0; i < 3; ++i) {
        if (ratios[i] > 0.0 && sizes[i] == 0) {
            std::size_t donor = 0;
            for (std::size_t j = 1; j < 3; ++j) {
                if (sizes[j] > sizes[donor]) donor = j;
            }
            --sizes[donor];
            ++sizes[i];
        }
    }

    std::vector<std::string> shuffled = case_ids;
    Rng rng(derive_seed(seed, "split"));
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(shuffled[i - 1], shuffled[j]);
    }
    DatasetSplit split;
    auto it = shuffled.begin();
    split.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    split.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    split.test.assign(it, shuffled.end());
    split.validate();
    return split;
}

DatasetSplit write_dataset(const std::filesystem::path& root, const PhantomConfig& config, std::size_t case_count,
                           const std::array<double, 3>& ratios, std::uint64_t split_seed) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < case_count; ++i) {
        ids.push_back(case_name(i));
        write_case(root, ids.back(), generate_case(config, case_seed(config.seed, i), ids.back()));
    }
    DatasetSplit split = make_splits(ids, ratios, split_seed);
    nlohmann::json manifest = {
        {"cases", ids},
        {"phantom", config},
        {"splits",
         {{to_string(SplitRole::segmentation_train), split.train},
          {to_string(SplitRole::calibration_train), split.validation},
          {to_string(SplitRole::intra_domain_test), split.test}}},
    };
    std::ofstream(root / "manifest.json") << manifest.dump(2) << "\n";
    return split;
}

DatasetSplit read_manifest_split(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.json");
    require(static_cast<bool>(in), "read_manifest_split: missing " + (root / "manifest.json").string());
    nlohmann::json manifest;
    in >> manifest;
    const auto& s = manifest.at("splits");
    DatasetSplit split;
    split.train = s.at(to_string(SplitRole::segmentation_train)).get<std::vector<std::string>>();
    split.validation = s.at(to_string(SplitRole::calibration_train)).get<std::vector<std::string>>();
    split.test = s.at(to_string(SplitRole::intra_domain_test)).get<std::vector<std::string>>();
    split.validate();
    return split;
}

namespace {

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

void read_range(const nlohmann::json& j, const char* key, Range& r) {
    if (auto it = j.find(key); it != j.end()) {
        require(it->is_array() && it->size() == 2, std::string("PhantomConfig: '") + key + "' must be [lo, hi]");
        r.lo = (*it)[0].get<double>();
        r.hi = (*it)[1].get<double>();
    }
}

}  // namespace

void to_json(nlohmann::json& j, const PhantomConfig& c) {
    j = {
        {"image_size", c.image_size},
        {"classes", c.classes},
        {"slices_per_case", c.slices_per_case},
        {"lv_radius", range_json(c.lv_radius)},
        {"myo_thickness", range_json(c.myo_thickness)},
        {"rv_thickness", range_json(c.rv_thickness)},
        {"rv_gap", range_json(c.rv_gap)},
        {"rv_extent", range_json(c.rv_extent)},
        {"rv_direction", range_json(c.rv_direction)},
        {"center_jitter", c.center_jitter},
        {"slice_shrink", c.slice_shrink},
        {"class_intensity", c.class_intensity},
        {"noise_std", c.noise_std},
        {"gradient_amplitude", c.gradient_amplitude},
        {"body_intensity", c.body_intensity},
        {"distractor_count", c.distractor_count},
        {"distractor_radius", range_json(c.distractor_radius)},
        {"distractor_intensity", range_json(c.distractor_intensity)},
        {"seed", c.seed},
    };
}

void from_json(const nlohmann::json& j, PhantomConfig& c) {
    // Geometry defaults follow the requested image size unless overridden.
    std::size_t size = c.image_size;
    read_optional(j, "image_size", size);
    if (size != c.image_size) c = PhantomConfig::for_size(size);
    read_optional(j, "classes", c.classes);
    read_optional(j, "slices_per_case", c.slices_per_case);
    read_range(j, "lv_radius", c.lv_radius);
    read_range(j, "myo_thickness", c.myo_thickness);
    read_range(j, "rv_thickness", c.rv_thickness);
    read_range(j, "rv_gap", c.rv_gap);
    read_range(j, "rv_extent", c.rv_extent);
    read_range(j, "rv_direction", c.rv_direction);
    read_optional(j, "center_jitter", c.center_jitter);
    read_optional(j, "slice_shrink", c.slice_shrink);
    read_optional(j, "class_intensity", c.class_intensity);
    read_optional(j, "noise_std", c.noise_std);
    read_optional(j, "gradient_amplitude", c.gradient_amplitude);
    read_optional(j, "body_intensity", c.body_intensity);
    read_optional(j, "distractor_count", c.distractor_count);
    read_range(j, "distractor_radius", c.distractor_radius);
    read_range(j, "distractor_intensity", c.distractor_intensity);
    read_optional(j, "seed", c.seed);
}

}  // namespace oodcal::phantom
