#include "oodcal/augment.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <tuple>

#include "oodcal/json_util.hpp"
#include "oodcal/random.hpp"

namespace oodcal::augment {

AugmentationPolicy AugmentationPolicy::identity() {
    AugmentationPolicy p;
    p.brightness = p.contrast = p.gamma = p.noise = false;
    p.affine = p.elastic = false;
    return p;
}

AugmentationPolicy AugmentationPolicy::photometric_only() const {
    AugmentationPolicy p = *this;
    p.affine = false;
    p.elastic = false;
    return p;
}

void AugmentationPolicy::validate() const {
    auto check = [](bool enabled, const Range& r, double identity, const char* name) {
        if (!enabled) return;
        require(r.valid(), std::string("AugmentationPolicy: empty range for ") + name);
        require(r.contains(identity), std::string("AugmentationPolicy: ") + name + " range must contain the identity");
    };
    check(brightness, brightness_range, 0.0, "brightness");
    check(contrast, contrast_range, 1.0, "contrast");
    check(gamma, gamma_range, 1.0, "gamma");
    check(affine, rotation_deg, 0.0, "rotation");
    check(affine, scale, 1.0, "scale");
    check(affine, translation, 0.0, "translation");
    require(!noise || (noise_std_range.valid() && noise_std_range.lo >= 0.0),
            "AugmentationPolicy: noise std range must be non-negative");
    require(!gamma || gamma_range.lo > 0.0, "AugmentationPolicy: gamma must be positive");
    require(!contrast || contrast_range.lo >= 0.0, "AugmentationPolicy: contrast must be non-negative");
    require(!affine || scale.lo > 0.0, "AugmentationPolicy: scale must be positive");
    require(!elastic || (elastic_spacing >= 2.0 && elastic_std >= 0.0), "AugmentationPolicy: bad elastic parameters");
}

namespace {

double draw(std::uint64_t seed, const char* tag, const Range& r) {
    Rng rng(derive_seed(seed, tag));
    return rng.uniform(r.lo, r.hi);
}

// Smooth random displacement field: Gaussian displacements on a coarse grid,
// bilinearly upsampled.
struct ElasticField {
    std::size_t gy = 0, gx = 0;
    double spacing = 16.0;
    std::vector<double> dx, dy;

    ElasticField(std::size_t rows, std::size_t cols, double spacing_px, double stddev, std::uint64_t seed)
        : spacing(spacing_px) {
        gy = static_cast<std::size_t>(std::ceil(static_cast<double>(rows) / spacing)) + 2;
        gx = static_cast<std::size_t>(std::ceil(static_cast<double>(cols) / spacing)) + 2;
        Rng rng(seed);
        dx.resize(gy * gx);
        dy.resize(gy * gx);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] = rng.normal(0.0, stddev);
            dy[i] = rng.normal(0.0, stddev);
        }
    }

    std::pair<double, double> at(double r, double c) const {
        const double fr = r / spacing, fc = c / spacing;
        const auto ir = static_cast<std::size_t>(fr), ic = static_cast<std::size_t>(fc);
        const double ar = fr - static_cast<double>(ir), ac = fc - static_cast<double>(ic);
        auto lerp = [&](const std::vector<double>& f) {
            const double a = f[ir * gx + ic], b = f[ir * gx + ic + 1];
            const double c2 = f[(ir + 1) * gx + ic], d = f[(ir + 1) * gx + ic + 1];
            return (1 - ar) * ((1 - ac) * a + ac * b) + ar * ((1 - ac) * c2 + ac * d);
        };
        return {lerp(dy), lerp(dx)};
    }
};

}  // namespace

AugParams sample_params(const AugmentationPolicy& policy, std::uint64_t seed) {
    AugParams p;
    if (policy.brightness) p.brightness = draw(seed, "brightness", policy.brightness_range);
    if (policy.contrast) p.contrast = draw(seed, "contrast", policy.contrast_range);
    if (policy.gamma) p.gamma = draw(seed, "gamma", policy.gamma_range);
    if (policy.noise) {
        p.noise_std = draw(seed, "noise-std", policy.noise_std_range);
        p.noise_seed = derive_seed(seed, "noise-field");
    }
    if (policy.affine) {
        p.rotation_deg = draw(seed, "rotation", policy.rotation_deg);
        p.scale = draw(seed, "scale", policy.scale);
        p.shift_x = draw(seed, "shift-x", policy.translation);
        p.shift_y = draw(seed, "shift-y", policy.translation);
    }
    if (policy.elastic) {
        p.elastic = true;
        p.elastic_spacing = policy.elastic_spacing;
        p.elastic_std = policy.elastic_std;
        p.elastic_seed = derive_seed(seed, "elastic-field");
    }
    return p;
}

ImageSlice apply_photometric(const ImageSlice& x, const AugParams& params) {
    if (params.photometric_identity()) return x;
    TensorF out = x.data();
    auto& v = out.storage();
    if (params.contrast != 1.0) {
        double mean = 0.0;
        for (float f : v) mean += f;
        mean /= static_cast<double>(v.size());
        for (float& f : v) f = static_cast<float>((f - mean) * params.contrast + mean);
    }
    if (params.brightness != 0.0) {
        for (float& f : v) f = static_cast<float>(f + params.brightness);
    }
    if (params.gamma != 1.0) {
        for (float& f : v) f = static_cast<float>(std::pow(std::clamp(static_cast<double>(f), 0.0, 1.0), params.gamma));
    }
    if (params.noise_std > 0.0) {
        Rng rng(params.noise_seed);
        for (float& f : v) f = static_cast<float>(f + rng.normal(0.0, params.noise_std));
    }
    for (float& f : v) f = std::clamp(f, 0.0f, 1.0f);
    return x.with_data(std::move(out));
}

std::pair<ImageSlice, LabelMap> apply_geometric(const ImageSlice& x, const LabelMap& y, const AugParams& params) {
    require(x.height() == y.height() && x.width() == y.width(), "apply_geometric: image and label sizes differ");
    if (params.geometric_identity()) return {x, y};
    const std::size_t rows = x.height(), cols = x.width();
    const double cy = 0.5 * static_cast<double>(rows - 1), cx = 0.5 * static_cast<double>(cols - 1);
    const double theta = params.rotation_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double inv_scale = 1.0 / params.scale;
    std::optional<ElasticField> field;
    if (params.elastic && params.elastic_std > 0.0) {
        field.emplace(rows, cols, params.elastic_spacing, params.elastic_std, params.elastic_seed);
    }

    TensorF image = TensorF::grid(1, rows, cols, 0.0f);
    std::vector<std::uint8_t> labels(rows * cols, 0);
    const TensorF& src = x.data();
    const auto& src_labels = y.indices();
    auto pixel = [&](long r, long c) -> double {
        if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return 0.0;
        return src(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double er = 0.0, ec = 0.0;
            if (field) std::tie(er, ec) = field->at(static_cast<double>(r), static_cast<double>(c));
            // Inverse of: scale, rotate about the centre, then translate.
            const double dx = (static_cast<double>(c) + ec - params.shift_x - cx) * inv_scale;
            const double dy = (static_cast<double>(r) + er - params.shift_y - cy) * inv_scale;
            const double sx = ct * dx + st * dy + cx;
            const double sy = -st * dx + ct * dy + cy;

            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
            const double v = (1 - ay) * ((1 - ax) * pixel(iy, ix) + ax * pixel(iy, ix + 1)) +
                             ay * ((1 - ax) * pixel(iy + 1, ix) + ax * pixel(iy + 1, ix + 1));
            image(0, r, c) = static_cast<float>(v);

            const long nr = std::lround(sy), nc = std::lround(sx);
            if (nr >= 0 && nc >= 0 && nr < static_cast<long>(rows) && nc < static_cast<long>(cols)) {
                labels[r * cols + c] = src_labels[static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc)];
            }
        }
    }
    return {x.with_data(std::move(image)), LabelMap::from_indices(labels, y.classes(), rows, cols)};
}

namespace {

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

void read_range(const nlohmann::json& j, const char* key, Range& r) {
    if (auto it = j.find(key); it != j.end()) {
        require(it->is_array() && it->size() == 2, std::string("AugmentationPolicy: '") + key + "' must be [lo, hi]");
        r = {(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
}

}  // namespace

void to_json(nlohmann::json& j, const AugmentationPolicy& p) {
    j = {
        {"brightness", p.brightness},
        {"brightness_range", range_json(p.brightness_range)},
        {"contrast", p.contrast},
        {"contrast_range", range_json(p.contrast_range)},
        {"gamma", p.gamma},
        {"gamma_range", range_json(p.gamma_range)},
        {"noise", p.noise},
        {"noise_std_range", range_json(p.noise_std_range)},
        {"affine", p.affine},
        {"rotation_deg", range_json(p.rotation_deg)},
        {"scale", range_json(p.scale)},
        {"translation", range_json(p.translation)},
        {"elastic", p.elastic},
        {"elastic_spacing", p.elastic_spacing},
        {"elastic_std", p.elastic_std},
    };
}

void from_json(const nlohmann::json& j, AugmentationPolicy& p) {
    read_optional(j, "brightness", p.brightness);
    read_range(j, "brightness_range", p.brightness_range);
    read_optional(j, "contrast", p.contrast);
    read_range(j, "contrast_range", p.contrast_range);
    read_optional(j, "gamma", p.gamma);
    read_range(j, "gamma_range", p.gamma_range);
    read_optional(j, "noise", p.noise);
    read_range(j, "noise_std_range", p.noise_std_range);
    read_optional(j, "affine", p.affine);
    read_range(j, "rotation_deg", p.rotation_deg);
    read_range(j, "scale", p.scale);
    read_range(j, "translation", p.translation);
    read_optional(j, "elastic", p.elastic);
    read_optional(j, "elastic_spacing", p.elastic_spacing);
    read_optional(j, "elastic_std", p.elastic_std);
}

}  // namespace oodcal::augment
