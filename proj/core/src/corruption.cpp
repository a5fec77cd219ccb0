#include "oodcal/corruption.hpp"

#include <cmath>
#include <numbers>

#include "oodcal/fft.hpp"
#include "oodcal/random.hpp"

namespace oodcal::corruption {

namespace {

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

TensorF clipped(TensorF t) {
    for (float& v : t.storage()) v = std::clamp(v, 0.0f, 1.0f);
    return t;
}

double normalized_coord(std::size_t i, std::size_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
}

std::size_t wrap_index(int i, std::size_t n) {
    const int m = static_cast<int>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::identity: return "identity";
        case Kind::bias_field: return "bias_field";
        case Kind::motion: return "motion";
        case Kind::ghosting: return "ghosting";
        case Kind::spike: return "spike";
    }
    return "unknown";
}

std::string to_string(Severity severity) {
    switch (severity) {
        case Severity::mild: return "mild";
        case Severity::moderate: return "moderate";
        case Severity::severe: return "severe";
    }
    return "unknown";
}

Kind parse_kind(const std::string& name) {
    for (Kind k : {Kind::identity, Kind::bias_field, Kind::motion, Kind::ghosting, Kind::spike}) {
        if (to_string(k) == name) return k;
    }
    if (name == "clean" || name == "none") return Kind::identity;
    throw Error("unknown corruption kind '" + name + "'");
}

Severity parse_severity(const std::string& name) {
    for (Severity s : {Severity::mild, Severity::moderate, Severity::severe}) {
        if (to_string(s) == name) return s;
    }
    throw Error("unknown corruption severity '" + name + "'");
}

CorruptionSpec CorruptionSpec::preset(Kind kind, Severity severity, std::uint64_t seed) {
    CorruptionSpec s;
    s.kind = kind;
    s.severity = severity;
    s.seed = seed;
    const int level = static_cast<int>(severity);
    constexpr double bias_coeff[] = {0.3, 0.5, 0.8};
    constexpr int ghosts[] = {4, 4, 4};
    constexpr double ghost_intensity[] = {0.3, 0.5, 0.75};
    constexpr double spike_intensity[] = {0.5, 1.0, 2.0};
    constexpr int movements[] = {1, 2, 3};
    constexpr double rotation[] = {5.0, 10.0, 15.0};
    constexpr double shift[] = {3.0, 6.0, 10.0};
    s.bias = {3, bias_coeff[level]};
    s.ghosting = {ghosts[level], 0, ghost_intensity[level]};
    s.spike = {std::nullopt, spike_intensity[level]};
    s.motion = {movements[level], rotation[level], shift[level]};
    return s;
}

std::string CorruptionSpec::tag() const {
    if (kind == Kind::identity) return "clean";
    return to_string(kind) + "-" + to_string(severity);
}

ImageSlice apply(const ImageSlice& x, const CorruptionSpec& spec) {
    switch (spec.kind) {
        case Kind::identity: return x;
        case Kind::bias_field: return apply_bias_field(x, spec.bias.order, spec.bias.coeff_range, spec.seed);
        case Kind::ghosting:
            return apply_ghosting(x, spec.ghosting.num_ghosts, spec.ghosting.axis, spec.ghosting.intensity);
        case Kind::spike:
            if (spec.spike.position) {
                return apply_spike(x, spec.spike.position->first, spec.spike.position->second, spec.spike.intensity);
            }
            return apply_spike(x, spec.spike.intensity, spec.seed);
        case Kind::motion:
            return apply_motion(x, spec.motion.num_movements, spec.motion.max_rotation_deg, spec.motion.max_shift,
                                spec.seed);
    }
    throw Error("apply: unknown corruption kind");
}

std::size_t bias_coefficient_count(int order) {
    const auto o = static_cast<std::size_t>(order);
    return (o + 1) * (o + 2) / 2;
}

ImageSlice apply_bias_field(const ImageSlice& x, int order, double coeff_range, std::uint64_t seed) {
    require(order >= 0, "apply_bias_field: order must be >= 0");
    require(coeff_range >= 0.0, "apply_bias_field: coeff_range must be >= 0");
    Rng rng(derive_seed(seed, "bias-field"));
    std::vector<double> coeffs(bias_coefficient_count(order));
    for (double& c : coeffs) c = rng.uniform(-coeff_range, coeff_range);
    return apply_bias_field(x, coeffs, order);
}

ImageSlice apply_bias_field(const ImageSlice& x, std::span<const double> coefficients, int order) {
    require(order >= 0, "apply_bias_field: order must be >= 0");
    require(coefficients.size() == bias_coefficient_count(order), "apply_bias_field: wrong coefficient count");
    const std::size_t rows = x.height(), cols = x.width();
    TensorF out = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double u = normalized_coord(r, rows);
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = normalized_coord(c, cols);
            double p = 0.0;
            std::size_t idx = 0;
            for (int d = 0; d <= order; ++d) {
                for (int i = d; i >= 0; --i) {
                    const double coef = coefficients[idx++];
                    if (coef != 0.0) p += coef * std::pow(u, i) * std::pow(v, d - i);
                }
            }
            out(0, r, c) = clip01(static_cast<double>(x(r, c)) * std::exp(p));
        }
    }
    return x.with_data(std::move(out));
}

ImageSlice apply_ghosting(const ImageSlice& x, int num_ghosts, int axis, double intensity) {
    require(num_ghosts >= 1, "apply_ghosting: num_ghosts must be >= 1");
    require(axis == 0 || axis == 1, "apply_ghosting: axis must be 0 or 1");
    require(intensity >= 0.0 && intensity <= 1.0, "apply_ghosting: intensity must lie in [0, 1]");
    const std::size_t axis_len = axis == 0 ? x.height() : x.width();
    require(static_cast<std::size_t>(num_ghosts) < axis_len, "apply_ghosting: num_ghosts must be below axis length");
    Spectrum k = dft2(x.data());
    const double keep = 1.0 - intensity;
    for (std::size_t r = 0; r < k.rows; ++r) {
        for (std::size_t c = 0; c < k.cols; ++c) {
            const std::size_t line = axis == 0 ? r : c;
            if (line % static_cast<std::size_t>(num_ghosts) != 0) k(r, c) *= keep;
        }
    }
    return x.with_data(clipped(real_part(idft2(k))));
}

ImageSlice apply_spike(const ImageSlice& x, int u, int v, double intensity) {
    require(intensity >= 0.0, "apply_spike: intensity must be >= 0");
    const std::size_t r = wrap_index(u, x.height());
    const std::size_t c = wrap_index(v, x.width());
    require(!(r == 0 && c == 0), "apply_spike: spike position must not be the DC bin");
    Spectrum k = dft2(x.data());
    double peak = 0.0;
    for (const auto& b : k.bins) peak = std::max(peak, std::abs(b));
    k(r, c) += intensity * peak;
    return x.with_data(clipped(real_part(idft2(k))));
}

std::pair<int, int> sample_spike_position(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "spike"));
    const int ru = std::max(1, static_cast<int>(rows / 4));
    const int rv = std::max(1, static_cast<int>(cols / 4));
    for (;;) {
        const int u = static_cast<int>(rng.uniform_int(-ru, ru));
        const int v = static_cast<int>(rng.uniform_int(-rv, rv));
        if (std::abs(u) + std::abs(v) >= 3 || (rows < 8 && (u != 0 || v != 0))) return {u, v};
    }
}

ImageSlice apply_spike(const ImageSlice& x, double intensity, std::uint64_t seed) {
    const auto [u, v] = sample_spike_position(x.height(), x.width(), seed);
    return apply_spike(x, u, v, intensity);
}

std::vector<RigidMotion> sample_motion(int num_movements, double max_rotation_deg, double max_shift,
                                       std::uint64_t seed) {
    require(num_movements >= 1, "apply_motion: num_movements must be >= 1");
    require(max_rotation_deg >= 0.0 && max_shift >= 0.0, "apply_motion: ranges must be non-negative");
    Rng rng(derive_seed(seed, "motion"));
    std::vector<RigidMotion> out(static_cast<std::size_t>(num_movements));
    for (auto& m : out) {
        m.rotation_deg = rng.uniform(-max_rotation_deg, max_rotation_deg);
        m.shift_x = rng.uniform(-max_shift, max_shift);
        m.shift_y = rng.uniform(-max_shift, max_shift);
    }
    return out;
}

TensorF rigid_transform(const TensorF& image, const RigidMotion& motion) {
    const std::size_t rows = image.height(), cols = image.width();
    const double cy = 0.5 * static_cast<double>(rows - 1), cx = 0.5 * static_cast<double>(cols - 1);
    const double theta = motion.rotation_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    TensorF out = TensorF::grid(1, rows, cols, 0.0f);
    auto sample = [&](long r, long c) -> double {
        if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return 0.0;
        return image(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            // Inverse map: undo the shift, then rotate by -theta about the centre.
            const double dx = static_cast<double>(c) - motion.shift_x - cx;
            const double dy = static_cast<double>(r) - motion.shift_y - cy;
            const double sx = ct * dx + st * dy + cx;
            const double sy = -st * dx + ct * dy + cy;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
            const double v = (1 - ay) * ((1 - ax) * sample(iy, ix) + ax * sample(iy, ix + 1)) +
                             ay * ((1 - ax) * sample(iy + 1, ix) + ax * sample(iy + 1, ix + 1));
            out(0, r, c) = static_cast<float>(v);
        }
    }
    return out;
}

ImageSlice apply_motion(const ImageSlice& x, const std::vector<RigidMotion>& motions) {
    require(!motions.empty(), "apply_motion: num_movements must be >= 1");
    const std::size_t rows = x.height();
    const std::size_t segments = motions.size() + 1;
    std::vector<Spectrum> spectra;
    spectra.push_back(dft2(x.data()));
    for (const auto& m : motions) spectra.push_back(dft2(rigid_transform(x.data(), m)));

    Spectrum combined(rows, x.width());
    for (std::size_t centred = 0; centred < rows; ++centred) {
        const std::size_t segment = std::min(segments - 1, centred * segments / rows);
        // Centred row index -> natural DFT row index.
        const std::size_t r = (centred + rows - rows / 2) % rows;
        for (std::size_t c = 0; c < combined.cols; ++c) combined(r, c) = spectra[segment](r, c);
    }
    return x.with_data(clipped(magnitude(idft2(combined))));
}

ImageSlice apply_motion(const ImageSlice& x, int num_movements, double max_rotation_deg, double max_shift,
                        std::uint64_t seed) {
    return apply_motion(x, sample_motion(num_movements, max_rotation_deg, max_shift, seed));
}

}  // namespace oodcal::corruption
