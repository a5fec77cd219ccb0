#include "oodcal/image_write.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "oodcal/error.hpp"

namespace oodcal::image {

void Canvas::fill_rect(long x0, long y0, long x1, long y1, Rgb c) {
    x0 = std::max(0L, x0);
    y0 = std::max(0L, y0);
    x1 = std::min(static_cast<long>(width), x1);
    y1 = std::min(static_cast<long>(height), y1);
    for (long y = y0; y < y1; ++y) {
        for (long x = x0; x < x1; ++x) pixels[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] = c;
    }
}

void Canvas::line(long x0, long y0, long x1, long y1, Rgb c) {
    const long steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1L});
    for (long s = 0; s <= steps; ++s) {
        const long x = x0 + (x1 - x0) * s / steps, y = y0 + (y1 - y0) * s / steps;
        fill_rect(x, y, x + 1, y + 1, c);
    }
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, std::size_t height,
               std::size_t width, double lo, double hi) {
    require(values.size() == height * width, "write_pgm: size mismatch");
    require(hi > lo, "write_pgm: empty intensity range");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "write_pgm: cannot open " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    for (double v : values) {
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        out.put(static_cast<char>(std::lround(255.0 * t)));
    }
}

void write_ppm(const std::filesystem::path& path, const Canvas& canvas) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "write_ppm: cannot open " + path.string());
    out << "P6\n" << canvas.width << ' ' << canvas.height << "\n255\n";
    for (const auto& p : canvas.pixels) {
        out.put(static_cast<char>(p.r));
        out.put(static_cast<char>(p.g));
        out.put(static_cast<char>(p.b));
    }
}

namespace {

Rgb ramp(double t) {
    // Piecewise-linear dark blue -> teal -> yellow.
    static const std::array<std::array<double, 3>, 3> stops{{{20, 20, 90}, {30, 150, 140}, {250, 230, 40}}};
    t = std::clamp(t, 0.0, 1.0) * 2.0;
    const std::size_t i = std::min<std::size_t>(1, static_cast<std::size_t>(t));
    const double a = t - static_cast<double>(i);
    auto mix = [&](int c) { return static_cast<std::uint8_t>(std::lround((1 - a) * stops[i][c] + a * stops[i + 1][c])); };
    return {mix(0), mix(1), mix(2)};
}

}  // namespace

Canvas heatmap(std::span<const double> values, std::size_t height, std::size_t width, double lo, double hi,
               std::size_t scale) {
    require(values.size() == height * width && hi > lo && scale >= 1, "heatmap: bad arguments");
    Canvas c(width * scale, height * scale);
    for (std::size_t y = 0; y < c.height; ++y) {
        for (std::size_t x = 0; x < c.width; ++x) {
            c.pixels[y * c.width + x] = ramp((values[(y / scale) * width + x / scale] - lo) / (hi - lo));
        }
    }
    return c;
}

Canvas label_image(std::span<const std::uint8_t> labels, std::size_t height, std::size_t width, std::size_t scale) {
    static const std::array<Rgb, 6> palette{{{0, 0, 0}, {220, 60, 60}, {60, 180, 75}, {70, 110, 230}, {240, 200, 40}, {200, 80, 200}}};
    require(labels.size() == height * width && scale >= 1, "label_image: bad arguments");
    Canvas c(width * scale, height * scale);
    for (std::size_t y = 0; y < c.height; ++y) {
        for (std::size_t x = 0; x < c.width; ++x) {
            c.pixels[y * c.width + x] = palette[labels[(y / scale) * width + x / scale] % palette.size()];
        }
    }
    return c;
}

Canvas reliability_diagram(const std::vector<metrics::BinRecord>& bins, std::size_t size) {
    Canvas c(size, size);
    const long margin = 10, span = static_cast<long>(size) - 2 * margin;
    const long n = static_cast<long>(bins.size());
    for (long k = 0; k < n; ++k) {
        const auto& b = bins[static_cast<std::size_t>(k)];
        if (b.count == 0) continue;
        const long x0 = margin + span * k / n, x1 = margin + span * (k + 1) / n;
        const long top = margin + span - std::lround(span * b.accuracy());
        c.fill_rect(x0 + 1, top, x1 - 1, margin + span, {70, 110, 230});
        // Gap to the bin's mean confidence.
        const long conf = margin + span - std::lround(span * b.mean_confidence());
        c.fill_rect(x0 + 1, std::min(top, conf), x1 - 1, std::max(top, conf), {230, 120, 120});
    }
    c.line(margin, margin + span, margin + span, margin, {0, 0, 0});
    c.line(margin, margin + span, margin + span, margin + span, {0, 0, 0});
    c.line(margin, margin, margin, margin + span, {0, 0, 0});
    return c;
}

Canvas histogram_chart(const std::vector<std::size_t>& counts, std::size_t size) {
    Canvas c(size, size);
    const long margin = 10, span = static_cast<long>(size) - 2 * margin;
    const long n = static_cast<long>(counts.size());
    const std::size_t peak = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    for (long k = 0; k < n && peak > 0; ++k) {
        const long x0 = margin + span * k / n, x1 = margin + span * (k + 1) / n;
        const long h = std::lround(static_cast<double>(span) * static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                                   static_cast<double>(peak));
        c.fill_rect(x0 + 1, margin + span - h, x1 - 1, margin + span, {60, 160, 90});
    }
    c.line(margin, margin + span, margin + span, margin + span, {0, 0, 0});
    return c;
}

}  // namespace oodcal::image
