#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "oodcal/metrics.hpp"

namespace oodcal::image {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct Canvas {
    std::size_t width = 0, height = 0;
    std::vector<Rgb> pixels;

    Canvas(std::size_t w, std::size_t h, Rgb fill = {255, 255, 255}) : width(w), height(h), pixels(w * h, fill) {}
    void fill_rect(long x0, long y0, long x1, long y1, Rgb c);  // half-open, clipped
    void line(long x0, long y0, long x1, long y1, Rgb c);
};

// Binary PGM (P5) of `values` (row-major height x width) mapped linearly from [lo, hi].
void write_pgm(const std::filesystem::path& path, std::span<const double> values, std::size_t height,
               std::size_t width, double lo, double hi);
// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Canvas& canvas);

// Scalar map through a blue-to-yellow ramp; values clipped to [lo, hi].
Canvas heatmap(std::span<const double> values, std::size_t height, std::size_t width, double lo, double hi,
               std::size_t scale = 2);
// Label indices in a fixed palette.
Canvas label_image(std::span<const std::uint8_t> labels, std::size_t height, std::size_t width,
                   std::size_t scale = 2);
// Per-bin accuracy bars against the diagonal.
Canvas reliability_diagram(const std::vector<metrics::BinRecord>& bins, std::size_t size = 240);
// Bar chart of counts (linear scale).
Canvas histogram_chart(const std::vector<std::size_t>& counts, std::size_t size = 240);

}  // namespace oodcal::image
