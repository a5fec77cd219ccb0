#include "oodcal/fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace oodcal {

namespace {

// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

Spectrum transform(const Spectrum& in, int direction) {
    Spectrum out(in.rows, in.cols);
    if (in.bins.empty()) return out;
    Spectrum work = in;
    auto* src = reinterpret_cast<fftw_complex*>(work.bins.data());
    auto* dst = reinterpret_cast<fftw_complex*>(out.bins.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(in.rows), static_cast<int>(in.cols), src, dst, direction,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

}  // namespace

Spectrum dft2(const TensorF& image) {
    require(image.rank() == 3, "dft2: expected a 1 x M x N image");
    Spectrum grid(image.height(), image.width());
    for (std::size_t i = 0; i < grid.bins.size(); ++i) grid.bins[i] = {static_cast<double>(image[i]), 0.0};
    return transform(grid, FFTW_FORWARD);
}

Spectrum dft2(const Spectrum& grid) { return transform(grid, FFTW_FORWARD); }

Spectrum idft2(const Spectrum& spectrum) {
    Spectrum out = transform(spectrum, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(spectrum.rows * spectrum.cols);
    for (auto& v : out.bins) v *= scale;
    return out;
}

TensorF real_part(const Spectrum& grid) {
    TensorF out = TensorF::grid(1, grid.rows, grid.cols);
    for (std::size_t i = 0; i < grid.bins.size(); ++i) out[i] = static_cast<float>(grid.bins[i].real());
    return out;
}

TensorF magnitude(const Spectrum& grid) {
    TensorF out = TensorF::grid(1, grid.rows, grid.cols);
    for (std::size_t i = 0; i < grid.bins.size(); ++i) out[i] = static_cast<float>(std::abs(grid.bins[i]));
    return out;
}

}  // namespace oodcal
