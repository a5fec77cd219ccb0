#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "oodcal/tensor.hpp"

namespace oodcal {

// Row-major 2-D complex grid, used for k-space.
struct Spectrum {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::complex<double>> bins;

    Spectrum() = default;
    Spectrum(std::size_t r, std::size_t c) : rows(r), cols(c), bins(r * c) {}

    std::complex<double>& operator()(std::size_t r, std::size_t c) { return bins[r * cols + c]; }
    const std::complex<double>& operator()(std::size_t r, std::size_t c) const { return bins[r * cols + c]; }
};

// Forward 2-D DFT (unnormalized) of the first channel of a 1 x M x N image.
Spectrum dft2(const TensorF& image);
// Forward / inverse transforms of complex grids. The inverse carries the 1/(MN) factor.
Spectrum dft2(const Spectrum& grid);
Spectrum idft2(const Spectrum& spectrum);

// Real part / magnitude of a complex grid as a 1 x M x N image.
TensorF real_part(const Spectrum& grid);
TensorF magnitude(const Spectrum& grid);

}  // namespace oodcal
