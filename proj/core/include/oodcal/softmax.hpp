#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oodcal/types.hpp"

namespace oodcal {

// Channel-wise softmax at every pixel, stabilized by the per-pixel maximum.
ProbabilityMap softmax(const LogitMap& logits);

// softmax(z / T) with T broadcast over channels. Because T is positive and
// shared by all classes, the per-pixel argmax is unchanged.
ProbabilityMap softmax_scaled(const LogitMap& logits, const TemperatureMap& temperature);
ProbabilityMap softmax_scaled(const LogitMap& logits, double temperature);

// Softmax of one pixel's scores into `out` (same length).
void softmax_pixel(std::span<const double> scores, std::span<double> out);

// Per-pixel argmax; ties go to the lowest class index.
std::vector<std::uint8_t> argmax_labels(const TensorF& scores);
std::vector<std::uint8_t> argmax_labels(const TensorD& scores);
inline std::vector<std::uint8_t> argmax_labels(const LogitMap& z) { return argmax_labels(z.data()); }
inline std::vector<std::uint8_t> argmax_labels(const ProbabilityMap& p) { return argmax_labels(p.data()); }

}  // namespace oodcal
