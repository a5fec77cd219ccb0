#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oodcal/types.hpp"

// Test-time MRI artifact simulation. None of these operators is ever used
// for training-time augmentation.
namespace oodcal::corruption {

enum class Kind { identity, bias_field, motion, ghosting, spike };
enum class Severity { mild, moderate, severe };

std::string to_string(Kind kind);
std::string to_string(Severity severity);
Kind parse_kind(const std::string& name);
Severity parse_severity(const std::string& name);

struct BiasFieldParams {
    int order = 3;
    double coeff_range = 0.5;
};

struct GhostingParams {
    int num_ghosts = 4;
    int axis = 0;  // 0: lines are rows (phase encoding along y), 1: columns
    double intensity = 0.5;
};

struct SpikeParams {
    std::optional<std::pair<int, int>> position;  // (row, col) frequency bin; sampled when empty
    double intensity = 1.0;
};

struct MotionParams {
    int num_movements = 2;
    double max_rotation_deg = 10.0;
    double max_shift = 6.0;
};

struct CorruptionSpec {
    Kind kind = Kind::identity;
    Severity severity = Severity::moderate;
    BiasFieldParams bias;
    GhostingParams ghosting;
    SpikeParams spike;
    MotionParams motion;
    std::uint64_t seed = 0;

    // Fixed parameter presets per severity level.
    static CorruptionSpec preset(Kind kind, Severity severity, std::uint64_t seed = 0);
    // e.g. "ghosting-moderate"; "clean" for identity.
    std::string tag() const;
};

ImageSlice apply(const ImageSlice& x, const CorruptionSpec& spec);

// x * exp(P(u, v)), P a random polynomial of total degree <= order with
// coefficients uniform in [-coeff_range, coeff_range], coordinates in [-1, 1].
ImageSlice apply_bias_field(const ImageSlice& x, int order, double coeff_range, std::uint64_t seed);
// Explicit coefficients, ordered by total degree d = 0..order and, within a
// degree, by decreasing power of the row coordinate: 1, u, v, u^2, uv, v^2, ...
ImageSlice apply_bias_field(const ImageSlice& x, std::span<const double> coefficients, int order);
std::size_t bias_coefficient_count(int order);

// Attenuates every k-space line whose index is not a multiple of num_ghosts by (1 - intensity).
ImageSlice apply_ghosting(const ImageSlice& x, int num_ghosts, int axis, double intensity);

// Adds intensity * max|K| at frequency bin (u, v), indices taken modulo the size.
ImageSlice apply_spike(const ImageSlice& x, int u, int v, double intensity);
ImageSlice apply_spike(const ImageSlice& x, double intensity, std::uint64_t seed);
std::pair<int, int> sample_spike_position(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct RigidMotion {
    double rotation_deg = 0.0;
    double shift_x = 0.0;  // columns
    double shift_y = 0.0;  // rows
};

std::vector<RigidMotion> sample_motion(int num_movements, double max_rotation_deg, double max_shift,
                                       std::uint64_t seed);
// Rotation about the image centre followed by translation; bilinear, zero outside.
TensorF rigid_transform(const TensorF& image, const RigidMotion& motion);
// k-space rows, in centred (fft-shifted) order, are split into
// motions.size() + 1 contiguous segments; segment 0 comes from the original
// image, segment j from the j-th moved copy.
ImageSlice apply_motion(const ImageSlice& x, const std::vector<RigidMotion>& motions);
ImageSlice apply_motion(const ImageSlice& x, int num_movements, double max_rotation_deg, double max_shift,
                        std::uint64_t seed);

}  // namespace oodcal::corruption
