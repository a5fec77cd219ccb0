#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oodcal/augment.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/types.hpp"

namespace oodcal::aleatoric {

// Per-pixel, per-class logit statistics over N_A augmented copies.
struct SusceptibilityEstimate {
    TensorF mu;   // C x M x N mean logits
    TensorF var;  // C x M x N unbiased variance; zero when n_aug == 1
    std::size_t n_aug = 0;
};

// Throws unless the policy is photometric-only: a spatial warp would compare
// logits of different anatomy at the same pixel.
void require_photometric(const augment::AugmentationPolicy& policy);

// Logits of the augmented copies T_{a_l}(x), l = 0..n_aug-1. Draw l depends
// only on (seed, l), so a longer run extends a shorter one.
std::vector<LogitMap> augmented_logits(const LogitModel& model, const ImageSlice& x,
                                       const augment::AugmentationPolicy& policy, std::size_t n_aug,
                                       std::uint64_t seed);

// Mean and variance over the first n entries (all when n == 0). Accumulated
// in float64, two passes.
SusceptibilityEstimate summarize(std::span<const LogitMap> logits, std::size_t n = 0);

SusceptibilityEstimate estimate(const LogitModel& model, const ImageSlice& x,
                                const augment::AugmentationPolicy& policy, std::size_t n_aug, std::uint64_t seed);

// Mean of softmax over the augmented copies ("Alea." baseline). May change the argmax.
ProbabilityMap mean_softmax(std::span<const LogitMap> logits, std::size_t n = 0);
ProbabilityMap alea_probability(const LogitModel& model, const ImageSlice& x,
                                const augment::AugmentationPolicy& policy, std::size_t n_aug, std::uint64_t seed);

}  // namespace oodcal::aleatoric
