#pragma once

#include <cstdint>
#include <vector>

#include "oodcal/tensor.hpp"

namespace oodcal::nn {

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;
};

// -(1/MN) sum_{m,n} log softmax(scores)(y(m,n), m, n); gradient w.r.t. scores.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& scores, const std::vector<std::uint8_t>& labels);

// -(1/MN) sum_{m,n} log softmax(z / t)(y(m,n), m, n) with a 1 x M x N
// temperature t shared by all classes; gradient w.r.t. t. The logits z are constants.
template <typename T>
LossResult<T> temperature_nll(const Tensor<T>& logits, const Tensor<T>& temperature,
                              const std::vector<std::uint8_t>& labels);

}  // namespace oodcal::nn
