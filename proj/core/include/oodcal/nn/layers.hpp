#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodcal/random.hpp"
#include "oodcal/tensor.hpp"

// Minimal single-sample CNN building blocks with hand-written backward passes.
// Activations are C x H x W tensors. forward() is const and pure when no
// cache is passed (inference); training passes a cache that backward() reads.
namespace oodcal::nn {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
    void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

template <typename T>
std::size_t parameter_count(const ParamList<T>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += p->value.size();
    return n;
}

// "Same" padded k x k convolution, stride 1, with bias.
template <typename T>
class Conv2d {
public:
    struct Cache {
        Tensor<T> cols;  // im2col matrix, or the input itself for 1 x 1 kernels
        std::size_t height = 0, width = 0;
    };

    Conv2d() = default;
    Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
    Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
    void collect(ParamList<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    std::size_t in_channels() const { return in_; }
    std::size_t out_channels() const { return out_; }
    std::size_t kernel() const { return k_; }

    Param<T> weight;  // out x (in * k * k)
    Param<T> bias;    // out

private:
    std::size_t in_ = 0, out_ = 0, k_ = 1;
};

// 2 x 2 transposed convolution with stride 2 (exact 2x upsampling).
template <typename T>
class UpConv2x2 {
public:
    struct Cache {
        Tensor<T> input;
    };

    UpConv2x2() = default;
    UpConv2x2(std::string name, std::size_t in, std::size_t out, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
    Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
    void collect(ParamList<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    Param<T> weight;  // (out * 4) x in
    Param<T> bias;    // out

private:
    std::size_t in_ = 0, out_ = 0;
};

// 2 x 2 max pooling, stride 2. Odd trailing rows/columns are not allowed.
template <typename T>
struct MaxPool2 {
    struct Cache {
        std::vector<std::uint8_t> argmax;
        std::size_t height = 0, width = 0;
    };
    static Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr);
    static Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
};

// In-place ReLU; backward masks by the stored output.
template <typename T>
void relu_inplace(Tensor<T>& x);
template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& output);

// Channel-wise (spatial) dropout. With rng == nullptr or rate == 0 it is the identity.
template <typename T>
struct Dropout2d {
    double rate = 0.0;
    struct Cache {
        std::vector<T> scale;  // per channel: 0 or 1 / (1 - rate)
    };
    Tensor<T> forward(const Tensor<T>& x, Rng* rng, Cache* cache = nullptr) const;
    Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache) const;
};

// Squeeze-and-excitation channel attention:
// y_c = x_c * sigmoid(W2 relu(W1 mean(x) + b1) + b2)_c.
template <typename T>
class ChannelAttention {
public:
    struct Cache {
        Tensor<T> input;
        std::vector<T> pooled, hidden, gate;
    };

    ChannelAttention() = default;
    ChannelAttention(std::string name, std::size_t channels, std::size_t hidden, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
    Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
    void collect(ParamList<T>& out) {
        for (auto* p : {&w1, &b1, &w2, &b2}) out.push_back(p);
    }

    Param<T> w1, b1, w2, b2;

private:
    std::size_t channels_ = 0, hidden_ = 0;
};

// T = softplus(h) + floor; strictly positive.
template <typename T>
Tensor<T> softplus_floor(const Tensor<T>& h, T floor);
template <typename T>
Tensor<T> softplus_backward(const Tensor<T>& grad_out, const Tensor<T>& h);

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);
// Splits a channel-concatenated gradient back into parts of the given channel counts.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad, const std::vector<std::size_t>& channels);

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);

}  // namespace oodcal::nn
