#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/nn/layers.hpp"

namespace oodcal::nn {

struct UNetConfig {
    std::size_t in_channels = 1;
    std::size_t out_channels = 4;
    std::size_t depth = 3;          // number of 2x poolings
    std::size_t base_channels = 16; // channels at full resolution, doubled per level
    std::size_t kernel = 3;
    double encoder_dropout = 0.0;   // channel dropout after each encoder stage (training only)
};

void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);

// Encoder-decoder with skip connections: two conv+ReLU per stage, max-pool
// down, 2x2 transposed-conv up, 1x1 head producing raw scores.
template <typename T>
class UNet {
public:
    struct Stage {
        Conv2d<T> a, b;
    };
    struct StageCache {
        typename Conv2d<T>::Cache a, b;
        Tensor<T> out_a, out_b;
        typename Dropout2d<T>::Cache drop;
    };
    struct Tape {
        std::vector<StageCache> enc;
        std::vector<typename MaxPool2<T>::Cache> pool;
        StageCache bottleneck;
        std::vector<typename UpConv2x2<T>::Cache> up;
        std::vector<StageCache> dec;
        typename Conv2d<T>::Cache head;
    };

    UNet() = default;
    UNet(const UNetConfig& config, std::uint64_t seed);

    // Inference: no dropout, no caches.
    Tensor<T> forward(const Tensor<T>& x) const;
    // Training forward. Dropout is active when rng is non-null.
    Tensor<T> forward(const Tensor<T>& x, Tape& tape, Rng* rng) const;
    // Accumulates parameter gradients; returns the gradient w.r.t. the input.
    Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape);

    ParamList<T> parameters();
    const UNetConfig& config() const { return config_; }

private:
    Tensor<T> run_stage(const Stage& s, const Tensor<T>& x, StageCache* cache) const;
    Tensor<T> back_stage(Stage& s, Tensor<T> grad, const StageCache& cache);

    UNetConfig config_;
    std::vector<Stage> enc_;
    Stage bottleneck_;
    std::vector<UpConv2x2<T>> up_;
    std::vector<Stage> dec_;
    Conv2d<T> head_;
    Dropout2d<T> dropout_;
};

}  // namespace oodcal::nn
