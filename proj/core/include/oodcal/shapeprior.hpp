#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/nn/unet.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/types.hpp"

namespace oodcal::shapeprior {

inline constexpr const char* checkpoint_version = "shapeprior-1";

struct ShapePriorConfig {
    std::size_t depth = 2;
    std::size_t base_channels = 8;
    double encoder_dropout = 0.5;  // channel dropout in the encoder, training only
    int epochs = 800;
    double lr = 1e-3;
    std::size_t batch_size = 4;
    std::uint64_t seed = 0;
    // Fraction of training-input pixels whose logits are replaced by a random
    // class's +-margin pattern. 0 trains on f's logits as they are.
    double input_flip_fraction = 0.0;
    double input_flip_margin = 5.0;
    // Share of training samples whose input is instead the +-margin logits of
    // the label with label_noise of its pixels flipped to another class.
    double label_input_share = 0.25;
    double label_noise = 0.05;
    // Inputs enter the U-Net as m * tanh(z / m); f's logits can reach the
    // hundreds. 0 feeds z unchanged.
    double input_squash = 4.0;

    void validate() const;
};

// y^s - y^u, C x M x N, entries in [-1, 1].
class ShapeResidual {
public:
    ShapeResidual() = default;
    explicit ShapeResidual(TensorD data);
    const TensorD& data() const { return data_; }

private:
    TensorD data_;
};

// Denoising autoencoder s_psi: logits z (C channels) -> shape scores (C channels).
class ShapePrior {
public:
    ShapePrior() = default;
    ShapePrior(std::size_t classes, const ShapePriorConfig& config);

    // Inference, dropout off.
    TensorF scores(const LogitMap& z) const;
    ProbabilityMap probabilities(const LogitMap& z) const;

    std::size_t classes() const { return classes_; }
    const ShapePriorConfig& config() const { return config_; }
    nn::UNet<float>& network() { return net_; }
    std::uint64_t hash() const;

    void save(const std::filesystem::path& dir) const;
    static ShapePrior load(const std::filesystem::path& dir);

private:
    std::size_t classes_ = 0;
    ShapePriorConfig config_;
    nn::UNet<float> net_;
};

struct ShapeTrainResult {
    ShapePrior model;
    std::vector<double> loss;  // per epoch
};

// Trains s_psi on the (frozen) segmenter's logits of the given slices,
// minimising the pixel-mean cross entropy of softmax(s_psi(z)) against y.
// The segmenter is only evaluated, never updated.
ShapeTrainResult train_shape_prior(const LogitModel& segmenter, const std::vector<LabeledSlice>& slices,
                                   const ShapePriorConfig& config);
// Same, on precomputed logits.
ShapeTrainResult train_shape_prior(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels,
                                   const ShapePriorConfig& config);

struct ShapeOutput {
    ProbabilityMap shape;  // y^s = softmax(s_psi(z))
    ShapeResidual residual;
};

ShapeOutput shape_residual(const ShapePrior& prior, const LogitMap& z);
// Residual from an already computed y^s.
ShapeResidual shape_residual(const ProbabilityMap& shape, const LogitMap& z);

// Logits +margin on the label class and -margin elsewhere.
LogitMap label_logits(const LabelMap& y, float margin);
// Replaces the class of a `fraction` of pixels by a different random class.
LabelMap salt_and_pepper(const LabelMap& y, double fraction, std::uint64_t seed);

void to_json(nlohmann::json& j, const ShapePriorConfig& c);
void from_json(const nlohmann::json& j, ShapePriorConfig& c);

}  // namespace oodcal::shapeprior
