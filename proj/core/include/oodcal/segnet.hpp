#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/augment.hpp"
#include "oodcal/nn/unet.hpp"
#include "oodcal/types.hpp"

namespace oodcal {

// Anything that maps an image slice to class logits. The calibration side
// only ever sees models through this interface.
class LogitModel {
public:
    virtual ~LogitModel() = default;
    virtual LogitMap forward(const ImageSlice& x) const = 0;
    virtual std::size_t classes() const = 0;
};

using LabeledSlice = std::pair<ImageSlice, LabelMap>;

}  // namespace oodcal

namespace oodcal::segnet {

inline constexpr const char* checkpoint_version = "segnet-1";

struct SegModelConfig {
    std::size_t depth = 3;
    std::size_t base_channels = 16;
    std::size_t classes = 4;
    std::uint64_t seed = 0;

    nn::UNetConfig unet() const;
};

struct SegTrainConfig {
    int epochs = 800;
    double lr = 1e-3;
    std::size_t batch_size = 4;
    int val_every = 1;
    std::uint64_t seed = 0;  // shuffling, augmentation
};

class SegNet : public LogitModel {
public:
    SegNet() = default;
    explicit SegNet(const SegModelConfig& config);

    // Deterministic; throws on a non 1 x M x N input or M, N not divisible by 2^depth.
    LogitMap forward(const ImageSlice& x) const override;
    std::size_t classes() const override { return config_.classes; }

    const SegModelConfig& config() const { return config_; }
    nn::UNet<float>& network() { return net_; }
    const nn::UNet<float>& network() const { return net_; }

    // FNV-1a over the weights; identifies a frozen model in cache keys.
    std::uint64_t hash() const;

    // <dir>/config.json and <dir>/weights/ (flat float32 tensor).
    void save(const std::filesystem::path& dir) const;
    static SegNet load(const std::filesystem::path& dir);

private:
    SegModelConfig config_;
    nn::UNet<float> net_;
};

struct TrainLog {
    std::vector<double> train_loss;
    std::vector<double> val_loss;  // one entry per validation pass
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

struct SegTrainResult {
    SegNet model;
    TrainLog log;
};

// Cross-entropy training with the given augmentation policy (geometric and
// photometric). Keeps the weights of the best validation epoch; with an empty
// validation set the final weights are kept. Throws DivergenceError on a
// non-finite loss.
SegTrainResult train_segmenter(const std::vector<LabeledSlice>& train, const std::vector<LabeledSlice>& val,
                               const augment::AugmentationPolicy& policy, const SegModelConfig& model,
                               const SegTrainConfig& training);

double mean_cross_entropy(const LogitModel& model, const std::vector<LabeledSlice>& slices);

void to_json(nlohmann::json& j, const SegModelConfig& c);
void from_json(const nlohmann::json& j, SegModelConfig& c);
void to_json(nlohmann::json& j, const SegTrainConfig& c);
void from_json(const nlohmann::json& j, SegTrainConfig& c);
void to_json(nlohmann::json& j, const TrainLog& log);

}  // namespace oodcal::segnet
