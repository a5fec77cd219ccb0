#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oodcal/aleatoric.hpp"
#include "oodcal/augment.hpp"
#include "oodcal/nn/layers.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/shapeprior.hpp"
#include "oodcal/types.hpp"

namespace oodcal::calib {

inline constexpr const char* checkpoint_version = "calibnet-1";

enum class CalibratorKind { uncalibrated, global_ts, lts, alea, proposed };

std::string to_string(CalibratorKind kind);
// Accepts the enum names and the CLI short forms uc, ts.
CalibratorKind parse_calibrator(const std::string& name);
// Every kind except alea keeps the per-pixel argmax of softmax(z).
inline bool preserves_argmax(CalibratorKind k) { return k != CalibratorKind::alea; }

// Branch indices, in concatenation order.
enum Branch : std::size_t { residual_branch = 0, mu_branch, var_branch, logit_branch, image_branch, branch_count };

struct CalibNetConfig {
    std::size_t classes = 4;
    std::size_t stem_channels = 8;
    std::size_t kernel = 3;
    std::size_t width = 16;
    std::size_t attention_hidden = 8;
    std::size_t residual_blocks = 2;
    double floor = 1e-3;
    bool use_susceptibility = true;  // mu and var branches
    bool use_shape = true;           // residual branch
    std::uint64_t seed = 0;

    bool active(std::size_t branch) const;
    std::size_t branch_channels(std::size_t branch) const;
    std::size_t active_branches() const;
    // Same architecture with both extra branches off: local temperature scaling.
    CalibNetConfig lts() const;
    // "proposed", "lts", "susceptibility-only" or "shape-only".
    std::string variant_name() const;
    void validate() const;
};

template <typename T>
struct CalibInputs {
    Tensor<T> residual, mu, var, z, x;  // inactive branches may be left empty

    const Tensor<T>& branch(std::size_t b) const;
    template <typename U>
    CalibInputs<U> cast() const {
        auto c = [](const Tensor<T>& t) { return t.template cast<U>(); };
        return {c(residual), c(mu), c(var), c(z), c(x)};
    }
};

// g_phi: per-branch k x k conv stems, SE channel attention over the
// concatenation, 1 x 1 merge, residual blocks, 1-channel head, softplus + floor.
template <typename T>
class CalibNet {
public:
    struct Block {
        nn::Conv2d<T> a, b;
    };
    struct BlockCache {
        typename nn::Conv2d<T>::Cache a, b;
        Tensor<T> out_a, out;
    };
    struct Cache {
        std::vector<typename nn::Conv2d<T>::Cache> stem;
        std::vector<Tensor<T>> stem_out;
        typename nn::ChannelAttention<T>::Cache attention;
        typename nn::Conv2d<T>::Cache merge;
        Tensor<T> merge_out;
        std::vector<BlockCache> blocks;
        typename nn::Conv2d<T>::Cache head;
        Tensor<T> pre_softplus;
    };

    CalibNet() = default;
    explicit CalibNet(const CalibNetConfig& config);

    // Temperature map 1 x M x N. With a cache, records what backward() needs.
    Tensor<T> forward(const CalibInputs<T>& in, Cache* cache = nullptr) const;
    // Pre-softplus head output h, T = softplus(h) + floor.
    Tensor<T> head_output(const CalibInputs<T>& in) const;
    // Accumulates parameter gradients from dL/dT.
    void backward(const Tensor<T>& grad_temperature, const Cache& cache);

    nn::ParamList<T> parameters();
    const CalibNetConfig& config() const { return config_; }
    // Head bias, exposed for tests that pin the head output.
    nn::Conv2d<T>& head() { return head_; }

private:
    Tensor<T> trunk(const CalibInputs<T>& in, Cache* cache) const;

    CalibNetConfig config_;
    std::vector<nn::Conv2d<T>> stems_;  // one per active branch, branch order
    std::vector<std::size_t> stem_branch_;
    nn::ChannelAttention<T> attention_;
    nn::Conv2d<T> merge_;
    std::vector<Block> blocks_;
    nn::Conv2d<T> head_;
};

// Model plus persistence.
class Calibrator {
public:
    Calibrator() = default;
    explicit Calibrator(const CalibNetConfig& config) : net_(config) {}

    CalibNet<float>& net() { return net_; }
    const CalibNet<float>& net() const { return net_; }
    const CalibNetConfig& config() const { return net_.config(); }

    void save(const std::filesystem::path& dir) const;
    static Calibrator load(const std::filesystem::path& dir);

private:
    CalibNet<float> net_;
};

struct Calibrated {
    TemperatureMap temperature;
    ProbabilityMap probability;
};

// T = g_phi(inputs); y^c = softmax(z / T) with T shared by all classes.
Calibrated calibrate(const CalibNet<float>& g, const CalibInputs<float>& inputs);

// Assembles the branch inputs. Branches the config does not use are left empty.
CalibInputs<float> make_inputs(const CalibNetConfig& config, const LogitMap& z, const ImageSlice& x,
                               const aleatoric::SusceptibilityEstimate* susceptibility,
                               const shapeprior::ShapeResidual* residual);

struct CalibTrainConfig {
    int epochs = 800;
    double lr = 1e-3;
    std::size_t batch_size = 4;
    std::size_t n_aug = 6;  // augmentations per iteration for (mu, var)
    // Draw one training augmentation of (x, y) per sample and iteration, as
    // for the segmenter; z, the shape residual and (mu, var) follow the
    // augmented image. Off: the slices are used as given.
    bool augment_inputs = true;
    std::uint64_t seed = 0;
};

struct CalibTrainResult {
    std::vector<Calibrator> models;          // one per variant, same order
    std::vector<std::vector<double>> loss;   // per variant, per epoch
};

// Trains several g_phi variants in lockstep on the same sample stream: each
// iteration draws fresh augmentations, computes (mu, var) once and feeds every
// variant. f_theta and s_psi are only evaluated. Loss is the pixel-mean NLL of
// softmax(z / T). `policy` is the training augmentation; (mu, var) always use
// its photometric part.
CalibTrainResult train_calibrators(const std::vector<CalibNetConfig>& variants, const LogitModel& segmenter,
                                   const shapeprior::ShapePrior* prior, const std::vector<LabeledSlice>& slices,
                                   const augment::AugmentationPolicy& policy, const CalibTrainConfig& config);

// Global temperature scaling: the scalar T in [0.05, 20] minimising the mean
// NLL of softmax(z / T), by golden-section search on log T.
double fit_global_ts(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels);
double fit_global_ts(const LogitModel& segmenter, const std::vector<LabeledSlice>& slices);
double temperature_nll(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels, double t);

void to_json(nlohmann::json& j, const CalibNetConfig& c);
void from_json(const nlohmann::json& j, CalibNetConfig& c);
void to_json(nlohmann::json& j, const CalibTrainConfig& c);
void from_json(const nlohmann::json& j, CalibTrainConfig& c);

}  // namespace oodcal::calib
