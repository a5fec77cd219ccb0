#include "oodcal/shapeprior.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "oodcal/json_util.hpp"
#include "oodcal/nn/loss.hpp"
#include "oodcal/nn/optim.hpp"
#include "oodcal/random.hpp"
#include "oodcal/softmax.hpp"

namespace oodcal::shapeprior {

void ShapePriorConfig::validate() const {
    require(depth >= 1 && base_channels >= 1, "ShapePriorConfig: bad architecture");
    require(encoder_dropout >= 0.0 && encoder_dropout < 1.0, "ShapePriorConfig: dropout must lie in [0, 1)");
    require(epochs >= 1 && lr > 0.0 && batch_size >= 1, "ShapePriorConfig: bad training parameters");
    require(input_flip_fraction >= 0.0 && input_flip_fraction < 1.0, "ShapePriorConfig: bad flip fraction");
    require(label_input_share >= 0.0 && label_input_share <= 1.0, "ShapePriorConfig: label_input_share must lie in [0, 1]");
    require(label_noise >= 0.0 && label_noise <= 1.0, "ShapePriorConfig: label_noise must lie in [0, 1]");
    require(input_squash >= 0.0, "ShapePriorConfig: input_squash must be >= 0");
}

ShapeResidual::ShapeResidual(TensorD data) : data_(std::move(data)) {
    require(data_.rank() == 3, "ShapeResidual: expected C x M x N");
    for (double v : data_.values()) {
        require(std::isfinite(v) && v >= -1.0 - 1e-12 && v <= 1.0 + 1e-12, "ShapeResidual: entry outside [-1, 1]");
    }
}

namespace {

nn::UNetConfig unet_config(std::size_t classes, const ShapePriorConfig& c) {
    nn::UNetConfig u;
    u.in_channels = classes;
    u.out_channels = classes;
    u.depth = c.depth;
    u.base_channels = c.base_channels;
    u.kernel = 3;
    u.encoder_dropout = c.encoder_dropout;
    return u;
}

TensorF squash(TensorF z, double m) {
    if (m <= 0.0) return z;
    for (float& v : z.storage()) v = static_cast<float>(m * std::tanh(static_cast<double>(v) / m));
    return z;
}

}  // namespace

ShapePrior::ShapePrior(std::size_t classes, const ShapePriorConfig& config)
    : classes_(classes), config_(config), net_(unet_config(classes, config), derive_seed(config.seed, "shapeprior")) {
    require(classes >= 2, "ShapePrior: need at least 2 classes");
    config.validate();
}

TensorF ShapePrior::scores(const LogitMap& z) const {
    require(z.classes() == classes_, "ShapePrior: logit class count differs from the model");
    return net_.forward(squash(z.data(), config_.input_squash));
}

ProbabilityMap ShapePrior::probabilities(const LogitMap& z) const { return softmax(LogitMap(scores(z))); }

std::uint64_t ShapePrior::hash() const {
    const auto flat = nn::flatten_parameters(const_cast<nn::UNet<float>&>(net_).parameters());
    return fnv1a(std::string_view(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(float)));
}

void ShapePrior::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j = {{"version", checkpoint_version}, {"classes", classes_}, {"config", config_}};
    std::ofstream(dir / "config.json") << j.dump(2) << '\n';
    nn::save_parameters(dir / "weights", const_cast<nn::UNet<float>&>(net_).parameters());
}

ShapePrior ShapePrior::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    require(bool(in), "ShapePrior: no checkpoint at " + dir.string());
    const auto j = nlohmann::json::parse(in);
    require(j.value("version", "") == checkpoint_version, "ShapePrior: unsupported checkpoint version");
    ShapePrior prior(j.at("classes").get<std::size_t>(), j.at("config").get<ShapePriorConfig>());
    nn::restore_parameters(dir / "weights", prior.net_.parameters());
    return prior;
}

namespace {

TensorF flip_inputs(const TensorF& z, double fraction, float margin, Rng& rng) {
    TensorF out = z;
    const std::size_t c = z.channels(), plane = z.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        if (!rng.bernoulli(fraction)) continue;
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(c) - 1));
        for (std::size_t j = 0; j < c; ++j) out[j * plane + p] = j == k ? margin : -margin;
    }
    return out;
}

}  // namespace

ShapeTrainResult train_shape_prior(const std::vector<LogitMap>& logits, const std::vector<LabelMap>& labels,
                                   const ShapePriorConfig& config) {
    require(!logits.empty() && logits.size() == labels.size(), "train_shape_prior: need matching logits and labels");
    config.validate();
    const std::size_t classes = logits.front().classes();
    ShapeTrainResult result{ShapePrior(classes, config), {}};
    auto& net = result.model.network();
    auto params = net.parameters();
    nn::Adam<float> opt(params, config.lr);

    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(config.seed, "shuffle"));
    Rng dropout(derive_seed(config.seed, "dropout"));
    Rng flips(derive_seed(config.seed, "input-flips"));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        }
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            opt.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                require(logits[i].classes() == classes && labels[i].classes() == classes,
                        "train_shape_prior: inconsistent class counts");
                nn::UNet<float>::Tape tape;
                const auto margin = static_cast<float>(config.input_flip_margin);
                TensorF input;
                if (config.label_input_share > 0.0 && flips.bernoulli(config.label_input_share)) {
                    const auto noisy = salt_and_pepper(labels[i], config.label_noise, flips.next());
                    input = label_logits(noisy, margin).data();
                } else if (config.input_flip_fraction > 0.0) {
                    input = flip_inputs(logits[i].data(), config.input_flip_fraction, margin, flips);
                } else {
                    input = logits[i].data();
                }
                const TensorF scores = net.forward(squash(std::move(input), config.input_squash), tape, &dropout);
                auto loss = nn::softmax_cross_entropy(scores, labels[i].indices());
                if (!std::isfinite(loss.loss)) {
                    throw DivergenceError("train_shape_prior: non-finite loss at epoch " + std::to_string(epoch));
                }
                total += loss.loss;
                // The input gradient is discarded: f_theta is never updated.
                net.backward(loss.grad, tape);
            }
            opt.step(1.0 / static_cast<double>(end - start));
        }
        result.loss.push_back(total / static_cast<double>(order.size()));
    }
    return result;
}

ShapeTrainResult train_shape_prior(const LogitModel& segmenter, const std::vector<LabeledSlice>& slices,
                                   const ShapePriorConfig& config) {
    std::vector<LogitMap> logits;
    std::vector<LabelMap> labels;
    for (const auto& [x, y] : slices) {
        logits.push_back(segmenter.forward(x));
        labels.push_back(y);
    }
    return train_shape_prior(logits, labels, config);
}

ShapeResidual shape_residual(const ProbabilityMap& shape, const LogitMap& z) {
    const ProbabilityMap pu = softmax(z);
    require(shape.data().same_shape(pu.data()), "shape_residual: shape output and logits differ in shape");
    TensorD r(pu.data().shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = shape.data()[i] - pu.data()[i];
    return ShapeResidual(std::move(r));
}

ShapeOutput shape_residual(const ShapePrior& prior, const LogitMap& z) {
    ProbabilityMap ys = prior.probabilities(z);
    ShapeResidual r = shape_residual(ys, z);
    return {std::move(ys), std::move(r)};
}

LogitMap label_logits(const LabelMap& y, float margin) {
    TensorF z(y.data().shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = y.data()[i] > 0.5f ? margin : -margin;
    return LogitMap(std::move(z));
}

LabelMap salt_and_pepper(const LabelMap& y, double fraction, std::uint64_t seed) {
    require(fraction >= 0.0 && fraction <= 1.0, "salt_and_pepper: fraction must lie in [0, 1]");
    Rng rng(seed);
    std::vector<std::uint8_t> idx = y.indices();
    const auto c = static_cast<std::int64_t>(y.classes());
    for (auto& v : idx) {
        if (!rng.bernoulli(fraction)) continue;
        // A different class, uniformly.
        auto k = rng.uniform_int(0, c - 2);
        if (k >= v) ++k;
        v = static_cast<std::uint8_t>(k);
    }
    return LabelMap::from_indices(idx, y.classes(), y.height(), y.width());
}

void to_json(nlohmann::json& j, const ShapePriorConfig& c) {
    j = {{"depth", c.depth},
         {"base_channels", c.base_channels},
         {"encoder_dropout", c.encoder_dropout},
         {"epochs", c.epochs},
         {"lr", c.lr},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"input_flip_fraction", c.input_flip_fraction},
         {"input_flip_margin", c.input_flip_margin},
         {"label_input_share", c.label_input_share},
         {"label_noise", c.label_noise},
         {"input_squash", c.input_squash}};
}

void from_json(const nlohmann::json& j, ShapePriorConfig& c) {
    read_optional(j, "depth", c.depth);
    read_optional(j, "base_channels", c.base_channels);
    read_optional(j, "encoder_dropout", c.encoder_dropout);
    read_optional(j, "epochs", c.epochs);
    read_optional(j, "lr", c.lr);
    read_optional(j, "batch_size", c.batch_size);
    read_optional(j, "seed", c.seed);
    read_optional(j, "input_flip_fraction", c.input_flip_fraction);
    read_optional(j, "input_flip_margin", c.input_flip_margin);
    read_optional(j, "label_input_share", c.label_input_share);
    read_optional(j, "label_noise", c.label_noise);
    read_optional(j, "input_squash", c.input_squash);
}

}  // namespace oodcal::shapeprior
