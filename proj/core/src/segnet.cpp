#include "oodcal/segnet.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "oodcal/json_util.hpp"
#include "oodcal/nn/loss.hpp"
#include "oodcal/nn/optim.hpp"
#include "oodcal/random.hpp"
#include "oodcal/softmax.hpp"

namespace oodcal::segnet {

nn::UNetConfig SegModelConfig::unet() const {
    nn::UNetConfig u;
    u.in_channels = 1;
    u.out_channels = classes;
    u.depth = depth;
    u.base_channels = base_channels;
    u.kernel = 3;
    u.encoder_dropout = 0.0;
    return u;
}

SegNet::SegNet(const SegModelConfig& config) : config_(config), net_(config.unet(), derive_seed(config.seed, "segnet")) {
    require(config.classes >= 2, "SegNet: need at least 2 classes");
}

LogitMap SegNet::forward(const ImageSlice& x) const {
    require(x.data().channels() == 1, "SegNet: input must be 1 x M x N");
    return LogitMap(net_.forward(x.data()));
}

std::uint64_t SegNet::hash() const {
    auto params = const_cast<nn::UNet<float>&>(net_).parameters();
    const std::vector<float> flat = nn::flatten_parameters(params);
    return fnv1a(std::string_view(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(float)));
}

void SegNet::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j = {{"version", checkpoint_version}, {"model", config_}};
    std::ofstream(dir / "config.json") << j.dump(2) << '\n';
    nn::save_parameters(dir / "weights", const_cast<nn::UNet<float>&>(net_).parameters());
}

SegNet SegNet::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    require(bool(in), "SegNet: no checkpoint at " + dir.string());
    const auto j = nlohmann::json::parse(in);
    require(j.value("version", "") == checkpoint_version, "SegNet: unsupported checkpoint version in " + dir.string());
    SegNet model(j.at("model").get<SegModelConfig>());
    nn::restore_parameters(dir / "weights", model.net_.parameters());
    return model;
}

double mean_cross_entropy(const LogitModel& model, const std::vector<LabeledSlice>& slices) {
    require(!slices.empty(), "mean_cross_entropy: no slices");
    double total = 0.0;
    for (const auto& [x, y] : slices) {
        total += nn::softmax_cross_entropy(model.forward(x).data(), y.indices()).loss;
    }
    return total / static_cast<double>(slices.size());
}

SegTrainResult train_segmenter(const std::vector<LabeledSlice>& train, const std::vector<LabeledSlice>& val,
                               const augment::AugmentationPolicy& policy, const SegModelConfig& model_config,
                               const SegTrainConfig& cfg) {
    require(!train.empty(), "train_segmenter: empty training set");
    require(cfg.epochs >= 1 && cfg.batch_size >= 1 && cfg.lr > 0.0, "train_segmenter: bad training config");
    for (const auto& [x, y] : train) {
        require(y.classes() == model_config.classes, "train_segmenter: label class count differs from the model");
    }
    for (const auto& tr : train) {
        for (const auto& va : val) {
            require(tr.first.case_id() != va.first.case_id() || tr.first.case_id().empty(),
                    "train_segmenter: case " + tr.first.case_id() + " is in both splits");
        }
    }
    policy.validate();

    SegTrainResult result{SegNet(model_config), {}};
    auto& net = result.model.network();
    auto params = net.parameters();
    nn::Adam<float> opt(params, cfg.lr);
    std::vector<float> best;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, "shuffle"));
    std::uint64_t sample = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            opt.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const auto& [x, y] = train[order[b]];
                const auto aug = augment::sample_params(policy, derive_seed(cfg.seed, "augment", sample++));
                auto [xg, yg] = augment::apply_geometric(x, y, aug);
                const ImageSlice xa = augment::apply_photometric(xg, aug);
                nn::UNet<float>::Tape tape;
                const TensorF scores = net.forward(xa.data(), tape, nullptr);
                auto loss = nn::softmax_cross_entropy(scores, yg.indices());
                if (!std::isfinite(loss.loss)) {
                    throw DivergenceError("train_segmenter: non-finite loss at epoch " + std::to_string(epoch));
                }
                epoch_loss += loss.loss;
                net.backward(loss.grad, tape);
            }
            opt.step(1.0 / static_cast<double>(end - start));
        }
        result.log.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

        const bool last = epoch + 1 == cfg.epochs;
        if (!val.empty() && ((epoch + 1) % std::max(1, cfg.val_every) == 0 || last)) {
            const double v = mean_cross_entropy(result.model, val);
            if (!std::isfinite(v)) throw DivergenceError("train_segmenter: non-finite validation loss");
            result.log.val_loss.push_back(v);
            if (result.log.best_epoch < 0 || v < result.log.best_val_loss) {
                result.log.best_epoch = epoch;
                result.log.best_val_loss = v;
                best = nn::flatten_parameters(params);
            }
        }
    }
    if (!best.empty()) nn::load_parameters(params, best);
    return result;
}

void to_json(nlohmann::json& j, const SegModelConfig& c) {
    j = {{"depth", c.depth}, {"base_channels", c.base_channels}, {"classes", c.classes}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SegModelConfig& c) {
    read_optional(j, "depth", c.depth);
    read_optional(j, "base_channels", c.base_channels);
    read_optional(j, "classes", c.classes);
    read_optional(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const SegTrainConfig& c) {
    j = {{"epochs", c.epochs}, {"lr", c.lr}, {"batch_size", c.batch_size}, {"val_every", c.val_every}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SegTrainConfig& c) {
    read_optional(j, "epochs", c.epochs);
    read_optional(j, "lr", c.lr);
    read_optional(j, "batch_size", c.batch_size);
    read_optional(j, "val_every", c.val_every);
    read_optional(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const TrainLog& log) {
    j = {{"train_loss", log.train_loss},
         {"val_loss", log.val_loss},
         {"best_epoch", log.best_epoch},
         {"best_val_loss", log.best_val_loss}};
}

}  // namespace oodcal::segnet
