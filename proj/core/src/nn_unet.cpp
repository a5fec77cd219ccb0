#include "oodcal/nn/unet.hpp"

#include <nlohmann/json.hpp>

#include "oodcal/json_util.hpp"

namespace oodcal::nn {

void to_json(nlohmann::json& j, const UNetConfig& c) {
    j = {{"in_channels", c.in_channels},   {"out_channels", c.out_channels}, {"depth", c.depth},
         {"base_channels", c.base_channels}, {"kernel", c.kernel},           {"encoder_dropout", c.encoder_dropout}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
    read_optional(j, "in_channels", c.in_channels);
    read_optional(j, "out_channels", c.out_channels);
    read_optional(j, "depth", c.depth);
    read_optional(j, "base_channels", c.base_channels);
    read_optional(j, "kernel", c.kernel);
    read_optional(j, "encoder_dropout", c.encoder_dropout);
}

template <typename T>
UNet<T>::UNet(const UNetConfig& config, std::uint64_t seed) : config_(config) {
    require(config.depth >= 1, "UNet: depth must be >= 1");
    require(config.base_channels >= 1 && config.in_channels >= 1 && config.out_channels >= 1,
            "UNet: channel counts must be positive");
    require(config.encoder_dropout >= 0.0 && config.encoder_dropout < 1.0, "UNet: dropout must lie in [0, 1)");
    const std::size_t k = config.kernel;
    auto width = [&](std::size_t level) { return config.base_channels << level; };
    auto stage = [&](const std::string& name, std::size_t in, std::size_t out) {
        return Stage{Conv2d<T>(name + ".a", in, out, k, derive_seed(seed, name + ".a")),
                     Conv2d<T>(name + ".b", out, out, k, derive_seed(seed, name + ".b"))};
    };
    for (std::size_t l = 0; l < config.depth; ++l) {
        const std::size_t in = l == 0 ? config.in_channels : width(l - 1);
        enc_.push_back(stage("enc" + std::to_string(l), in, width(l)));
    }
    bottleneck_ = stage("bottleneck", width(config.depth - 1), width(config.depth));
    for (std::size_t l = 0; l < config.depth; ++l) {
        const std::string name = "up" + std::to_string(l);
        up_.emplace_back(name, width(l + 1), width(l), derive_seed(seed, name));
        dec_.push_back(stage("dec" + std::to_string(l), 2 * width(l), width(l)));
    }
    head_ = Conv2d<T>("head", width(0), config.out_channels, 1, derive_seed(seed, "head"));
    dropout_.rate = config.encoder_dropout;
}

template <typename T>
Tensor<T> UNet<T>::run_stage(const Stage& s, const Tensor<T>& x, StageCache* cache) const {
    Tensor<T> a = s.a.forward(x, cache ? &cache->a : nullptr);
    relu_inplace(a);
    Tensor<T> b = s.b.forward(a, cache ? &cache->b : nullptr);
    relu_inplace(b);
    if (cache) {
        cache->out_a = std::move(a);
        cache->out_b = b;
    }
    return b;
}

template <typename T>
Tensor<T> UNet<T>::back_stage(Stage& s, Tensor<T> grad, const StageCache& cache) {
    relu_backward_inplace(grad, cache.out_b);
    Tensor<T> ga = s.b.backward(grad, cache.b);
    relu_backward_inplace(ga, cache.out_a);
    return s.a.backward(ga, cache.a);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x) const {
    const std::size_t factor = std::size_t{1} << config_.depth;
    require(x.rank() == 3 && x.channels() == config_.in_channels,
            "UNet: expected " + std::to_string(config_.in_channels) + " input channels, got " + shape_string(x.shape()));
    require(x.height() % factor == 0 && x.width() % factor == 0,
            "UNet: spatial size must be divisible by " + std::to_string(factor));
    std::vector<Tensor<T>> skips;
    Tensor<T> h = x;
    for (const auto& s : enc_) {
        h = run_stage(s, h, nullptr);
        skips.push_back(h);
        h = MaxPool2<T>::forward(h);
    }
    h = run_stage(bottleneck_, h, nullptr);
    for (std::size_t l = config_.depth; l-- > 0;) {
        Tensor<T> up = up_[l].forward(h);
        h = run_stage(dec_[l], concat_channels<T>({&skips[l], &up}), nullptr);
    }
    return head_.forward(h);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x, Tape& tape, Rng* rng) const {
    const std::size_t factor = std::size_t{1} << config_.depth;
    require(x.rank() == 3 && x.channels() == config_.in_channels, "UNet: input channel mismatch");
    require(x.height() % factor == 0 && x.width() % factor == 0,
            "UNet: spatial size must be divisible by " + std::to_string(factor));
    const std::size_t d = config_.depth;
    tape.enc.assign(d, {});
    tape.pool.assign(d, {});
    tape.up.assign(d, {});
    tape.dec.assign(d, {});
    std::vector<Tensor<T>> skips;
    Tensor<T> h = x;
    for (std::size_t l = 0; l < d; ++l) {
        h = run_stage(enc_[l], h, &tape.enc[l]);
        h = dropout_.forward(h, rng, &tape.enc[l].drop);
        skips.push_back(h);
        h = MaxPool2<T>::forward(h, &tape.pool[l]);
    }
    h = run_stage(bottleneck_, h, &tape.bottleneck);
    h = dropout_.forward(h, rng, &tape.bottleneck.drop);
    for (std::size_t l = d; l-- > 0;) {
        Tensor<T> up = up_[l].forward(h, &tape.up[l]);
        h = run_stage(dec_[l], concat_channels<T>({&skips[l], &up}), &tape.dec[l]);
    }
    return head_.forward(h, &tape.head);
}

template <typename T>
Tensor<T> UNet<T>::backward(const Tensor<T>& grad_out, const Tape& tape) {
    const std::size_t d = config_.depth;
    Tensor<T> g = head_.backward(grad_out, tape.head);
    std::vector<Tensor<T>> skip_grads(d);
    for (std::size_t l = 0; l < d; ++l) {
        Tensor<T> gc = back_stage(dec_[l], std::move(g), tape.dec[l]);
        const std::size_t w = config_.base_channels << l;
        auto parts = split_channels(gc, {w, w});
        skip_grads[l] = std::move(parts[0]);
        g = up_[l].backward(parts[1], tape.up[l]);
    }
    g = dropout_.backward(g, tape.bottleneck.drop);
    g = back_stage(bottleneck_, std::move(g), tape.bottleneck);
    for (std::size_t l = d; l-- > 0;) {
        g = MaxPool2<T>::backward(g, tape.pool[l]);
        add_inplace(g, skip_grads[l]);
        g = dropout_.backward(g, tape.enc[l].drop);
        g = back_stage(enc_[l], std::move(g), tape.enc[l]);
    }
    return g;
}

template <typename T>
ParamList<T> UNet<T>::parameters() {
    ParamList<T> out;
    for (auto& s : enc_) {
        s.a.collect(out);
        s.b.collect(out);
    }
    bottleneck_.a.collect(out);
    bottleneck_.b.collect(out);
    for (std::size_t l = 0; l < up_.size(); ++l) {
        up_[l].collect(out);
        dec_[l].a.collect(out);
        dec_[l].b.collect(out);
    }
    head_.collect(out);
    return out;
}

template class UNet<float>;
template class UNet<double>;

}  // namespace oodcal::nn
