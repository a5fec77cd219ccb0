#include "oodcal/calibnet.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <tuple>

#include <nlohmann/json.hpp>

#include "oodcal/json_util.hpp"
#include "oodcal/nn/loss.hpp"
#include "oodcal/nn/optim.hpp"
#include "oodcal/random.hpp"
#include "oodcal/softmax.hpp"

namespace oodcal::calib {

std::string to_string(CalibratorKind kind) {
    switch (kind) {
        case CalibratorKind::uncalibrated: return "uncalibrated";
        case CalibratorKind::global_ts: return "global_ts";
        case CalibratorKind::lts: return "lts";
        case CalibratorKind::alea: return "alea";
        case CalibratorKind::proposed: return "proposed";
    }
    return "?";
}

CalibratorKind parse_calibrator(const std::string& name) {
    if (name == "uncalibrated" || name == "uc") return CalibratorKind::uncalibrated;
    if (name == "global_ts" || name == "ts") return CalibratorKind::global_ts;
    if (name == "lts") return CalibratorKind::lts;
    if (name == "alea") return CalibratorKind::alea;
    if (name == "proposed") return CalibratorKind::proposed;
    throw Error("unknown calibrator kind '" + name + "' (expected proposed, lts, ts, alea or uc)");
}

bool CalibNetConfig::active(std::size_t branch) const {
    switch (branch) {
        case residual_branch: return use_shape;
        case mu_branch:
        case var_branch: return use_susceptibility;
        default: return branch < branch_count;
    }
}

std::size_t CalibNetConfig::branch_channels(std::size_t branch) const { return branch == image_branch ? 1 : classes; }

std::size_t CalibNetConfig::active_branches() const {
    std::size_t n = 0;
    for (std::size_t b = 0; b < branch_count; ++b) n += active(b);
    return n;
}

CalibNetConfig CalibNetConfig::lts() const {
    CalibNetConfig c = *this;
    c.use_susceptibility = false;
    c.use_shape = false;
    return c;
}

std::string CalibNetConfig::variant_name() const {
    if (use_susceptibility && use_shape) return "proposed";
    if (use_susceptibility) return "susceptibility-only";
    if (use_shape) return "shape-only";
    return "lts";
}

void CalibNetConfig::validate() const {
    require(classes >= 2, "CalibNetConfig: need at least 2 classes");
    require(stem_channels >= 1 && width >= 1 && attention_hidden >= 1, "CalibNetConfig: widths must be positive");
    require(kernel % 2 == 1, "CalibNetConfig: kernel must be odd");
    require(floor > 0.0, "CalibNetConfig: temperature floor must be positive");
}

template <typename T>
const Tensor<T>& CalibInputs<T>::branch(std::size_t b) const {
    switch (b) {
        case residual_branch: return residual;
        case mu_branch: return mu;
        case var_branch: return var;
        case logit_branch: return z;
        default: return x;
    }
}

template <typename T>
CalibNet<T>::CalibNet(const CalibNetConfig& config) : config_(config) {
    config.validate();
    const std::uint64_t seed = derive_seed(config.seed, "calibnet");
    static const char* names[] = {"stem.residual", "stem.mu", "stem.var", "stem.logits", "stem.image"};
    for (std::size_t b = 0; b < branch_count; ++b) {
        if (!config.active(b)) continue;
        // Seeds depend on the branch name only, so ablated variants share the
        // initial weights of the branches they keep.
        stems_.emplace_back(names[b], config.branch_channels(b), config.stem_channels, config.kernel,
                            derive_seed(seed, names[b]));
        stem_branch_.push_back(b);
    }
    const std::size_t cat = stems_.size() * config.stem_channels;
    attention_ = nn::ChannelAttention<T>("attention", cat, config.attention_hidden, derive_seed(seed, "attention"));
    merge_ = nn::Conv2d<T>("merge", cat, config.width, 1, derive_seed(seed, "merge"));
    for (std::size_t i = 0; i < config.residual_blocks; ++i) {
        const std::string n = "block" + std::to_string(i);
        blocks_.push_back({nn::Conv2d<T>(n + ".a", config.width, config.width, config.kernel, derive_seed(seed, n + ".a")),
                           nn::Conv2d<T>(n + ".b", config.width, config.width, config.kernel, derive_seed(seed, n + ".b"))});
    }
    head_ = nn::Conv2d<T>("head", config.width, 1, 1, derive_seed(seed, "head"));
    for (T& w : head_.weight.value.storage()) w *= T(0.1);
    // softplus(h) + floor = 1 at h = log(exp(1 - floor) - 1): start from the uncalibrated model.
    head_.bias.value[0] = static_cast<T>(std::log(std::expm1(1.0 - config.floor)));
}

template <typename T>
Tensor<T> CalibNet<T>::trunk(const CalibInputs<T>& in, Cache* cache) const {
    std::vector<Tensor<T>> outs;
    if (cache) {
        cache->stem.assign(stems_.size(), {});
        cache->blocks.assign(blocks_.size(), {});
    }
    std::size_t height = 0, width = 0;
    for (std::size_t i = 0; i < stems_.size(); ++i) {
        const auto b = stem_branch_[i];
        const Tensor<T>& input = in.branch(b);
        require(!input.empty(), "CalibNet: missing input for an active branch");
        require(input.rank() == 3 && input.channels() == config_.branch_channels(b),
                "CalibNet: branch input has shape " + shape_string(input.shape()));
        if (i == 0) {
            height = input.height();
            width = input.width();
        }
        require(input.height() == height && input.width() == width, "CalibNet: branch inputs are not aligned");
        Tensor<T> s = stems_[i].forward(input, cache ? &cache->stem[i] : nullptr);
        nn::relu_inplace(s);
        outs.push_back(std::move(s));
    }
    std::vector<const Tensor<T>*> parts;
    for (const auto& o : outs) parts.push_back(&o);
    const Tensor<T> cat = nn::concat_channels(parts);
    const Tensor<T> att = attention_.forward(cat, cache ? &cache->attention : nullptr);
    Tensor<T> h = merge_.forward(att, cache ? &cache->merge : nullptr);
    nn::relu_inplace(h);
    if (cache) cache->merge_out = h;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        BlockCache* bc = cache ? &cache->blocks[i] : nullptr;
        Tensor<T> a = blocks_[i].a.forward(h, bc ? &bc->a : nullptr);
        nn::relu_inplace(a);
        Tensor<T> r = blocks_[i].b.forward(a, bc ? &bc->b : nullptr);
        nn::add_inplace(r, h);
        nn::relu_inplace(r);
        if (bc) {
            bc->out_a = std::move(a);
            bc->out = r;
        }
        h = std::move(r);
    }
    if (cache) cache->stem_out = std::move(outs);
    return head_.forward(h, cache ? &cache->head : nullptr);
}

template <typename T>
Tensor<T> CalibNet<T>::head_output(const CalibInputs<T>& in) const {
    return trunk(in, nullptr);
}

template <typename T>
Tensor<T> CalibNet<T>::forward(const CalibInputs<T>& in, Cache* cache) const {
    Tensor<T> h = trunk(in, cache);
    Tensor<T> t = nn::softplus_floor(h, static_cast<T>(config_.floor));
    if (cache) cache->pre_softplus = std::move(h);
    return t;
}

template <typename T>
void CalibNet<T>::backward(const Tensor<T>& grad_temperature, const Cache& cache) {
    Tensor<T> g = nn::softplus_backward(grad_temperature, cache.pre_softplus);
    g = head_.backward(g, cache.head);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        const BlockCache& bc = cache.blocks[i];
        nn::relu_backward_inplace(g, bc.out);
        Tensor<T> ga = blocks_[i].b.backward(g, bc.b);
        nn::relu_backward_inplace(ga, bc.out_a);
        Tensor<T> gh = blocks_[i].a.backward(ga, bc.a);
        nn::add_inplace(g, gh);
    }
    nn::relu_backward_inplace(g, cache.merge_out);
    g = merge_.backward(g, cache.merge);
    g = attention_.backward(g, cache.attention);
    std::vector<std::size_t> widths(stems_.size(), config_.stem_channels);
    auto parts = nn::split_channels(g, widths);
    for (std::size_t i = 0; i < stems_.size(); ++i) {
        nn::relu_backward_inplace(parts[i], cache.stem_out[i]);
        stems_[i].backward(parts[i], cache.stem[i]);
    }
}

template <typename T>
nn::ParamList<T> CalibNet<T>::parameters() {
    nn::ParamList<T> out;
    for (auto& s : stems_) s.collect(out);
    attention_.collect(out);
    merge_.collect(out);
    for (auto& b : blocks_) {
        b.a.collect(out);
        b.b.collect(out);
    }
    head_.collect(out);
    return out;
}

template struct CalibInputs<float>;
template struct CalibInputs<double>;
template class CalibNet<float>;
template class CalibNet<double>;

void Calibrator::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j = {{"version", checkpoint_version}, {"kind", config().variant_name()}, {"config", config()}};
    std::ofstream(dir / "config.json") << j.dump(2) << '\n';
    nn::save_parameters(dir / "weights", const_cast<CalibNet<float>&>(net_).parameters());
}

Calibrator Calibrator::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    require(bool(in), "Calibrator: no checkpoint at " + dir.string());
    const auto j = nlohmann::json::parse(in);
    require(j.value("version", "") == checkpoint_version, "Calibrator: unsupported checkpoint version");
    Calibrator c(j.at("config").get<CalibNetConfig>());
    nn::restore_parameters(dir / "weights", c.net_.parameters());
    return c;
}

Calibrated calibrate(const CalibNet<float>& g, const CalibInputs<float>& inputs) {
    require(!inputs.z.empty(), "calibrate: logits missing");
    TemperatureMap t(g.forward(inputs));
    require(t.height() == inputs.z.height() && t.width() == inputs.z.width(), "calibrate: misaligned inputs");
    ProbabilityMap p = softmax_scaled(LogitMap(inputs.z), t);
    return {std::move(t), std::move(p)};
}

CalibInputs<float> make_inputs(const CalibNetConfig& config, const LogitMap& z, const ImageSlice& x,
                               const aleatoric::SusceptibilityEstimate* susceptibility,
                               const shapeprior::ShapeResidual* residual) {
    CalibInputs<float> in;
    in.z = z.data();
    in.x = x.data();
    if (config.use_susceptibility) {
        require(susceptibility != nullptr, "make_inputs: susceptibility branch active but no estimate given");
        in.mu = susceptibility->mu;
        in.var = susceptibility->var;
    }
    if (config.use_shape) {
        require(residual != nullptr, "make_inputs: shape branch active but no residual given");
        in.residual = residual->data().cast<float>();
    }
    return in;
}

CalibTrainResult train_calibrators(const std::vector<CalibNetConfig>& variants, const LogitModel& segmenter,
                                   const shapeprior::ShapePrior* prior, const std::vector<LabeledSlice>& slices,
                                   const augment::AugmentationPolicy& policy, const CalibTrainConfig& cfg) {
    require(!variants.empty(), "train_calibrators: no variants");
    require(!slices.empty(), "train_calibrators: empty training set");
    require(cfg.epochs >= 1 && cfg.batch_size >= 1 && cfg.n_aug >= 1 && cfg.lr > 0.0,
            "train_calibrators: bad training config");
    bool need_sus = false, need_shape = false;
    for (const auto& v : variants) {
        need_sus |= v.use_susceptibility;
        need_shape |= v.use_shape;
    }
    policy.validate();
    const augment::AugmentationPolicy photometric = policy.photometric_only();
    require(!need_shape || prior != nullptr, "train_calibrators: shape branch requested without a shape prior");

    // Without input augmentation z and the shape residual depend only on the
    // frozen networks and x, so they are computed once.
    std::vector<LogitMap> logits;
    std::vector<shapeprior::ShapeResidual> residuals;
    if (!cfg.augment_inputs) {
        for (const auto& [x, y] : slices) {
            logits.push_back(segmenter.forward(x));
            if (need_shape) residuals.push_back(shapeprior::shape_residual(*prior, logits.back()).residual);
        }
    }

    CalibTrainResult result;
    std::vector<nn::Adam<float>> opts;
    result.models.reserve(variants.size());
    for (const auto& v : variants) result.models.emplace_back(v);
    for (auto& m : result.models) opts.emplace_back(m.net().parameters(), cfg.lr);
    result.loss.assign(variants.size(), {});

    std::vector<std::size_t> order(slices.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, "shuffle"));
    std::uint64_t sample = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        }
        std::vector<double> totals(variants.size(), 0.0);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            for (auto& o : opts) o.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                ImageSlice x = slices[i].first;
                LabelMap y = slices[i].second;
                LogitMap z;
                std::optional<shapeprior::ShapeResidual> residual;
                if (cfg.augment_inputs) {
                    const auto params = augment::sample_params(policy, derive_seed(cfg.seed, "input", sample));
                    std::tie(x, y) = augment::apply_geometric(x, y, params);
                    x = augment::apply_photometric(x, params);
                    z = segmenter.forward(x);
                    if (need_shape) residual = shapeprior::shape_residual(*prior, z).residual;
                } else {
                    z = logits[i];
                    if (need_shape) residual = residuals[i];
                }
                aleatoric::SusceptibilityEstimate est;
                if (need_sus) {
                    est = aleatoric::estimate(segmenter, x, photometric, cfg.n_aug, derive_seed(cfg.seed, "augment", sample));
                }
                ++sample;
                for (std::size_t v = 0; v < variants.size(); ++v) {
                    auto& net = result.models[v].net();
                    const auto in = make_inputs(variants[v], z, x, need_sus ? &est : nullptr,
                                                residual ? &*residual : nullptr);
                    typename CalibNet<float>::Cache cache;
                    const TensorF t = net.forward(in, &cache);
                    auto loss = nn::temperature_nll(z.data(), t, y.indices());
                    if (!std::isfinite(loss.loss)) {
                        throw DivergenceError("train_calibrators: non-finite loss for " + variants[v].variant_name() +
                                              " at epoch " + std::to_string(epoch));
                    }
                    totals[v] += loss.loss;
                    net.backward(loss.grad, cache);
                }
            }
            for (auto& o : opts) o.step(1.0 / static_cast<double>(end - start));
        }
        for (std::size_t v = 0; v < variants.size(); ++v) {
            result.loss[v].push_back(totals[v] / static_cast<double>(order.size()));
        }
    }
    return result;
}

void to_json(nlohmann::json& j, const CalibNetConfig& c) {
    j = {{"classes", c.classes},
         {"stem_channels", c.stem_channels},
         {"kernel", c.kernel},
         {"width", c.width},
         {"attention_hidden", c.attention_hidden},
         {"residual_blocks", c.residual_blocks},
         {"floor", c.floor},
         {"use_susceptibility", c.use_susceptibility},
         {"use_shape", c.use_shape},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CalibNetConfig& c) {
    read_optional(j, "classes", c.classes);
    read_optional(j, "stem_channels", c.stem_channels);
    read_optional(j, "kernel", c.kernel);
    read_optional(j, "width", c.width);
    read_optional(j, "attention_hidden", c.attention_hidden);
    read_optional(j, "residual_blocks", c.residual_blocks);
    read_optional(j, "floor", c.floor);
    read_optional(j, "use_susceptibility", c.use_susceptibility);
    read_optional(j, "use_shape", c.use_shape);
    read_optional(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const CalibTrainConfig& c) {
    j = {{"epochs", c.epochs},
         {"lr", c.lr},
         {"batch_size", c.batch_size},
         {"n_aug", c.n_aug},
         {"augment_inputs", c.augment_inputs},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CalibTrainConfig& c) {
    read_optional(j, "epochs", c.epochs);
    read_optional(j, "lr", c.lr);
    read_optional(j, "batch_size", c.batch_size);
    read_optional(j, "n_aug", c.n_aug);
    read_optional(j, "augment_inputs", c.augment_inputs);
    read_optional(j, "seed", c.seed);
}

}  // namespace oodcal::calib
