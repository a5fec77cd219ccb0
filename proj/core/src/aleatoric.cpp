#include "oodcal/aleatoric.hpp"

#include "oodcal/random.hpp"
#include "oodcal/softmax.hpp"

namespace oodcal::aleatoric {

void require_photometric(const augment::AugmentationPolicy& policy) {
    require(!policy.has_geometric(),
            "susceptibility estimation: policy contains geometric transforms (affine/elastic); only photometric "
            "transforms keep pixels aligned");
    policy.validate();
}

std::vector<LogitMap> augmented_logits(const LogitModel& model, const ImageSlice& x,
                                       const augment::AugmentationPolicy& policy, std::size_t n_aug,
                                       std::uint64_t seed) {
    require(n_aug >= 1, "susceptibility estimation: n_aug must be >= 1");
    require_photometric(policy);
    std::vector<LogitMap> out;
    out.reserve(n_aug);
    for (std::size_t l = 0; l < n_aug; ++l) {
        const auto params = augment::sample_params(policy, derive_seed(seed, l));
        out.push_back(model.forward(augment::apply_photometric(x, params)));
    }
    return out;
}

namespace {

std::size_t prefix(std::span<const LogitMap> logits, std::size_t n) {
    if (n == 0) n = logits.size();
    require(n >= 1 && n <= logits.size(), "susceptibility: prefix length out of range");
    for (std::size_t l = 1; l < n; ++l) {
        require(logits[l].data().same_shape(logits[0].data()), "susceptibility: logit shapes differ");
    }
    return n;
}

}  // namespace

SusceptibilityEstimate summarize(std::span<const LogitMap> logits, std::size_t n) {
    n = prefix(logits, n);
    const auto& shape = logits[0].data().shape();
    const std::size_t size = logits[0].data().size();
    std::vector<double> mean(size, 0.0), m2(size, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        const float* z = logits[l].data().data();
        for (std::size_t i = 0; i < size; ++i) mean[i] += z[i];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t l = 0; l < n; ++l) {
        const float* z = logits[l].data().data();
        for (std::size_t i = 0; i < size; ++i) {
            const double d = z[i] - mean[i];
            m2[i] += d * d;
        }
    }
    SusceptibilityEstimate est{TensorF(shape), TensorF(shape), n};
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (std::size_t i = 0; i < size; ++i) {
        est.mu[i] = static_cast<float>(mean[i]);
        est.var[i] = static_cast<float>(m2[i] / denom);
    }
    return est;
}

SusceptibilityEstimate estimate(const LogitModel& model, const ImageSlice& x,
                                const augment::AugmentationPolicy& policy, std::size_t n_aug, std::uint64_t seed) {
    const auto logits = augmented_logits(model, x, policy, n_aug, seed);
    return summarize(logits);
}

ProbabilityMap mean_softmax(std::span<const LogitMap> logits, std::size_t n) {
    n = prefix(logits, n);
    TensorD acc(logits[0].data().shape(), 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        const ProbabilityMap p = softmax(logits[l]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p.data()[i];
    }
    for (double& v : acc.storage()) v /= static_cast<double>(n);
    return ProbabilityMap(std::move(acc));
}

ProbabilityMap alea_probability(const LogitModel& model, const ImageSlice& x,
                                const augment::AugmentationPolicy& policy, std::size_t n_aug, std::uint64_t seed) {
    const auto logits = augmented_logits(model, x, policy, n_aug, seed);
    return mean_softmax(logits);
}

}  // namespace oodcal::aleatoric
