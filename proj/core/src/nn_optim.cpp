#include "oodcal/nn/optim.hpp"

#include <cmath>

#include "oodcal/tensor_io.hpp"

namespace oodcal::nn {

template <typename T>
Adam<T>::Adam(ParamList<T> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

template <typename T>
void Adam<T>::step(double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& value = params_[i]->value;
        const auto& grad = params_[i]->grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = static_cast<double>(grad[k]) * grad_scale;
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            const double update = lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
            value[k] = static_cast<T>(static_cast<double>(value[k]) - update);
        }
    }
}

template <typename T>
std::vector<float> flatten_parameters(const ParamList<T>& params) {
    std::vector<float> flat;
    flat.reserve(parameter_count(params));
    for (const auto* p : params) {
        for (T v : p->value.values()) flat.push_back(static_cast<float>(v));
    }
    return flat;
}

template <typename T>
void load_parameters(const ParamList<T>& params, const std::vector<float>& flat) {
    require(flat.size() == parameter_count(params),
            "load_parameters: checkpoint holds " + std::to_string(flat.size()) + " values, model expects " +
                std::to_string(parameter_count(params)));
    std::size_t i = 0;
    for (auto* p : params) {
        for (T& v : p->value.storage()) v = static_cast<T>(flat[i++]);
    }
}

template <typename T>
void save_parameters(const std::filesystem::path& dir, const ParamList<T>& params) {
    std::vector<float> flat = flatten_parameters(params);
    const std::size_t n = flat.size();
    write_tensor(dir, TensorF({n}, std::move(flat)));
}

template <typename T>
void restore_parameters(const std::filesystem::path& dir, const ParamList<T>& params) {
    load_parameters(params, read_tensor<float>(dir).storage());
}

template class Adam<float>;
template class Adam<double>;
template std::vector<float> flatten_parameters<float>(const ParamList<float>&);
template std::vector<float> flatten_parameters<double>(const ParamList<double>&);
template void load_parameters<float>(const ParamList<float>&, const std::vector<float>&);
template void load_parameters<double>(const ParamList<double>&, const std::vector<float>&);
template void save_parameters<float>(const std::filesystem::path&, const ParamList<float>&);
template void save_parameters<double>(const std::filesystem::path&, const ParamList<double>&);
template void restore_parameters<float>(const std::filesystem::path&, const ParamList<float>&);
template void restore_parameters<double>(const std::filesystem::path&, const ParamList<double>&);

}  // namespace oodcal::nn
