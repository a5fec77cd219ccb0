#pragma once

#include <filesystem>
#include <vector>

#include "oodcal/nn/layers.hpp"

namespace oodcal::nn {

template <typename T>
class Adam {
public:
    Adam(ParamList<T> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    // Applies one update using grad * grad_scale (e.g. 1 / batch size).
    void step(double grad_scale = 1.0);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    long steps() const { return t_; }

private:
    ParamList<T> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// All parameter values concatenated in collection order.
template <typename T>
std::vector<float> flatten_parameters(const ParamList<T>& params);
template <typename T>
void load_parameters(const ParamList<T>& params, const std::vector<float>& flat);

template <typename T>
void save_parameters(const std::filesystem::path& dir, const ParamList<T>& params);
template <typename T>
void restore_parameters(const std::filesystem::path& dir, const ParamList<T>& params);

}  // namespace oodcal::nn
