#include "oodcal/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include <Eigen/Core>

namespace oodcal::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void he_init(Tensor<T>& w, std::size_t fan_in, std::uint64_t seed) {
    Rng rng(seed);
    const double stddev = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (T& v : w.storage()) v = static_cast<T>(rng.normal(0.0, stddev));
}

template <typename T>
void im2col(const Tensor<T>& x, std::size_t k, Tensor<T>& cols) {
    const std::size_t c = x.channels(), h = x.height(), w = x.width();
    const long pad = static_cast<long>(k / 2);
    cols = Tensor<T>({c * k * k, h * w});
    T* out = cols.data();
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* src = x.data() + ci * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
                const long x0 = std::max<long>(0, -dx), x1 = std::min<long>(static_cast<long>(w), static_cast<long>(w) - dx);
                for (std::size_t y = 0; y < h; ++y, out += w) {
                    const long sy = static_cast<long>(y) + dy;
                    if (sy < 0 || sy >= static_cast<long>(h) || x1 <= x0) {
                        std::fill(out, out + w, T{0});
                        continue;
                    }
                    std::fill(out, out + x0, T{0});
                    std::memcpy(out + x0, src + sy * static_cast<long>(w) + x0 + dx, sizeof(T) * static_cast<std::size_t>(x1 - x0));
                    std::fill(out + x1, out + w, T{0});
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, Tensor<T>& x) {
    x = Tensor<T>::grid(c, h, w, T{0});
    const long pad = static_cast<long>(k / 2);
    const T* in = cols;
    for (std::size_t ci = 0; ci < c; ++ci) {
        T* dst = x.data() + ci * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
                const long x0 = std::max<long>(0, -dx), x1 = std::min<long>(static_cast<long>(w), static_cast<long>(w) - dx);
                for (std::size_t y = 0; y < h; ++y, in += w) {
                    const long sy = static_cast<long>(y) + dy;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    T* row = dst + sy * static_cast<long>(w) + dx;
                    for (long xx = x0; xx < x1; ++xx) row[xx] += in[xx];
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::uint64_t seed)
    : weight(name + ".weight", {out, in * kernel * kernel}), bias(name + ".bias", {out}), in_(in), out_(out), k_(kernel) {
    require(kernel % 2 == 1, "Conv2d: kernel size must be odd");
    he_init(weight.value, in * kernel * kernel, seed);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Cache* cache) const {
    require(x.rank() == 3 && x.channels() == in_, "Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                                                      shape_string(x.shape()));
    const std::size_t hw = x.plane();
    Tensor<T> y = Tensor<T>::grid(out_, x.height(), x.width());
    MapMat<T> ym(y.data(), static_cast<long>(out_), static_cast<long>(hw));
    ConstMapMat<T> wm(weight.value.data(), static_cast<long>(out_), static_cast<long>(in_ * k_ * k_));
    if (k_ == 1) {
        ConstMapMat<T> xm(x.data(), static_cast<long>(in_), static_cast<long>(hw));
        ym.noalias() = wm * xm;
        if (cache) cache->cols = x;
    } else {
        Tensor<T> local;
        Tensor<T>& cols = cache ? cache->cols : local;
        im2col(x, k_, cols);
        ConstMapMat<T> cm(cols.data(), static_cast<long>(in_ * k_ * k_), static_cast<long>(hw));
        ym.noalias() = wm * cm;
    }
    for (std::size_t o = 0; o < out_; ++o) {
        const T b = bias.value[o];
        T* row = y.data() + o * hw;
        for (std::size_t i = 0; i < hw; ++i) row[i] += b;
    }
    if (cache) {
        cache->height = x.height();
        cache->width = x.width();
    }
    return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
    const std::size_t hw = cache.height * cache.width;
    const long rows = static_cast<long>(in_ * k_ * k_);
    ConstMapMat<T> gm(grad_out.data(), static_cast<long>(out_), static_cast<long>(hw));
    ConstMapMat<T> cm(cache.cols.data(), rows, static_cast<long>(hw));
    MapMat<T> dw(weight.grad.data(), static_cast<long>(out_), rows);
    dw.noalias() += gm * cm.transpose();
    for (std::size_t o = 0; o < out_; ++o) {
        const T* row = grad_out.data() + o * hw;
        T s{0};
        for (std::size_t i = 0; i < hw; ++i) s += row[i];
        bias.grad[o] += s;
    }
    ConstMapMat<T> wm(weight.value.data(), static_cast<long>(out_), rows);
    if (k_ == 1) {
        Tensor<T> dx = Tensor<T>::grid(in_, cache.height, cache.width);
        MapMat<T> dxm(dx.data(), static_cast<long>(in_), static_cast<long>(hw));
        dxm.noalias() = wm.transpose() * gm;
        return dx;
    }
    RowMat<T> dcols = wm.transpose() * gm;
    Tensor<T> dx;
    col2im(dcols.data(), in_, cache.height, cache.width, k_, dx);
    return dx;
}

// ------------------------------------------------------------- UpConv2x2

template <typename T>
UpConv2x2<T>::UpConv2x2(std::string name, std::size_t in, std::size_t out, std::uint64_t seed)
    : weight(name + ".weight", {out * 4, in}), bias(name + ".bias", {out}), in_(in), out_(out) {
    he_init(weight.value, in, seed);
}

template <typename T>
Tensor<T> UpConv2x2<T>::forward(const Tensor<T>& x, Cache* cache) const {
    require(x.rank() == 3 && x.channels() == in_, "UpConv2x2: input channel mismatch");
    const std::size_t h = x.height(), w = x.width(), hw = h * w;
    ConstMapMat<T> xm(x.data(), static_cast<long>(in_), static_cast<long>(hw));
    ConstMapMat<T> wm(weight.value.data(), static_cast<long>(out_ * 4), static_cast<long>(in_));
    RowMat<T> tmp = wm * xm;
    Tensor<T> y = Tensor<T>::grid(out_, 2 * h, 2 * w);
    for (std::size_t o = 0; o < out_; ++o) {
        const T b = bias.value[o];
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t c = 0; c < 2; ++c) {
                const T* src = tmp.data() + (o * 4 + a * 2 + c) * hw;
                for (std::size_t i = 0; i < h; ++i) {
                    T* dst = &y(o, 2 * i + a, c);
                    for (std::size_t j = 0; j < w; ++j) dst[2 * j] = src[i * w + j] + b;
                }
            }
        }
    }
    if (cache) cache->input = x;
    return y;
}

template <typename T>
Tensor<T> UpConv2x2<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
    const std::size_t h = cache.input.height(), w = cache.input.width(), hw = h * w;
    RowMat<T> dtmp(static_cast<long>(out_ * 4), static_cast<long>(hw));
    for (std::size_t o = 0; o < out_; ++o) {
        T bsum{0};
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t c = 0; c < 2; ++c) {
                T* dst = dtmp.data() + (o * 4 + a * 2 + c) * hw;
                for (std::size_t i = 0; i < h; ++i) {
                    const T* src = &grad_out(o, 2 * i + a, c);
                    for (std::size_t j = 0; j < w; ++j) {
                        dst[i * w + j] = src[2 * j];
                        bsum += src[2 * j];
                    }
                }
            }
        }
        bias.grad[o] += bsum;
    }
    ConstMapMat<T> xm(cache.input.data(), static_cast<long>(in_), static_cast<long>(hw));
    MapMat<T> dw(weight.grad.data(), static_cast<long>(out_ * 4), static_cast<long>(in_));
    dw.noalias() += dtmp * xm.transpose();
    ConstMapMat<T> wm(weight.value.data(), static_cast<long>(out_ * 4), static_cast<long>(in_));
    Tensor<T> dx = Tensor<T>::grid(in_, h, w);
    MapMat<T> dxm(dx.data(), static_cast<long>(in_), static_cast<long>(hw));
    dxm.noalias() = wm.transpose() * dtmp;
    return dx;
}

// -------------------------------------------------------------- MaxPool2

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x, Cache* cache) {
    const std::size_t c = x.channels(), h = x.height(), w = x.width();
    require(h % 2 == 0 && w % 2 == 0, "MaxPool2: spatial size must be even, got " + shape_string(x.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor<T> y = Tensor<T>::grid(c, oh, ow);
    if (cache) {
        cache->argmax.assign(c * oh * ow, 0);
        cache->height = h;
        cache->width = w;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const T v[4] = {x(ch, 2 * i, 2 * j), x(ch, 2 * i, 2 * j + 1), x(ch, 2 * i + 1, 2 * j),
                                x(ch, 2 * i + 1, 2 * j + 1)};
                std::uint8_t arg = 0;
                for (std::uint8_t q = 1; q < 4; ++q) {
                    if (v[q] > v[arg]) arg = q;
                }
                y(ch, i, j) = v[arg];
                if (cache) cache->argmax[(ch * oh + i) * ow + j] = arg;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
    const std::size_t c = grad_out.channels(), oh = grad_out.height(), ow = grad_out.width();
    Tensor<T> dx = Tensor<T>::grid(c, cache.height, cache.width, T{0});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const std::uint8_t arg = cache.argmax[(ch * oh + i) * ow + j];
                dx(ch, 2 * i + arg / 2, 2 * j + arg % 2) = grad_out(ch, i, j);
            }
        }
    }
    return dx;
}

// ------------------------------------------------------------------ ReLU

template <typename T>
void relu_inplace(Tensor<T>& x) {
    for (T& v : x.storage()) v = v > T{0} ? v : T{0};
}

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& output) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(output[i] > T{0})) grad[i] = T{0};
    }
}

// ------------------------------------------------------------- Dropout2d

template <typename T>
Tensor<T> Dropout2d<T>::forward(const Tensor<T>& x, Rng* rng, Cache* cache) const {
    if (rng == nullptr || rate <= 0.0) {
        if (cache) cache->scale.assign(x.channels(), T{1});
        return x;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> scale(x.channels());
    for (T& s : scale) s = rng->bernoulli(rate) ? T{0} : keep_scale;
    Tensor<T> y = x;
    const std::size_t plane = x.plane();
    for (std::size_t c = 0; c < x.channels(); ++c) {
        T* p = y.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] *= scale[c];
    }
    if (cache) cache->scale = std::move(scale);
    return y;
}

template <typename T>
Tensor<T> Dropout2d<T>::backward(const Tensor<T>& grad_out, const Cache& cache) const {
    Tensor<T> dx = grad_out;
    const std::size_t plane = dx.plane();
    for (std::size_t c = 0; c < dx.channels(); ++c) {
        T* p = dx.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] *= cache.scale[c];
    }
    return dx;
}

// ------------------------------------------------------ ChannelAttention

template <typename T>
ChannelAttention<T>::ChannelAttention(std::string name, std::size_t channels, std::size_t hidden, std::uint64_t seed)
    : w1(name + ".fc1.weight", {hidden, channels}),
      b1(name + ".fc1.bias", {hidden}),
      w2(name + ".fc2.weight", {channels, hidden}),
      b2(name + ".fc2.bias", {channels}),
      channels_(channels),
      hidden_(hidden) {
    he_init(w1.value, channels, derive_seed(seed, "fc1"));
    he_init(w2.value, hidden, derive_seed(seed, "fc2"));
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x, Cache* cache) const {
    require(x.channels() == channels_, "ChannelAttention: channel mismatch");
    const std::size_t plane = x.plane();
    std::vector<T> pooled(channels_), hidden(hidden_), gate(channels_);
    for (std::size_t c = 0; c < channels_; ++c) {
        const T* p = x.data() + c * plane;
        T s{0};
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        pooled[c] = s / static_cast<T>(plane);
    }
    for (std::size_t h = 0; h < hidden_; ++h) {
        T a = b1.value[h];
        for (std::size_t c = 0; c < channels_; ++c) a += w1.value[h * channels_ + c] * pooled[c];
        hidden[h] = a > T{0} ? a : T{0};
    }
    for (std::size_t c = 0; c < channels_; ++c) {
        T a = b2.value[c];
        for (std::size_t h = 0; h < hidden_; ++h) a += w2.value[c * hidden_ + h] * hidden[h];
        gate[c] = T{1} / (T{1} + std::exp(-a));
    }
    Tensor<T> y = x;
    for (std::size_t c = 0; c < channels_; ++c) {
        T* p = y.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] *= gate[c];
    }
    if (cache) {
        cache->input = x;
        cache->pooled = std::move(pooled);
        cache->hidden = std::move(hidden);
        cache->gate = std::move(gate);
    }
    return y;
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
    const std::size_t plane = grad_out.plane();
    const Tensor<T>& x = cache.input;
    Tensor<T> dx = grad_out;
    std::vector<T> dgate(channels_);
    for (std::size_t c = 0; c < channels_; ++c) {
        const T* g = grad_out.data() + c * plane;
        const T* xi = x.data() + c * plane;
        T* d = dx.data() + c * plane;
        T s{0};
        for (std::size_t i = 0; i < plane; ++i) {
            s += g[i] * xi[i];
            d[i] = g[i] * cache.gate[c];
        }
        dgate[c] = s;
    }
    std::vector<T> da2(channels_), dh(hidden_, T{0}), dpool(channels_, T{0});
    for (std::size_t c = 0; c < channels_; ++c) {
        da2[c] = dgate[c] * cache.gate[c] * (T{1} - cache.gate[c]);
        b2.grad[c] += da2[c];
        for (std::size_t h = 0; h < hidden_; ++h) {
            w2.grad[c * hidden_ + h] += da2[c] * cache.hidden[h];
            dh[h] += w2.value[c * hidden_ + h] * da2[c];
        }
    }
    for (std::size_t h = 0; h < hidden_; ++h) {
        if (!(cache.hidden[h] > T{0})) continue;
        b1.grad[h] += dh[h];
        for (std::size_t c = 0; c < channels_; ++c) {
            w1.grad[h * channels_ + c] += dh[h] * cache.pooled[c];
            dpool[c] += w1.value[h * channels_ + c] * dh[h];
        }
    }
    for (std::size_t c = 0; c < channels_; ++c) {
        const T add = dpool[c] / static_cast<T>(plane);
        T* d = dx.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] += add;
    }
    return dx;
}

// -------------------------------------------------------------- helpers

template <typename T>
Tensor<T> softplus_floor(const Tensor<T>& h, T floor) {
    Tensor<T> t(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const T v = h[i];
        const T sp = v > T{20} ? v : std::log1p(std::exp(v));
        t[i] = sp + floor;
    }
    return t;
}

template <typename T>
Tensor<T> softplus_backward(const Tensor<T>& grad_out, const Tensor<T>& h) {
    Tensor<T> dh(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) dh[i] = grad_out[i] / (T{1} + std::exp(-h[i]));
    return dh;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    require(!parts.empty(), "concat_channels: nothing to concatenate");
    const std::size_t h = parts[0]->height(), w = parts[0]->width();
    std::size_t c = 0;
    for (const auto* p : parts) {
        require(p->height() == h && p->width() == w, "concat_channels: spatial size mismatch");
        c += p->channels();
    }
    Tensor<T> out = Tensor<T>::grid(c, h, w);
    T* dst = out.data();
    for (const auto* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad, const std::vector<std::size_t>& channels) {
    std::vector<Tensor<T>> out;
    const T* src = grad.data();
    for (std::size_t c : channels) {
        Tensor<T> part = Tensor<T>::grid(c, grad.height(), grad.width());
        std::copy(src, src + part.size(), part.data());
        src += part.size();
        out.push_back(std::move(part));
    }
    return out;
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
    require(acc.size() == x.size(), "add_inplace: size mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

#define OODCAL_INSTANTIATE(T)                                                                      \
    template class Conv2d<T>;                                                                      \
    template class UpConv2x2<T>;                                                                   \
    template struct MaxPool2<T>;                                                                   \
    template struct Dropout2d<T>;                                                                  \
    template class ChannelAttention<T>;                                                            \
    template void relu_inplace<T>(Tensor<T>&);                                                     \
    template void relu_backward_inplace<T>(Tensor<T>&, const Tensor<T>&);                          \
    template Tensor<T> softplus_floor<T>(const Tensor<T>&, T);                                     \
    template Tensor<T> softplus_backward<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> concat_channels<T>(const std::vector<const Tensor<T>*>&);                   \
    template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&, const std::vector<std::size_t>&); \
    template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

OODCAL_INSTANTIATE(float)
OODCAL_INSTANTIATE(double)

#undef OODCAL_INSTANTIATE

}  // namespace oodcal::nn
