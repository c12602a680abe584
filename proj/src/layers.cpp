#include "rlms/layers.hpp"

#include <cmath>

#include "rlms/error.hpp"

namespace rlms {

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

template <typename T>
Conv2d<T> make_conv(Rng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                    double gain) {
    const double fan_in = static_cast<double>(in * k * k);
    Conv2d<T> c;
    c.weight = randn<T>({out, in, k, k}, rng, static_cast<T>(gain * std::sqrt(2.0 / fan_in)));
    c.bias = Tensor<T>(Shape{out});
    c.stride = stride;
    c.padding = k / 2;
    return c;
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
    return add(matmul(x, weight), bias);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

template <typename T>
Linear<T> make_linear(Rng& rng, std::size_t in, std::size_t out, double gain) {
    Linear<T> l;
    l.weight = randn<T>({in, out}, rng, static_cast<T>(gain * std::sqrt(1.0 / static_cast<double>(in))));
    l.bias = Tensor<T>(Shape{out});
    return l;
}

template <typename T>
ParamCount count_params(const ParamList<T>& params) {
    ParamCount pc;
    for (const auto& p : params) pc.count += p.tensor.numel();
    pc.bytes = pc.count * 4;
    return pc;
}

namespace {

template <typename T>
void require_matching(const ParamList<T>& a, const ParamList<T>& b) {
    if (a.size() != b.size()) throw DimensionError("parameter lists differ in length");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].tensor.shape() != b[i].tensor.shape()) {
            throw DimensionError("parameter " + a[i].name + " shape " + shape_str(a[i].tensor.shape()) +
                                 " vs " + shape_str(b[i].tensor.shape()));
        }
    }
}

}  // namespace

template <typename T>
void ema_update(const ParamList<T>& source, const ParamList<T>& target, double omega) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw ParameterError("ema omega must lie in [0, 1]");
    require_matching(source, target);
    const T w = static_cast<T>(omega);
    const T keep = static_cast<T>(1.0 - omega);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto src = source[i].tensor.data();
        auto dst = Tensor<T>(target[i].tensor).data();
        if (omega == 1.0) {
            std::copy(src.begin(), src.end(), dst.begin());
        } else if (omega != 0.0) {
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = w * src[j] + keep * dst[j];
        }
    }
}

template <typename T>
void copy_params(const ParamList<T>& source, const ParamList<T>& target) {
    require_matching(source, target);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto src = source[i].tensor.data();
        auto dst = Tensor<T>(target[i].tensor).data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

template <typename T>
void set_requires_grad(const ParamList<T>& params, bool flag) {
    for (const auto& p : params) Tensor<T>(p.tensor).set_requires_grad(flag);
}

template <typename T>
void clear_grads(const ParamList<T>& params) {
    for (const auto& p : params) Tensor<T>(p.tensor).clear_grad();
}

template <typename T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
    const std::size_t n = x.size(0);
    const std::size_t c = x.size(1);
    const Shape want{n, c};
    if (scale.shape() != want || shift.shape() != want) {
        throw DimensionError("modulation signals " + shape_str(scale.shape()) + "/" +
                             shape_str(shift.shape()) + " do not match features " + shape_str(x.shape()));
    }
    const auto stats = channel_stats(x);
    const Shape col{n, c, 1, 1};
    const Tensor<T> normalized = div(sub(x, reshape(stats.mean, col)), reshape(stats.std, col));
    return add(mul(normalized, reshape(scale, col)), reshape(shift, col));
}

#define RLMS_INSTANTIATE(T)                                                                        \
    template struct Conv2d<T>;                                                                     \
    template struct Linear<T>;                                                                     \
    template Conv2d<T> make_conv<T>(Rng&, std::size_t, std::size_t, std::size_t, std::size_t,      \
                                    double);                                                       \
    template Linear<T> make_linear<T>(Rng&, std::size_t, std::size_t, double);                     \
    template ParamCount count_params<T>(const ParamList<T>&);                                      \
    template void ema_update<T>(const ParamList<T>&, const ParamList<T>&, double);                 \
    template void copy_params<T>(const ParamList<T>&, const ParamList<T>&);                        \
    template void set_requires_grad<T>(const ParamList<T>&, bool);                                 \
    template void clear_grads<T>(const ParamList<T>&);                                             \
    template Tensor<T> modulate<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

RLMS_INSTANTIATE(float)
RLMS_INSTANTIATE(double)

}  // namespace rlms
