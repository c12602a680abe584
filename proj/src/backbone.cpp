#include "rlms/backbone.hpp"

#include <cmath>

#include "rlms/checkpoint.hpp"
#include "rlms/error.hpp"

namespace rlms {

std::vector<BackboneLayerSpec> default_backbone_specs() {
    return {{16, 3, 1}, {32, 3, 2}, {64, 3, 2}, {128, 3, 2}};
}

template <typename T>
Tensor<T> orthogonal_weight(Rng& rng, std::size_t out, std::size_t in, std::size_t k, double gain) {
    const std::size_t cols = in * k * k;
    if (out > cols) {
        throw ParameterError("orthogonal init needs out <= in*k*k (" + std::to_string(out) + " > " +
                             std::to_string(cols) + ")");
    }
    std::vector<double> m(out * cols);
    for (double& v : m) v = rng.normal();
    for (std::size_t r = 0; r < out; ++r) {
        double* row = m.data() + r * cols;
        for (std::size_t q = 0; q < r; ++q) {
            const double* prev = m.data() + q * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += row[c] * prev[c];
            for (std::size_t c = 0; c < cols; ++c) row[c] -= dot * prev[c];
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < cols; ++c) norm += row[c] * row[c];
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < cols; ++c) row[c] /= norm;
    }
    Tensor<T> w(Shape{out, in, k, k});
    for (std::size_t i = 0; i < m.size(); ++i) w.data()[i] = static_cast<T>(gain * m[i]);
    return w;
}

template <typename T>
FeatureBackbone<T>::FeatureBackbone(std::vector<Conv2d<T>> layers, std::vector<std::size_t> taps,
                                    std::size_t content_tap)
    : layers_(std::move(layers)), taps_(std::move(taps)), content_tap_(content_tap) {
    if (taps_.size() < 2) throw ParameterError("backbone needs at least two taps");
    for (std::size_t i = 0; i < taps_.size(); ++i) {
        if (taps_[i] >= layers_.size() || (i > 0 && taps_[i] <= taps_[i - 1])) {
            throw ParameterError("backbone taps must be strictly increasing layer indices");
        }
    }
    if (content_tap_ >= taps_.size()) throw ParameterError("content tap out of range");
    for (std::size_t i = 1; i < layers_.size(); ++i) {
        if (layers_[i].in_channels() != layers_[i - 1].out_channels()) {
            throw DimensionError("backbone layer " + std::to_string(i) + " channel mismatch");
        }
    }
}

template <typename T>
FeatureBackbone<T> FeatureBackbone<T>::seeded(std::uint64_t seed, const std::vector<BackboneLayerSpec>& specs) {
    Rng rng = Rng::derive(seed, "backbone");
    std::vector<Conv2d<T>> layers;
    std::vector<std::size_t> taps;
    std::size_t in = 3;
    for (const auto& s : specs) {
        Conv2d<T> c;
        c.weight = orthogonal_weight<T>(rng, s.out_channels, in, s.kernel, std::sqrt(2.0));
        c.bias = Tensor<T>(Shape{s.out_channels});
        c.stride = s.stride;
        c.padding = s.kernel / 2;
        layers.push_back(std::move(c));
        taps.push_back(taps.size());
        in = s.out_channels;
    }
    // Second-deepest tap carries content.
    const std::size_t content = taps.size() >= 2 ? taps.size() - 2 : 0;
    return FeatureBackbone<T>(std::move(layers), std::move(taps), content);
}

template <typename T>
std::size_t FeatureBackbone<T>::min_input_size() const {
    std::size_t size = 1;
    for (std::size_t i = 0; i <= taps_.back(); ++i) size *= layers_[i].stride;
    return std::max<std::size_t>(size, std::size_t{1} << (taps_.size() - 1));
}

template <typename T>
std::vector<Tensor<T>> FeatureBackbone<T>::extract(const Tensor<T>& images) const {
    if (images.dim() != 4 || images.size(1) != 3) {
        throw DimensionError("backbone expects [N,3,H,W] images, got " + shape_str(images.shape()));
    }
    const std::size_t need = min_input_size();
    if (images.size(2) < need || images.size(3) < need) {
        throw DimensionError("image " + std::to_string(images.size(2)) + "x" + std::to_string(images.size(3)) +
                             " too small for the deepest backbone tap (needs " + std::to_string(need) + ")");
    }
    std::vector<Tensor<T>> out;
    out.reserve(taps_.size());
    Tensor<T> x = images;
    std::size_t next = 0;
    for (std::size_t i = 0; i <= taps_.back(); ++i) {
        x = relu(layers_[i](x));
        if (taps_[next] == i) {
            out.push_back(x);
            ++next;
        }
    }
    return out;
}

template <typename T>
ParamList<T> FeatureBackbone<T>::params() const {
    ParamList<T> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("backbone.layer" + std::to_string(i), out);
    return out;
}

FeatureBackbone<float> load_backbone(const std::filesystem::path& path, const std::vector<BackboneLayerSpec>& specs) {
    FeatureBackbone<float> b = FeatureBackbone<float>::seeded(0, specs);
    assign_by_name(load_container(path), b.params());
    return b;
}

FeatureBackbone<float> load_backbone(std::uint64_t seed, const std::vector<BackboneLayerSpec>& specs) {
    return FeatureBackbone<float>::seeded(seed, specs);
}

void save_backbone(const FeatureBackbone<float>& backbone, const std::filesystem::path& path) {
    save_container(path, backbone.params());
}

template class FeatureBackbone<float>;
template class FeatureBackbone<double>;
template Tensor<float> orthogonal_weight<float>(Rng&, std::size_t, std::size_t, std::size_t, double);
template Tensor<double> orthogonal_weight<double>(Rng&, std::size_t, std::size_t, std::size_t, double);

}  // namespace rlms
