#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlms/layers.hpp"

namespace rlms {

struct BackboneLayerSpec {
    std::size_t out_channels;
    std::size_t kernel;
    std::size_t stride;
};

// Default stand-in: four 3x3 conv+relu blocks, 16/32/64/128 channels, stride 2
// between taps. Every block is tapped.
std::vector<BackboneLayerSpec> default_backbone_specs();

// Frozen conv+relu stack whose tapped activations measure content and style.
// Parameters never require gradients; gradients still flow to the input images.
template <typename T>
class FeatureBackbone {
public:
    FeatureBackbone() = default;
    FeatureBackbone(std::vector<Conv2d<T>> layers, std::vector<std::size_t> taps, std::size_t content_tap);

    // Orthogonal-initialized weights, zero biases, fully determined by `seed`.
    static FeatureBackbone seeded(std::uint64_t seed,
                                  const std::vector<BackboneLayerSpec>& specs = default_backbone_specs());

    // One activation per tap, in tap order. Images are [N, 3, H, W] in [0, 1].
    std::vector<Tensor<T>> extract(const Tensor<T>& images) const;

    std::size_t tap_count() const { return taps_.size(); }
    // Position within the tap list used by the content loss.
    std::size_t content_tap() const { return content_tap_; }
    const std::vector<std::size_t>& taps() const { return taps_; }
    const std::vector<Conv2d<T>>& layers() const { return layers_; }
    // Smallest H (and W) for which the deepest tap is reached at full stride depth.
    std::size_t min_input_size() const;

    ParamList<T> params() const;

    template <typename U>
    FeatureBackbone<U> cast() const {
        std::vector<Conv2d<U>> layers;
        for (const auto& l : layers_) layers.push_back(l.template cast<U>());
        return FeatureBackbone<U>(std::move(layers), taps_, content_tap_);
    }

private:
    std::vector<Conv2d<T>> layers_;
    std::vector<std::size_t> taps_;
    std::size_t content_tap_ = 0;
};

// Rows of the [out, in*k*k] weight matrix orthonormal (modified Gram-Schmidt on
// Gaussian rows), scaled by `gain`. Requires out <= in*k*k.
template <typename T>
Tensor<T> orthogonal_weight(Rng& rng, std::size_t out, std::size_t in, std::size_t k, double gain);

// The default structure, with every array filled from the container at `path`.
FeatureBackbone<float> load_backbone(const std::filesystem::path& path,
                                     const std::vector<BackboneLayerSpec>& specs = default_backbone_specs());
FeatureBackbone<float> load_backbone(std::uint64_t seed,
                                     const std::vector<BackboneLayerSpec>& specs = default_backbone_specs());
void save_backbone(const FeatureBackbone<float>& backbone, const std::filesystem::path& path);

}  // namespace rlms
