#pragma once

#include <array>
#include <vector>

#include "rlms/backbone.hpp"

namespace rlms {

inline constexpr double kContrastiveEpsilon = 1e-8;

// Content term: mean squared difference of the content-tap activations,
// i.e. ||phi_j(produced) - phi_j(reference)||^2 / (C H W), averaged over the batch.
// The reference side is a detached target.
template <typename T>
Tensor<T> content_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& reference);

// Per-tap channel statistics of a style image, reusable across calls because
// the backbone is frozen.
template <typename T>
struct StyleTargets {
    std::vector<ChannelStats<T>> taps;
};

template <typename T>
StyleTargets<T> style_targets(const FeatureBackbone<T>& backbone, const Tensor<T>& style);

// Sum over taps of ||mu_p - mu_s||^2 + ||sigma_p - sigma_s||^2, one value per sample, [N].
template <typename T>
Tensor<T> style_loss_per_sample(const FeatureBackbone<T>& backbone, const Tensor<T>& produced,
                                const StyleTargets<T>& targets);

// Batch mean of style_loss_per_sample.
template <typename T>
Tensor<T> style_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const StyleTargets<T>& targets);
template <typename T>
Tensor<T> style_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& style);

// Negated style loss per sample, computed without recording gradients.
template <typename T>
std::vector<double> reward(const FeatureBackbone<T>& backbone, const Tensor<T>& produced,
                           const StyleTargets<T>& targets);
template <typename T>
double reward(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& style);

// Ratio-form contrastive loss over K feature levels, each [N, D]:
//   sum_i sum_k ||m_ik - s_ik||^2 / (sum_{j != i} ||m_ik - s_jk||^2 + eps)
template <typename T>
Tensor<T> contrastive_loss(const std::vector<Tensor<T>>& moving_features,
                           const std::vector<Tensor<T>>& style_features);

// s_i = log sigma_i^2 for the content, style and contrastive terms.
template <typename T>
struct UncertaintyWeights {
    Tensor<T> s;  // [3]

    static UncertaintyWeights init(double s1 = 0.0, double s2 = 0.0, double s3 = 0.0);
    std::array<double, 3> lambdas() const;  // exp(-s_i)
    std::array<double, 3> sigma_squared() const;
};

template <typename T>
struct LossBreakdown {
    Tensor<T> content;
    Tensor<T> style;
    Tensor<T> contrastive;
    Tensor<T> weighted_total;
    std::array<double, 3> lambdas{};
};

// e^{-s1} L_co + e^{-s2} L_st + e^{-s3} L_ct + (s1 + s2 + s3) / 2
template <typename T>
LossBreakdown<T> final_loss(const UncertaintyWeights<T>& weights, const Tensor<T>& content, const Tensor<T>& style,
                            const Tensor<T>& contrastive);

}  // namespace rlms
