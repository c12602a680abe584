#include "rlms/objectives.hpp"

#include <cmath>

#include "rlms/error.hpp"

namespace rlms {

template <typename T>
Tensor<T> content_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& reference) {
    if (produced.shape() != reference.shape()) {
        throw DimensionError("content loss inputs differ: " + shape_str(produced.shape()) + " vs " +
                             shape_str(reference.shape()));
    }
    const std::size_t j = backbone.content_tap();
    const Tensor<T> fp = backbone.extract(produced)[j];
    Tensor<T> fr;
    {
        NoGradGuard no_grad;
        fr = backbone.extract(reference.detach())[j];
    }
    return mean(square(sub(fp, fr)));
}

template <typename T>
StyleTargets<T> style_targets(const FeatureBackbone<T>& backbone, const Tensor<T>& style) {
    NoGradGuard no_grad;
    StyleTargets<T> t;
    for (const auto& f : backbone.extract(style.detach())) t.taps.push_back(channel_stats(f));
    return t;
}

template <typename T>
Tensor<T> style_loss_per_sample(const FeatureBackbone<T>& backbone, const Tensor<T>& produced,
                                const StyleTargets<T>& targets) {
    if (targets.taps.size() != backbone.tap_count()) {
        throw DimensionError("style targets hold " + std::to_string(targets.taps.size()) + " taps, backbone has " +
                             std::to_string(backbone.tap_count()));
    }
    const auto feats = backbone.extract(produced);
    Tensor<T> total;
    for (std::size_t j = 0; j < feats.size(); ++j) {
        const auto p = channel_stats(feats[j]);
        const auto& s = targets.taps[j];
        if (s.mean.size(1) != p.mean.size(1) || (s.mean.size(0) != 1 && s.mean.size(0) != p.mean.size(0))) {
            throw DimensionError("style statistics " + shape_str(s.mean.shape()) + " do not match produced " +
                                 shape_str(p.mean.shape()));
        }
        const Tensor<T> term = add(reduce(ReduceKind::sum, square(sub(p.mean, s.mean)), {1}),
                                   reduce(ReduceKind::sum, square(sub(p.std, s.std)), {1}));
        total = j == 0 ? term : add(total, term);
    }
    return total;
}

template <typename T>
Tensor<T> style_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const StyleTargets<T>& targets) {
    return mean(style_loss_per_sample(backbone, produced, targets));
}

template <typename T>
Tensor<T> style_loss(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& style) {
    if (style.dim() != 4 || produced.dim() != 4 || style.size(1) != produced.size(1)) {
        throw DimensionError("style loss channel mismatch: " + shape_str(produced.shape()) + " vs " +
                             shape_str(style.shape()));
    }
    return style_loss(backbone, produced, style_targets(backbone, style));
}

template <typename T>
std::vector<double> reward(const FeatureBackbone<T>& backbone, const Tensor<T>& produced,
                           const StyleTargets<T>& targets) {
    NoGradGuard no_grad;
    const Tensor<T> per = style_loss_per_sample(backbone, produced, targets);
    std::vector<double> out;
    for (T v : per.data()) out.push_back(-static_cast<double>(v));
    return out;
}

template <typename T>
double reward(const FeatureBackbone<T>& backbone, const Tensor<T>& produced, const Tensor<T>& style) {
    NoGradGuard no_grad;
    return -static_cast<double>(style_loss(backbone, produced, style).item());
}

template <typename T>
Tensor<T> contrastive_loss(const std::vector<Tensor<T>>& moving_features,
                           const std::vector<Tensor<T>>& style_features) {
    if (moving_features.empty() || moving_features.size() != style_features.size()) {
        throw DimensionError("contrastive loss needs matching non-empty feature level lists");
    }
    Tensor<T> total;
    for (std::size_t k = 0; k < moving_features.size(); ++k) {
        const Tensor<T>& m = moving_features[k];
        const Tensor<T>& s = style_features[k];
        if (m.dim() != 2 || m.shape() != s.shape()) {
            throw DimensionError("contrastive features must be matching [N,D], got " + shape_str(m.shape()) +
                                 " and " + shape_str(s.shape()));
        }
        const std::size_t n = m.size(0);
        const std::size_t d = m.size(1);
        if (n < 2) throw ContractError("contrastive loss requires batch >= 2");
        // dist[i][j] = ||m_i - s_j||^2
        const Tensor<T> dist = reduce(ReduceKind::sum, square(sub(reshape(m, {n, 1, d}), reshape(s, {1, n, d}))), {2});
        Tensor<T> eye(Shape{n, n});
        Tensor<T> off(Shape{n, n}, T(1));
        for (std::size_t i = 0; i < n; ++i) {
            eye.data()[i * n + i] = T(1);
            off.data()[i * n + i] = T(0);
        }
        const Tensor<T> positive = reduce(ReduceKind::sum, mul(dist, eye), {1});
        const Tensor<T> negative = affine_scalar(reduce(ReduceKind::sum, mul(dist, off), {1}), T(1),
                                                 static_cast<T>(kContrastiveEpsilon));
        const Tensor<T> term = sum(div(positive, negative));
        total = k == 0 ? term : add(total, term);
    }
    return total;
}

template <typename T>
UncertaintyWeights<T> UncertaintyWeights<T>::init(double s1, double s2, double s3) {
    return {Tensor<T>(Shape{3}, std::vector<T>{static_cast<T>(s1), static_cast<T>(s2), static_cast<T>(s3)})};
}

template <typename T>
std::array<double, 3> UncertaintyWeights<T>::lambdas() const {
    return {std::exp(-static_cast<double>(s.at(0))), std::exp(-static_cast<double>(s.at(1))),
            std::exp(-static_cast<double>(s.at(2)))};
}

template <typename T>
std::array<double, 3> UncertaintyWeights<T>::sigma_squared() const {
    return {std::exp(static_cast<double>(s.at(0))), std::exp(static_cast<double>(s.at(1))),
            std::exp(static_cast<double>(s.at(2)))};
}

template <typename T>
LossBreakdown<T> final_loss(const UncertaintyWeights<T>& weights, const Tensor<T>& content, const Tensor<T>& style,
                            const Tensor<T>& contrastive) {
    const std::pair<const char*, const Tensor<T>*> parts[] = {
        {"content", &content}, {"style", &style}, {"contrastive", &contrastive}};
    for (const auto& [name, t] : parts) {
        if (t->numel() != 1) throw DimensionError(std::string(name) + " loss must be a scalar");
        const double v = static_cast<double>(t->item());
        if (!std::isfinite(v)) throw NumericError(std::string(name) + " loss is not finite");
        if (v < 0.0) throw DomainError(std::string(name) + " loss is negative");
    }
    if (weights.s.shape() != Shape{3}) throw DimensionError("uncertainty weights must have shape [3]");
    const Tensor<T> losses = concat(std::vector<Tensor<T>>{reshape(content, {1}), reshape(style, {1}),
                                                           reshape(contrastive, {1})}, 0);
    const Tensor<T> weighted = sum(mul(exp(negate(weights.s)), losses));
    LossBreakdown<T> b;
    b.content = content;
    b.style = style;
    b.contrastive = contrastive;
    b.weighted_total = add(weighted, affine_scalar(sum(weights.s), T(0.5), T(0)));
    b.lambdas = weights.lambdas();
    return b;
}

#define RLMS_INSTANTIATE(T)                                                                                    \
    template Tensor<T> content_loss<T>(const FeatureBackbone<T>&, const Tensor<T>&, const Tensor<T>&);          \
    template StyleTargets<T> style_targets<T>(const FeatureBackbone<T>&, const Tensor<T>&);                     \
    template Tensor<T> style_loss_per_sample<T>(const FeatureBackbone<T>&, const Tensor<T>&,                    \
                                                const StyleTargets<T>&);                                        \
    template Tensor<T> style_loss<T>(const FeatureBackbone<T>&, const Tensor<T>&, const StyleTargets<T>&);      \
    template Tensor<T> style_loss<T>(const FeatureBackbone<T>&, const Tensor<T>&, const Tensor<T>&);            \
    template std::vector<double> reward<T>(const FeatureBackbone<T>&, const Tensor<T>&, const StyleTargets<T>&); \
    template double reward<T>(const FeatureBackbone<T>&, const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> contrastive_loss<T>(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&);       \
    template struct UncertaintyWeights<T>;                                                                      \
    template LossBreakdown<T> final_loss<T>(const UncertaintyWeights<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                            const Tensor<T>&);

RLMS_INSTANTIATE(float)
RLMS_INSTANTIATE(double)

}  // namespace rlms
