#pragma once

#include <cstdint>
#include <vector>

#include "rlms/layers.hpp"

namespace rlms {

inline constexpr std::size_t kActionChannels = 16;
inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;
// Added inside log(1 - a^2 + eps) of the squash correction.
inline constexpr double kSquashEpsilon = 1e-6;
// Largest change the builder can make to a pixel's logit in one step.
inline constexpr double kBuilderMaxLogitStep = 1.0;

// Moving image and style image, [N, 3, H, W] each with pixels in [0, 1].
template <typename T>
struct State {
    Tensor<T> moving;
    Tensor<T> style;
};

// Per-channel statistics of the style image in the two style spaces, [N, C] each.
template <typename T>
struct StyleSignals {
    Tensor<T> shallow_mean;
    Tensor<T> shallow_std;
    Tensor<T> deep_mean;
    Tensor<T> deep_std;
};

// Style-space statistics (mean || std) at the shallow and deep positions, [N, 2C].
template <typename T>
struct StyleFeatures {
    Tensor<T> shallow;
    Tensor<T> deep;
};

// What the encoder knows about a state: trunk features of the moving image
// (consumed by the action head and the builder) and the style signals.
template <typename T>
struct Encoding {
    Tensor<T> content_features;  // [N, 64, H/4, W/4]
    StyleSignals<T> signals;
    StyleFeatures<T> style_features;  // of the style image, same statistics as `signals`
};

template <typename T>
struct PolicyOutput {
    Tensor<T> mean;      // [N, A, h, w]
    Tensor<T> log_std;   // [N, A, h, w], clamped
    Tensor<T> noise;     // the standard-normal draw that produced `action`
    Tensor<T> action;    // squashed sample, strictly inside (-1, 1)
    Tensor<T> log_prob;  // [N], summed over action elements
    Encoding<T> encoding;
};

// Unified policy: one encoder for the moving and the style image, with two
// style-space blocks that only the style path (and contrastive features) use.
template <typename T>
class Actor {
public:
    static Actor init(Rng& rng);

    Encoding<T> encode(const State<T>& state) const;
    // Reparameterized sample; `noise` (same shape as the mean) replaces the draw from `rng`.
    PolicyOutput<T> act(Encoding<T> encoding, const Tensor<T>* noise, Rng* rng) const;
    PolicyOutput<T> forward(const State<T>& state, const Tensor<T>* noise, Rng* rng) const {
        return act(encode(state), noise, rng);
    }

    StyleFeatures<T> style_features(const Tensor<T>& images) const;

    ParamList<T> params() const;

    template <typename U>
    Actor<U> cast() const;

    Conv2d<T> c1, c2, shallow, c3, deep, head;
    std::vector<Conv2d<T>> residual;  // pairs: residual[2i], residual[2i+1]

private:
    struct Trunk {
        Tensor<T> mid;   // after c2, shallow-space input
        Tensor<T> last;  // after the residual blocks, deep-space input
    };
    Trunk trunk(const Tensor<T>& images) const;
    StyleSignals<T> signals_from(const Trunk& t) const;
};

// Decoder from content features + action to the next moving image.
template <typename T>
class Builder {
public:
    static Builder init(Rng& rng);

    // Output [N, 3, H, W] in (0, 1). The previous moving image enters as a
    // logit-space skip so an untrained builder starts near the identity.
    Tensor<T> forward(const Tensor<T>& moving, const Encoding<T>& encoding, const Tensor<T>& action) const;

    ParamList<T> params() const;

    template <typename U>
    Builder<U> cast() const;

    Conv2d<T> d1, d2, d3, out;
};

template <typename T>
class Critic {
public:
    static Critic init(Rng& rng);

    // Q-value per sample, [N].
    Tensor<T> forward(const State<T>& state, const Tensor<T>& action) const;

    ParamList<T> params() const;

    template <typename U>
    Critic<U> cast() const;

    Conv2d<T> c1, c2;
    Linear<T> head;
};

template <typename T>
struct Agent {
    Actor<T> actor;
    Builder<T> builder;
    Critic<T> critic;
    Critic<T> target_critic;
    Tensor<T> log_alpha;  // scalar

    static Agent init(std::uint64_t seed, double initial_alpha);

    T alpha() const;
    ParamList<T> actor_params() const { return actor.params(); }
    ParamList<T> builder_params() const { return builder.params(); }
    ParamList<T> critic_params() const { return critic.params(); }
    ParamList<T> target_params() const { return target_critic.params(); }
    // Every array under a unique prefixed name, for checkpoints.
    ParamList<T> all_params() const;

    template <typename U>
    Agent<U> cast() const;
};

// Sum over the action elements of the squashed-Gaussian log-density, [N].
template <typename T>
Tensor<T> squashed_log_prob(const Tensor<T>& noise, const Tensor<T>& log_std, const Tensor<T>& action);

template <typename T>
template <typename U>
Actor<U> Actor<T>::cast() const {
    Actor<U> a;
    a.c1 = c1.template cast<U>();
    a.c2 = c2.template cast<U>();
    a.shallow = shallow.template cast<U>();
    a.c3 = c3.template cast<U>();
    a.deep = deep.template cast<U>();
    a.head = head.template cast<U>();
    for (const auto& r : residual) a.residual.push_back(r.template cast<U>());
    return a;
}

template <typename T>
template <typename U>
Builder<U> Builder<T>::cast() const {
    Builder<U> b;
    b.d1 = d1.template cast<U>();
    b.d2 = d2.template cast<U>();
    b.d3 = d3.template cast<U>();
    b.out = out.template cast<U>();
    return b;
}

template <typename T>
template <typename U>
Critic<U> Critic<T>::cast() const {
    Critic<U> c;
    c.c1 = c1.template cast<U>();
    c.c2 = c2.template cast<U>();
    c.head = head.template cast<U>();
    return c;
}

template <typename T>
template <typename U>
Agent<U> Agent<T>::cast() const {
    return {actor.template cast<U>(), builder.template cast<U>(), critic.template cast<U>(),
            target_critic.template cast<U>(), log_alpha.template cast<U>()};
}

}  // namespace rlms
