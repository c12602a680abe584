#include "rlms/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rlms/error.hpp"

namespace rlms {

namespace {

constexpr std::size_t kResidualBlocks = 2;

template <typename T>
void require_state(const State<T>& s) {
    if (s.moving.dim() != 4 || s.moving.size(1) != 3) {
        throw DimensionError("moving image must be [N,3,H,W], got " + shape_str(s.moving.shape()));
    }
    if (s.style.shape() != s.moving.shape()) {
        throw DimensionError("style image " + shape_str(s.style.shape()) + " does not match moving image " +
                             shape_str(s.moving.shape()));
    }
    if (s.moving.size(2) % 4 != 0 || s.moving.size(3) % 4 != 0) {
        throw DimensionError("image size " + std::to_string(s.moving.size(2)) + "x" +
                             std::to_string(s.moving.size(3)) + " is not divisible by 4");
    }
}

template <typename T>
Tensor<T> action_shape_check(const State<T>& s, const Tensor<T>& action) {
    const Shape want{s.moving.size(0), kActionChannels, s.moving.size(2) / 4, s.moving.size(3) / 4};
    if (action.shape() != want) {
        throw DimensionError("action " + shape_str(action.shape()) + " does not match expected " + shape_str(want));
    }
    return action;
}

template <typename T>
StyleFeatures<T> features_from(const StyleSignals<T>& s) {
    return {concat(std::vector<Tensor<T>>{s.shallow_mean, s.shallow_std}, 1),
            concat(std::vector<Tensor<T>>{s.deep_mean, s.deep_std}, 1)};
}

template <typename T>
Tensor<T> sum_per_sample(const Tensor<T>& x) {
    std::vector<std::size_t> axes;
    for (std::size_t a = 1; a < x.dim(); ++a) axes.push_back(a);
    return reduce(ReduceKind::sum, x, axes);
}

// owner[i] = position in `firsts` of the first sample bitwise equal to sample i.
template <typename T>
std::vector<std::size_t> distinct_samples(const Tensor<T>& x, std::vector<std::size_t>& firsts) {
    const std::size_t n = x.size(0);
    const std::size_t len = n == 0 ? 0 : x.numel() / n;
    std::vector<std::size_t> owner(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.ptr() + i * len;
        std::size_t k = 0;
        while (k < firsts.size() && !std::equal(row, row + len, x.ptr() + firsts[k] * len)) ++k;
        if (k == firsts.size()) firsts.push_back(i);
        owner[i] = k;
    }
    return owner;
}

template <typename T>
Tensor<T> gather_samples(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
    std::vector<Tensor<T>> parts;
    for (std::size_t i : idx) parts.push_back(slice(x, 0, i, i + 1));
    return concat(parts, 0);
}

}  // namespace

template <typename T>
Tensor<T> squashed_log_prob(const Tensor<T>& noise, const Tensor<T>& log_std, const Tensor<T>& action) {
    const T half_log_2pi = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi));
    const Tensor<T> gauss = sub(affine_scalar(square(noise), T(-0.5), -half_log_2pi), log_std);
    const Tensor<T> jacobian = log(affine_scalar(square(action), T(-1), static_cast<T>(1.0 + kSquashEpsilon)));
    return sum_per_sample(sub(gauss, jacobian));
}

template <typename T>
Actor<T> Actor<T>::init(Rng& rng) {
    Actor a;
    a.c1 = make_conv<T>(rng, 3, 16, 9, 1);
    a.c2 = make_conv<T>(rng, 16, 32, 3, 2);
    a.shallow = make_conv<T>(rng, 32, 32, 3, 1);
    a.c3 = make_conv<T>(rng, 32, 64, 3, 2);
    for (std::size_t i = 0; i < 2 * kResidualBlocks; ++i) {
        // Second conv of each block starts small so the block begins near identity.
        a.residual.push_back(make_conv<T>(rng, 64, 64, 3, 1, i % 2 == 1 ? 0.1 : 1.0));
    }
    a.deep = make_conv<T>(rng, 64, 64, 3, 1);
    a.head = make_conv<T>(rng, 64, 2 * kActionChannels, 3, 1, 0.1);
    return a;
}

template <typename T>
typename Actor<T>::Trunk Actor<T>::trunk(const Tensor<T>& images) const {
    Trunk t;
    t.mid = relu(c2(relu(c1(images))));
    Tensor<T> x = relu(c3(t.mid));
    for (std::size_t b = 0; b + 1 < residual.size(); b += 2) {
        x = add(x, residual[b + 1](relu(residual[b](x))));
    }
    t.last = x;
    return t;
}

template <typename T>
StyleSignals<T> Actor<T>::signals_from(const Trunk& t) const {
    const auto s = channel_stats(relu(shallow(t.mid)));
    const auto d = channel_stats(relu(deep(t.last)));
    return {s.mean, s.std, d.mean, d.std};
}

template <typename T>
Encoding<T> Actor<T>::encode(const State<T>& state) const {
    require_state(state);
    Encoding<T> e;
    e.content_features = trunk(state.moving).last;
    // Replay batches repeat style images; run the trunk once per distinct one.
    std::vector<std::size_t> firsts;
    const std::vector<std::size_t> owner = distinct_samples(state.style, firsts);
    if (firsts.size() == owner.size()) {
        e.signals = signals_from(trunk(state.style));
    } else {
        const StyleSignals<T> u = signals_from(trunk(gather_samples(state.style, firsts)));
        e.signals = {gather_samples(u.shallow_mean, owner), gather_samples(u.shallow_std, owner),
                     gather_samples(u.deep_mean, owner), gather_samples(u.deep_std, owner)};
    }
    e.style_features = features_from(e.signals);
    return e;
}

template <typename T>
PolicyOutput<T> Actor<T>::act(Encoding<T> encoding, const Tensor<T>* noise, Rng* rng) const {
    const auto& sig = encoding.signals;
    const Tensor<T> h = head(modulate(encoding.content_features, sig.deep_std, sig.deep_mean));
    PolicyOutput<T> out;
    out.mean = slice(h, 1, 0, kActionChannels);
    out.log_std = clamp(slice(h, 1, kActionChannels, 2 * kActionChannels), static_cast<T>(kLogStdMin),
                        static_cast<T>(kLogStdMax));
    if (noise != nullptr) {
        if (noise->shape() != out.mean.shape()) {
            throw DimensionError("noise " + shape_str(noise->shape()) + " does not match action mean " +
                                 shape_str(out.mean.shape()));
        }
        out.noise = noise->detach();
    } else {
        if (rng == nullptr) throw ContractError("actor sampling needs either noise or a generator");
        out.noise = randn<T>(out.mean.shape(), *rng);
    }
    out.action = squash(add(out.mean, mul(exp(out.log_std), out.noise)));
    out.log_prob = squashed_log_prob(out.noise, out.log_std, out.action);
    out.encoding = std::move(encoding);
    return out;
}

template <typename T>
StyleFeatures<T> Actor<T>::style_features(const Tensor<T>& images) const {
    return features_from(signals_from(trunk(images)));
}

template <typename T>
ParamList<T> Actor<T>::params() const {
    ParamList<T> p;
    c1.collect("c1", p);
    c2.collect("c2", p);
    shallow.collect("shallow_style", p);
    c3.collect("c3", p);
    for (std::size_t i = 0; i < residual.size(); ++i) {
        residual[i].collect("res" + std::to_string(i / 2) + (i % 2 == 0 ? "a" : "b"), p);
    }
    deep.collect("deep_style", p);
    head.collect("head", p);
    return p;
}

template <typename T>
Builder<T> Builder<T>::init(Rng& rng) {
    Builder b;
    b.d1 = make_conv<T>(rng, 64 + kActionChannels, 64, 3, 1);
    b.d2 = make_conv<T>(rng, 64, 32, 3, 1);
    b.d3 = make_conv<T>(rng, 32, 16, 3, 1);
    b.out = make_conv<T>(rng, 16, 3, 3, 1, 0.1);
    return b;
}

template <typename T>
Tensor<T> Builder<T>::forward(const Tensor<T>& moving, const Encoding<T>& encoding, const Tensor<T>& action) const {
    const auto& f = encoding.content_features;
    const auto& sig = encoding.signals;
    if (action.dim() != 4 || action.size(0) != f.size(0) || action.size(1) != kActionChannels ||
        action.size(2) != f.size(2) || action.size(3) != f.size(3)) {
        throw DimensionError("action " + shape_str(action.shape()) + " does not fit content features " +
                             shape_str(f.shape()));
    }
    if (moving.dim() != 4 || moving.size(2) != 4 * f.size(2) || moving.size(3) != 4 * f.size(3)) {
        throw DimensionError("moving image " + shape_str(moving.shape()) + " does not fit content features");
    }
    Tensor<T> x = relu(d1(concat(std::vector<Tensor<T>>{f, action}, 1)));
    x = upsample_nearest(modulate(x, sig.deep_std, sig.deep_mean), 2);
    x = relu(d2(x));
    x = upsample_nearest(modulate(x, sig.shallow_std, sig.shallow_mean), 2);
    x = relu(d3(x));
    const T margin = static_cast<T>(1e-3);
    const Tensor<T> p = clamp(moving.detach(), margin, T(1) - margin);
    const Tensor<T> logit = sub(log(p), log(affine_scalar(p, T(-1), T(1))));
    // Bounded edit per step: one application cannot jump all the way to the
    // style, so stylization builds up along the sequence.
    const Tensor<T> edit = affine_scalar(tanh(out(x)), static_cast<T>(kBuilderMaxLogitStep), T(0));
    return sigmoid(add(edit, logit));
}

template <typename T>
ParamList<T> Builder<T>::params() const {
    ParamList<T> p;
    d1.collect("d1", p);
    d2.collect("d2", p);
    d3.collect("d3", p);
    out.collect("out", p);
    return p;
}

template <typename T>
Critic<T> Critic<T>::init(Rng& rng) {
    Critic c;
    c.c1 = make_conv<T>(rng, 6 + kActionChannels, 32, 3, 1);
    c.c2 = make_conv<T>(rng, 32, 32, 3, 2);
    c.head = make_linear<T>(rng, 32, 1);
    return c;
}

template <typename T>
Tensor<T> Critic<T>::forward(const State<T>& state, const Tensor<T>& action) const {
    require_state(state);
    action_shape_check(state, action);
    const Tensor<T> in = concat(std::vector<Tensor<T>>{avg_pool(state.moving, 4), avg_pool(state.style, 4), action}, 1);
    const Tensor<T> x = relu(c2(relu(c1(in))));
    const Tensor<T> pooled = reduce(ReduceKind::mean, x, {2, 3});
    return reshape(head(pooled), {state.moving.size(0)});
}

template <typename T>
ParamList<T> Critic<T>::params() const {
    ParamList<T> p;
    c1.collect("c1", p);
    c2.collect("c2", p);
    head.collect("head", p);
    return p;
}

template <typename T>
Agent<T> Agent<T>::init(std::uint64_t seed, double initial_alpha) {
    if (!(initial_alpha > 0.0)) throw ParameterError("initial alpha must be positive");
    Rng actor_rng = Rng::derive(seed, "init.actor");
    Rng builder_rng = Rng::derive(seed, "init.builder");
    Rng critic_rng = Rng::derive(seed, "init.critic");
    Agent a;
    a.actor = Actor<T>::init(actor_rng);
    a.builder = Builder<T>::init(builder_rng);
    a.critic = Critic<T>::init(critic_rng);
    a.target_critic = a.critic.template cast<T>();
    a.log_alpha = Tensor<T>::scalar(static_cast<T>(std::log(initial_alpha)));
    set_requires_grad(a.actor.params(), true);
    set_requires_grad(a.builder.params(), true);
    set_requires_grad(a.critic.params(), true);
    a.log_alpha.set_requires_grad(true);
    return a;
}

template <typename T>
T Agent<T>::alpha() const {
    return static_cast<T>(std::exp(static_cast<double>(log_alpha.item())));
}

template <typename T>
ParamList<T> Agent<T>::all_params() const {
    ParamList<T> all;
    const auto add_group = [&all](const std::string& prefix, const ParamList<T>& group) {
        for (const auto& p : group) all.push_back({prefix + p.name, p.tensor});
    };
    add_group("actor.", actor.params());
    add_group("builder.", builder.params());
    add_group("critic.", critic.params());
    add_group("target_critic.", target_critic.params());
    all.push_back({"log_alpha", log_alpha});
    return all;
}

template class Actor<float>;
template class Actor<double>;
template class Builder<float>;
template class Builder<double>;
template class Critic<float>;
template class Critic<double>;
template struct Agent<float>;
template struct Agent<double>;
template Tensor<float> squashed_log_prob<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> squashed_log_prob<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace rlms
