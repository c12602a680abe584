#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rlms/agent.hpp"
#include "rlms/error.hpp"
#include "rlms/gradcheck.hpp"
#include "support/fixtures.hpp"

using namespace rlms;
using TD = Tensor<double>;
using TF = Tensor<float>;

namespace {

ParamList<double> single(const TD& t) {
    return {{"x", t}};
}

State<float> small_state(std::size_t n, std::size_t size, std::uint64_t seed) {
    Rng rng(seed);
    return {rand_uniform<float>(Shape{n, 3, size, size}, rng), rand_uniform<float>(Shape{n, 3, size, size}, rng)};
}

}  // namespace

TEST_CASE("ema_update examples") {
    const TD src(Shape{3}, {2, -1, 5});
    SUBCASE("omega 1 copies") {
        const TD dst(Shape{3}, {0, 7, 1});
        ema_update(single(src), single(dst), 1.0);
        for (std::size_t i = 0; i < 3; ++i) CHECK(dst.at(i) == src.at(i));
    }
    SUBCASE("omega 0 keeps") {
        const TD dst(Shape{3}, {0, 7, 1});
        ema_update(single(src), single(dst), 0.0);
        CHECK(dst.at(0) == 0.0);
        CHECK(dst.at(1) == 7.0);
        CHECK(dst.at(2) == 1.0);
    }
    SUBCASE("midpoint") {
        const TD d(Shape{1}, {2});
        const TD t(Shape{1}, {0});
        ema_update(single(d), single(t), 0.5);
        CHECK(t.at(0) == 1.0);
    }
    SUBCASE("omega outside [0, 1]") {
        const TD dst(Shape{3});
        CHECK_THROWS_AS(ema_update(single(src), single(dst), 1.5), ParameterError);
        CHECK_THROWS_AS(ema_update(single(src), single(dst), -0.1), ParameterError);
    }
}

TEST_CASE("ema_update contracts the gap by exactly 1 - omega") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const double omega = rng.uniform();
        const TD src = randn<double>(Shape{64}, rng);
        const TD dst = randn<double>(Shape{64}, rng);
        const TD before = dst.clone();
        ema_update(single(src), single(dst), omega);
        for (std::size_t i = 0; i < 64; ++i) {
            const double expect = (1.0 - omega) * std::abs(before.at(i) - src.at(i));
            CHECK(std::abs(dst.at(i) - src.at(i)) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("count_params examples") {
    Rng rng(0);
    ParamList<float> lin;
    make_linear<float>(rng, 10, 5).collect("l", lin);
    CHECK(count_params(lin).count == 55);
    ParamList<float> conv;
    make_conv<float>(rng, 16, 32, 3, 1).collect("c", conv);
    CHECK(count_params(conv).count == 4640);
    CHECK(count_params(conv).bytes == 4640 * 4);
}

TEST_CASE("actor and builder stay inside the parameter budget") {
    const Agent<float> agent = Agent<float>::init(0, 1.0);
    ParamList<float> p = agent.actor_params();
    for (const auto& b : agent.builder_params()) p.push_back(b);
    const ParamCount c = count_params(p);
    MESSAGE("actor+builder parameters: " << c.count);
    CHECK(c.count <= 500000);
    CHECK(c.bytes == 4 * c.count);
}

TEST_CASE("target critic starts equal to the critic") {
    const Agent<float> agent = Agent<float>::init(5, 1.0);
    const auto a = agent.critic_params();
    const auto b = agent.target_params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK_FALSE(a[i].tensor.same_storage(b[i].tensor));
        CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
    }
}

TEST_CASE("squashed log-prob of a standard normal at its mode") {
    const TD noise(Shape{1, 1, 1, 1}, {0.0});
    const TD log_std(Shape{1, 1, 1, 1}, {0.0});
    const TD action(Shape{1, 1, 1, 1}, {std::tanh(0.0)});
    const double lp = squashed_log_prob(noise, log_std, action).at(0);
    CHECK(lp == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi) - std::log(1.0 + kSquashEpsilon)).epsilon(1e-15));
    CHECK(lp == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-5));
}

TEST_CASE("squashed log-prob matches the density evaluated from the pre-squash sample") {
    // Density of u = mean + std * n under N(mean, std^2), written from u rather than n,
    // minus the change of variables through tanh.
    Rng rng(11);
    double worst = 0.0;
    for (int draw = 0; draw < 10000; ++draw) {
        const double mean = rng.uniform(-2, 2);
        const double log_std = rng.uniform(kLogStdMin, kLogStdMax);
        const double n = rng.normal();
        const double sd = std::exp(log_std);
        const double u = mean + sd * n;
        const double a = std::tanh(u);
        const long double z = (static_cast<long double>(u) - mean) / sd;
        const long double logpdf = -0.5L * z * z - std::log(static_cast<long double>(sd)) -
                                   0.5L * std::log(2.0L * std::numbers::pi_v<long double>);
        const long double numeric = logpdf - std::log(1.0L - static_cast<long double>(a) * a + kSquashEpsilon);
        const double analytic =
            squashed_log_prob(TD(Shape{1, 1}, {n}), TD(Shape{1, 1}, {log_std}), TD(Shape{1, 1}, {a})).at(0);
        worst = std::max(worst, static_cast<double>(std::abs(analytic - numeric) / std::max(1.0L, std::abs(numeric))));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("sampled actions stay strictly inside (-1, 1)") {
    const Agent<float> agent = Agent<float>::init(2, 1.0);
    const State<float> s = small_state(4, 8, 9);
    Rng rng(4);
    std::size_t draws = 0;
    std::size_t outside = 0;
    const Encoding<float> enc = agent.actor.encode(s);
    while (draws < 10000) {
        // Scaled noise reaches deep into the tanh tails.
        TF noise = randn<float>(Shape{4, kActionChannels, 2, 2}, rng, 8.0f);
        const PolicyOutput<float> out = agent.actor.act(enc, &noise, nullptr);
        for (float v : out.action.data()) {
            outside += (v <= -1.0f || v >= 1.0f) ? 1 : 0;
            ++draws;
        }
    }
    CHECK(outside == 0);
}

TEST_CASE("actor forward contract") {
    const Agent<float> agent = Agent<float>::init(1, 1.0);
    const State<float> s = small_state(1, 16, 2);
    SUBCASE("zero noise gives the squashed mean") {
        const TF zero(Shape{1, kActionChannels, 4, 4});
        const auto out = agent.actor.forward(s, &zero, nullptr);
        for (std::size_t i = 0; i < out.mean.numel(); ++i) {
            CHECK(out.action.at(i) == doctest::Approx(std::tanh(out.mean.at(i))).epsilon(1e-6));
        }
    }
    SUBCASE("same state and noise give identical output") {
        Rng r(0);
        const TF noise = randn<float>(Shape{1, kActionChannels, 4, 4}, r);
        const auto a = agent.actor.forward(s, &noise, nullptr);
        const auto b = agent.actor.forward(s, &noise, nullptr);
        CHECK(std::equal(a.action.data().begin(), a.action.data().end(), b.action.data().begin()));
        CHECK(a.log_prob.at(0) == b.log_prob.at(0));
    }
    SUBCASE("log_std is clamped") {
        Rng r(1);
        const auto out = agent.actor.forward(s, nullptr, &r);
        for (float v : out.log_std.data()) {
            CHECK(v >= kLogStdMin);
            CHECK(v <= kLogStdMax);
        }
    }
    SUBCASE("style signals have non-negative std") {
        const Encoding<float> enc = agent.actor.encode(s);
        for (float v : enc.signals.shallow_std.data()) CHECK(v >= 0.0f);
        for (float v : enc.signals.deep_std.data()) CHECK(v >= 0.0f);
        CHECK(enc.signals.shallow_mean.size(1) == 32);
        CHECK(enc.signals.deep_mean.size(1) == 64);
    }
    SUBCASE("indivisible size is a dimension error") {
        const State<float> odd = small_state(1, 10, 3);
        CHECK_THROWS_AS(agent.actor.forward(odd, nullptr, nullptr), DimensionError);
    }
}

TEST_CASE("encoding a batch with repeated style images matches per-sample encoding") {
    const Agent<float> agent = Agent<float>::init(7, 1.0);
    Rng rng(5);
    const TF m = rand_uniform<float>(Shape{4, 3, 16, 16}, rng);
    const TF s1 = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
    const TF s2 = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
    const TF styles = concat(std::vector<TF>{s1, s2, s1, s1}, 0);
    const Encoding<float> batched = agent.actor.encode({m, styles});
    for (std::size_t i = 0; i < 4; ++i) {
        const Encoding<float> one = agent.actor.encode({slice(m, 0, i, i + 1), slice(styles, 0, i, i + 1)});
        const TF a = slice(batched.signals.deep_std, 0, i, i + 1);
        const TF b = slice(batched.style_features.shallow, 0, i, i + 1);
        for (std::size_t k = 0; k < a.numel(); ++k) CHECK(a.at(k) == one.signals.deep_std.at(k));
        for (std::size_t k = 0; k < b.numel(); ++k) CHECK(b.at(k) == one.style_features.shallow.at(k));
    }
}

TEST_CASE("one encoder serves both images") {
    // The style path reuses the trunk tensors: perturbing c1 changes both the
    // content features and the style signals.
    Agent<float> agent = Agent<float>::init(3, 1.0);
    const State<float> s = small_state(1, 16, 6);
    const Encoding<float> before = agent.actor.encode(s);
    const auto params = agent.actor_params();
    REQUIRE(params.front().name == "c1.weight");
    CHECK(params.front().tensor.same_storage(agent.actor.c1.weight));
    Tensor<float>(agent.actor.c1.weight).data()[0] += 0.5f;
    const Encoding<float> after = agent.actor.encode(s);
    CHECK(before.content_features.at(0) != after.content_features.at(0));
    bool signals_moved = false;
    for (std::size_t k = 0; k < before.signals.shallow_mean.numel(); ++k) {
        signals_moved |= before.signals.shallow_mean.at(k) != after.signals.shallow_mean.at(k);
    }
    CHECK(signals_moved);
}

TEST_CASE("builder output range and determinism") {
    const Agent<float> agent = Agent<float>::init(4, 1.0);
    const State<float> s = small_state(2, 16, 8);
    Rng rng(1);
    const auto pol = agent.actor.forward(s, nullptr, &rng);
    const TF a = agent.builder.forward(s.moving, pol.encoding, pol.action);
    const TF b = agent.builder.forward(s.moving, pol.encoding, pol.action);
    CHECK(a.shape() == s.moving.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(a.at(i) >= 0.0f);
        CHECK(a.at(i) <= 1.0f);
        CHECK(a.at(i) == b.at(i));
    }
}

TEST_CASE("builder and critic gradients w.r.t. the action match finite differences") {
    const Agent<double> agent = Agent<float>::init(9, 1.0).cast<double>();
    Rng rng(2);
    const TD moving = rand_uniform<double>(Shape{1, 3, 8, 8}, rng, 0.1, 0.9);
    const TD style = rand_uniform<double>(Shape{1, 3, 8, 8}, rng, 0.1, 0.9);
    const Encoding<double> enc = agent.actor.encode({moving, style});
    const TD action = rand_uniform<double>(Shape{1, kActionChannels, 2, 2}, rng, -0.8, 0.8);
    GradCheckOptions opt;
    opt.kink_threshold = 1e-3;

    const auto builder_fn = [&](const std::vector<TD>& x) {
        return mean(agent.builder.forward(moving, enc, x[0]));
    };
    const auto b = check_gradients(builder_fn, {action}, opt);
    CHECK(b.relative_error < 1e-3);

    const auto critic_fn = [&](const std::vector<TD>& x) { return sum(agent.critic.forward({moving, style}, x[0])); };
    const auto c = check_gradients(critic_fn, {action}, opt);
    CHECK(c.relative_error < 1e-3);
}

TEST_CASE("critic gradients reach its parameters and the action only") {
    Agent<float> agent = Agent<float>::init(6, 1.0);
    const State<float> s = small_state(2, 16, 10);
    Rng rng(3);
    TF action = rand_uniform<float>(Shape{2, kActionChannels, 4, 4}, rng, -0.5f, 0.5f);
    action.set_requires_grad(true);
    set_requires_grad(agent.critic_params(), true);
    Tape<float> tape;
    tape.backward(sum(agent.critic.forward(s, action)));
    CHECK(action.has_grad());
    CHECK_FALSE(s.moving.has_grad());
    CHECK_FALSE(s.style.has_grad());
    for (const auto& p : agent.critic_params()) CHECK(p.tensor.has_grad());
    const TF q1 = agent.critic.forward(s, action);
    const TF q2 = agent.critic.forward(s, action);
    CHECK(q1.shape() == Shape{2});
    CHECK(q1.at(0) == q2.at(0));
}
