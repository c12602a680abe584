#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "rlms/backbone.hpp"
#include "rlms/checkpoint.hpp"
#include "rlms/error.hpp"
#include "rlms/gradcheck.hpp"
#include "rlms/objectives.hpp"
#include "rlms/optim.hpp"
#include "support/oracles.hpp"

using namespace rlms;
using TD = Tensor<double>;
using TF = Tensor<float>;

namespace {

// 1x1 identity convolutions: every tap sees the input pixels themselves (after relu).
FeatureBackbone<double> identity_backbone() {
    std::vector<Conv2d<double>> layers;
    for (int i = 0; i < 2; ++i) {
        Conv2d<double> c;
        c.weight = TD(Shape{3, 3, 1, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        c.bias = TD(Shape{3});
        layers.push_back(c);
    }
    return FeatureBackbone<double>(layers, {0, 1}, 1);
}

// Sum over taps of squared differences of two-pass channel statistics.
double style_loss_oracle(const FeatureBackbone<double>& bb, const TD& a, const TD& b) {
    const auto fa = bb.extract(a);
    const auto fb = bb.extract(b);
    double total = 0.0;
    for (std::size_t j = 0; j < fa.size(); ++j) {
        const std::size_t c = fa[j].size(1);
        const std::size_t hw_a = fa[j].size(2) * fa[j].size(3);
        const std::size_t hw_b = fb[j].size(2) * fb[j].size(3);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const auto sa = oracle::two_pass_stats(fa[j].ptr() + ch * hw_a, hw_a);
            const auto sb = oracle::two_pass_stats(fb[j].ptr() + ch * hw_b, hw_b);
            total += (sa.mean - sb.mean) * (sa.mean - sb.mean) + (sa.std - sb.std) * (sa.std - sb.std);
        }
    }
    return total;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("rlms_objectives_" + name);
}

}  // namespace

TEST_CASE("backbone structure") {
    const auto bb = FeatureBackbone<float>::seeded(1);
    CHECK(bb.tap_count() == 4);
    CHECK(bb.content_tap() == 2);
    Rng rng(0);
    const auto feats = bb.extract(rand_uniform<float>(Shape{2, 3, 32, 32}, rng));
    const std::size_t channels[] = {16, 32, 64, 128};
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(feats[j].size(0) == 2);
        CHECK(feats[j].size(1) == channels[j]);
        if (j > 0) CHECK(feats[j].size(2) <= feats[j - 1].size(2));
    }
    CHECK_THROWS_AS(bb.extract(TF(Shape{1, 3, 4, 4})), DimensionError);
}

TEST_CASE("backbone extract examples") {
    const auto bb = FeatureBackbone<float>::seeded(42);
    SUBCASE("identical images give identical features") {
        Rng rng(1);
        const TF x = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
        const auto a = bb.extract(x);
        const auto b = bb.extract(x.clone());
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(std::equal(a[j].data().begin(), a[j].data().end(), b[j].data().begin()));
        }
    }
    SUBCASE("zero image gives zero activations") {
        for (const auto& f : bb.extract(TF(Shape{1, 3, 8, 8}))) {
            for (float v : f.data()) CHECK(v == 0.0f);
        }
    }
    SUBCASE("seed 42 on ones is reproducible from scratch") {
        const auto again = FeatureBackbone<float>::seeded(42);
        const TF ones = TF::full(Shape{1, 3, 8, 8}, 1.0f);
        const auto a = bb.extract(ones);
        const auto b = again.extract(ones);
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(std::memcmp(a[j].ptr(), b[j].ptr(), a[j].numel() * sizeof(float)) == 0);
        }
    }
}

TEST_CASE("backbone load and save") {
    const auto bb = FeatureBackbone<float>::seeded(8);
    const auto path = temp_path("backbone.ckpt");
    save_backbone(bb, path);
    const auto loaded = load_backbone(path);
    Rng rng(2);
    const TF x = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
    const auto a = bb.extract(x);
    const auto b = loaded.extract(x);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(std::equal(a[j].data().begin(), a[j].data().end(), b[j].data().begin()));
    }
    const auto p1 = load_backbone(std::uint64_t{8}).params();
    const auto p2 = bb.params();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(std::equal(p1[i].tensor.data().begin(), p1[i].tensor.data().end(), p2[i].tensor.data().begin()));
    }

    auto arrays = bb.params();
    const std::string dropped = arrays[2].name;
    arrays.erase(arrays.begin() + 2);
    save_container(path, arrays);
    try {
        load_backbone(path);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(dropped) != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("backbone parameters never collect gradients") {
    const auto bb = FeatureBackbone<double>::seeded(3);
    Rng rng(4);
    TD x = rand_uniform<double>(Shape{1, 3, 8, 8}, rng);
    x.set_requires_grad(true);
    Tape<double> tape;
    const auto feats = bb.extract(x);
    tape.backward(add(sum(feats[1]), sum(feats[3])));
    CHECK(x.has_grad());
    for (const auto& p : bb.params()) {
        CHECK_FALSE(p.tensor.requires_grad());
        CHECK_FALSE(p.tensor.has_grad());
    }
}

TEST_CASE("input gradients through the backbone match finite differences") {
    const auto bb = FeatureBackbone<double>::seeded(5);
    GradCheckOptions opt;
    opt.kink_threshold = 1e-3;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(seed);
        const TD w = randn<double>(Shape{1, 64, 2, 2}, rng);
        const auto fn = [&](const std::vector<TD>& x) { return sum(mul(bb.extract(x[0])[2], w)); };
        CHECK(check_gradients(fn, {rand_uniform<double>(Shape{1, 3, 8, 8}, rng)}, opt).relative_error < 1e-3);
    }
}

TEST_CASE("content loss examples") {
    const auto bb = FeatureBackbone<double>::seeded(6);
    Rng rng(7);
    const TD a = rand_uniform<double>(Shape{1, 3, 16, 16}, rng);
    const TD b = rand_uniform<double>(Shape{1, 3, 16, 16}, rng);
    CHECK(content_loss(bb, a, a).item() == 0.0);

    const auto id = identity_backbone();
    const TD shifted = affine_scalar(a, 1.0, 1.0);
    CHECK(content_loss(id, shifted, a).item() == doctest::Approx(1.0).epsilon(1e-12));

    // extract, subtract, square, mean
    const TD fa = bb.extract(a)[bb.content_tap()];
    const TD fb = bb.extract(b)[bb.content_tap()];
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.numel(); ++i) acc += (fa.at(i) - fb.at(i)) * (fa.at(i) - fb.at(i));
    CHECK(content_loss(bb, a, b).item() == doctest::Approx(acc / static_cast<double>(fa.numel())).epsilon(1e-6));

    CHECK_THROWS_AS(content_loss(bb, a, TD(Shape{1, 3, 8, 8})), DimensionError);
}

TEST_CASE("content loss gradient flows only to the produced image") {
    const auto bb = FeatureBackbone<double>::seeded(6);
    Rng rng(8);
    TD p = rand_uniform<double>(Shape{1, 3, 8, 8}, rng);
    TD r = rand_uniform<double>(Shape{1, 3, 8, 8}, rng);
    p.set_requires_grad(true);
    r.set_requires_grad(true);
    Tape<double> tape;
    tape.backward(content_loss(bb, p, r));
    CHECK(p.has_grad());
    CHECK_FALSE(r.has_grad());
}

TEST_CASE("style loss examples") {
    const auto bb = FeatureBackbone<double>::seeded(9);
    Rng rng(10);
    const TD a = rand_uniform<double>(Shape{1, 3, 16, 16}, rng);
    const TD b = rand_uniform<double>(Shape{1, 3, 24, 24}, rng);
    CHECK(std::abs(style_loss(bb, a, a).item()) < 1e-10);
    CHECK(style_loss(bb, a, b).item() == doctest::Approx(style_loss_oracle(bb, a, b)).epsilon(1e-6));

    SUBCASE("spatial shuffle leaves a pointwise backbone's statistics unchanged") {
        const auto id = identity_backbone();
        std::vector<std::size_t> perm(256);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        TD shuffled(a.shape());
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < 256; ++i) shuffled.data()[c * 256 + i] = a.at(c * 256 + perm[i]);
        }
        CHECK(std::abs(style_loss(id, shuffled, a).item()) < 1e-6);
    }
}

TEST_CASE("reward is the negated style loss") {
    const auto bb = FeatureBackbone<float>::seeded(11);
    Rng rng(12);
    double worst = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
        const TF p = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
        const TF s = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
        const double r = reward(bb, p, s);
        const double l = style_loss(bb, p, s).item();
        worst = std::max(worst, std::abs(r + l) / std::max(std::abs(l), 1e-30));
    }
    CHECK(worst <= 1e-6);
    const TF s = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
    CHECK(reward(bb, s, s) == 0.0);
}

TEST_CASE("contrastive loss examples") {
    const auto col = [](std::initializer_list<double> v) { return TD(Shape{v.size(), 1}, v); };
    SUBCASE("exact positives give zero") {
        CHECK(contrastive_loss<double>({col({0, 1})}, {col({0, 1})}).item() == 0.0);
        Rng rng(1);
        const TD m = randn<double>(Shape{4, 6}, rng);
        const TD d = randn<double>(Shape{4, 10}, rng);
        CHECK(contrastive_loss<double>({m, d}, {m.clone(), d.clone()}).item() == 0.0);
    }
    SUBCASE("hand evaluation with the epsilon guard") {
        // i=0: (1-0)^2 / ((1-2)^2 + eps); i=1: (0-2)^2 / ((0-0)^2 + eps)
        const double expect = 1.0 / (1.0 + kContrastiveEpsilon) + 4.0 / kContrastiveEpsilon;
        CHECK(contrastive_loss<double>({col({1, 0})}, {col({0, 2})}).item() == doctest::Approx(expect).epsilon(1e-6));
    }
    SUBCASE("batch of one has no negatives") {
        CHECK_THROWS_AS(contrastive_loss<double>({col({1})}, {col({0})}), ContractError);
    }
    SUBCASE("non-negative on random features") {
        Rng rng(2);
        for (int i = 0; i < 20; ++i) {
            const TD m = randn<double>(Shape{3, 5}, rng);
            const TD s = randn<double>(Shape{3, 5}, rng);
            CHECK(contrastive_loss<double>({m}, {s}).item() >= 0.0);
        }
    }
}

TEST_CASE("final loss examples") {
    const TD lc = TD::scalar(0.5), ls = TD::scalar(2.0), lt = TD::scalar(1.0);
    const auto w0 = UncertaintyWeights<double>::init();
    const auto b0 = final_loss(w0, lc, ls, lt);
    CHECK(b0.weighted_total.item() == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(b0.lambdas == std::array<double, 3>{1.0, 1.0, 1.0});

    const auto w1 = UncertaintyWeights<double>::init(std::log(4.0), 0, 0);
    const auto b1 = final_loss(w1, TD::scalar(2.0), TD::scalar(0.0), TD::scalar(0.0));
    CHECK(b1.weighted_total.item() == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-14));
    CHECK(b1.lambdas[0] == doctest::Approx(0.25));

    CHECK_THROWS_AS(final_loss(w0, lc, TD::scalar(std::nan("")), lt), NumericError);
    try {
        final_loss(w0, lc, ls, TD::scalar(INFINITY));
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("contrastive") != std::string::npos);
    }
}

TEST_CASE("final loss recomputes from its parts") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double s1 = rng.uniform(-2, 2), s2 = rng.uniform(-2, 2), s3 = rng.uniform(-2, 2);
        const double l1 = rng.uniform(0, 3), l2 = rng.uniform(0, 3), l3 = rng.uniform(0, 3);
        const auto b = final_loss(UncertaintyWeights<double>::init(s1, s2, s3), TD::scalar(l1), TD::scalar(l2),
                                  TD::scalar(l3));
        const double expect = b.lambdas[0] * l1 + b.lambdas[1] * l2 + b.lambdas[2] * l3 + 0.5 * (s1 + s2 + s3);
        CHECK(b.weighted_total.item() == doctest::Approx(expect).epsilon(1e-12));
        CHECK(b.lambdas[1] == doctest::Approx(std::exp(-s2)).epsilon(1e-15));
    }
}

TEST_CASE("final loss slope in s_i has the sign of 1/2 - L_i exp(-s_i)") {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const std::size_t k = rng.index(3);
        std::array<double, 3> s{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const std::array<double, 3> l{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)};
        const auto total = [&](const std::array<double, 3>& sv) {
            return final_loss(UncertaintyWeights<double>::init(sv[0], sv[1], sv[2]), TD::scalar(l[0]),
                              TD::scalar(l[1]), TD::scalar(l[2]))
                .weighted_total.item();
        };
        auto up = s, down = s;
        up[k] += 1e-6;
        down[k] -= 1e-6;
        const double slope = (total(up) - total(down)) / 2e-6;
        const double analytic = 0.5 - l[k] * std::exp(-s[k]);
        if (std::abs(analytic) > 1e-4) CHECK((slope > 0) == (analytic > 0));
    }
}

TEST_CASE("descending on s alone reaches sigma^2 = 2L") {
    const std::array<double, 3> losses{0.5, 2.0, 1.0};
    SUBCASE("adaptive moments") {
        auto w = UncertaintyWeights<float>::init();
        w.s.set_requires_grad(true);
        Adam opt({{"s", w.s}}, AdamConfig{1e-2});
        const TF lc = TF::scalar(0.5f), ls = TF::scalar(2.0f), lt = TF::scalar(1.0f);
        for (int step = 0; step < 5000; ++step) {
            w.s.zero_grad();
            Tape<float> tape;
            tape.backward(final_loss(w, lc, ls, lt).weighted_total);
            opt.step();
        }
        const auto sig = w.sigma_squared();
        for (std::size_t i = 0; i < 3; ++i) CHECK(sig[i] == doctest::Approx(2 * losses[i]).epsilon(0.05));
    }
    SUBCASE("golden-section minimization of each term") {
        // L e^{-s} + s/2 per coordinate, minimized independently of the library.
        for (double l : losses) {
            double a = -10, b = 10;
            const double g = (std::sqrt(5.0) - 1) / 2;
            const auto f = [l](double s) { return l * std::exp(-s) + 0.5 * s; };
            for (int it = 0; it < 200; ++it) {
                const double c = b - g * (b - a), d = a + g * (b - a);
                (f(c) < f(d) ? b : a) = (f(c) < f(d) ? d : c);
            }
            CHECK(std::exp(0.5 * (a + b)) == doctest::Approx(2 * l).epsilon(1e-6));
        }
    }
}

TEST_CASE("precomputed style targets give the same loss and reward") {
    const auto bb = FeatureBackbone<float>::seeded(21);
    Rng rng(22);
    const TF s = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
    const StyleTargets<float> targets = style_targets(bb, s);
    for (int i = 0; i < 5; ++i) {
        const TF p = rand_uniform<float>(Shape{1, 3, 16, 16}, rng);
        CHECK(style_loss(bb, p, targets).item() == style_loss(bb, p, s).item());
        CHECK(reward(bb, p, targets) == std::vector<double>{reward(bb, p, s)});
    }
}
