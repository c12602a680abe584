#include <algorithm>
#include <cmath>
#include <functional>

#include "rlms/agent.hpp"
#include "rlms/gradcheck.hpp"
#include "rlms/objectives.hpp"
#include "rlms/ops.hpp"

namespace rlms {

namespace {

using TD = Tensor<double>;
using Inputs = std::vector<TD>;

TD signed_away_from_zero(Shape shape, Rng& rng) {
    TD t(std::move(shape));
    for (double& v : t.data()) {
        const double mag = rng.uniform(0.1, 1.5);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

TD positive(Shape shape, Rng& rng) {
    return rand_uniform<double>(std::move(shape), rng, 0.5, 2.0);
}

TD pixels(Shape shape, Rng& rng) {
    return rand_uniform<double>(std::move(shape), rng, 0.1, 0.9);
}

// Contracts an output with fixed random weights so every Jacobian row counts.
TD contract(const TD& y, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, "gradcheck.contract");
    return sum(mul(y, randn<double>(y.shape(), rng)));
}

struct Case {
    std::string name;
    double tolerance;
    std::size_t coords;  // per input; 0 = all
    double kink_threshold = 0.0;
    // Builds inputs and the function for one seed. Composite cases keep their
    // parameters inside the closure and list them among the inputs.
    std::function<std::pair<Inputs, ScalarFunction>(Rng&, std::uint64_t)> make;
};

Case op_case(std::string name, std::function<Inputs(Rng&)> inputs, std::function<TD(const Inputs&)> op) {
    return {name, 1e-4, 0, 0.0, [inputs, op](Rng& rng, std::uint64_t seed) {
                Inputs xs = inputs(rng);
                ScalarFunction fn = [op, seed](const Inputs& x) { return contract(op(x), seed); };
                return std::make_pair(std::move(xs), fn);
            }};
}

template <typename Net>
void append_params(const Net& net, Inputs& xs) {
    for (const auto& p : net.params()) xs.push_back(p.tensor);
}

// Relu networks are piecewise linear; see GradCheckOptions::kink_threshold. A
// straddled kink biases the central difference by half the slope gap, so the
// threshold sits at the composite tolerance.
constexpr double kKink = 1e-3;

std::vector<Case> suite() {
    using K = ElementwiseKind;
    std::vector<Case> cases;
    for (K kind : {K::add, K::sub, K::mul, K::div}) {
        cases.push_back(op_case(
            elementwise_name(kind), [](Rng& r) { return Inputs{randn<double>({2, 3, 4}, r), positive({3, 1}, r)}; },
            [kind](const Inputs& x) { return elementwise(kind, x[0], &x[1]); }));
    }
    for (K kind : {K::relu, K::tanh, K::exp, K::softplus, K::square, K::negate, K::sigmoid}) {
        cases.push_back(op_case(
            elementwise_name(kind), [](Rng& r) { return Inputs{signed_away_from_zero({3, 5}, r)}; },
            [kind](const Inputs& x) { return elementwise(kind, x[0]); }));
    }
    for (K kind : {K::log, K::sqrt}) {
        cases.push_back(op_case(
            elementwise_name(kind), [](Rng& r) { return Inputs{positive({3, 5}, r)}; },
            [kind](const Inputs& x) { return elementwise(kind, x[0]); }));
    }
    cases.push_back(op_case(
        "squash", [](Rng& r) { return Inputs{randn<double>({4, 4}, r)}; },
        [](const Inputs& x) { return squash(x[0]); }));
    cases.push_back(op_case(
        "clamp", [](Rng& r) { return Inputs{signed_away_from_zero({4, 4}, r)}; },
        [](const Inputs& x) { return clamp(x[0], -0.5, 0.7); }));
    cases.push_back(op_case(
        "affine_scalar", [](Rng& r) { return Inputs{randn<double>({4}, r)}; },
        [](const Inputs& x) { return affine_scalar(x[0], -1.5, 0.25); }));
    cases.push_back(op_case(
        "conv2d",
        [](Rng& r) {
            return Inputs{randn<double>({2, 3, 6, 6}, r), randn<double>({4, 3, 3, 3}, r), randn<double>({4}, r)};
        },
        [](const Inputs& x) { return conv2d(x[0], x[1], &x[2], 2, 1); }));
    cases.push_back(op_case(
        "conv2d_pointwise",
        [](Rng& r) { return Inputs{randn<double>({2, 3, 4, 4}, r), randn<double>({2, 3, 1, 1}, r)}; },
        [](const Inputs& x) { return conv2d(x[0], x[1], nullptr, 1, 0); }));
    cases.push_back(op_case(
        "upsample_nearest", [](Rng& r) { return Inputs{randn<double>({1, 2, 3, 3}, r)}; },
        [](const Inputs& x) { return upsample_nearest(x[0], 2); }));
    cases.push_back(op_case(
        "avg_pool", [](Rng& r) { return Inputs{randn<double>({1, 2, 4, 4}, r)}; },
        [](const Inputs& x) { return avg_pool(x[0], 2); }));
    cases.push_back(op_case(
        "channel_stats", [](Rng& r) { return Inputs{randn<double>({2, 3, 4, 4}, r)}; },
        [](const Inputs& x) {
            const auto s = channel_stats(x[0]);
            return concat(std::vector<TD>{s.mean, s.std}, 1);
        }));
    cases.push_back(op_case(
        "reduce_sum", [](Rng& r) { return Inputs{randn<double>({2, 3, 4}, r)}; },
        [](const Inputs& x) { return reduce(ReduceKind::sum, x[0], {0, 2}); }));
    cases.push_back(op_case(
        "reduce_mean", [](Rng& r) { return Inputs{randn<double>({2, 3, 4}, r)}; },
        [](const Inputs& x) { return reduce(ReduceKind::mean, x[0], {1}, true); }));
    cases.push_back(op_case(
        "reshape", [](Rng& r) { return Inputs{randn<double>({2, 6}, r)}; },
        [](const Inputs& x) { return reshape(x[0], {3, 4}); }));
    cases.push_back(op_case(
        "concat", [](Rng& r) { return Inputs{randn<double>({2, 2, 3}, r), randn<double>({2, 1, 3}, r)}; },
        [](const Inputs& x) { return concat(x, 1); }));
    cases.push_back(op_case(
        "slice", [](Rng& r) { return Inputs{randn<double>({2, 5, 3}, r)}; },
        [](const Inputs& x) { return slice(x[0], 1, 1, 4); }));
    cases.push_back(op_case(
        "matmul", [](Rng& r) { return Inputs{randn<double>({3, 4}, r), randn<double>({4, 2}, r)}; },
        [](const Inputs& x) { return matmul(x[0], x[1]); }));
    cases.push_back(op_case(
        "modulate",
        [](Rng& r) { return Inputs{randn<double>({2, 3, 4, 4}, r), positive({2, 3}, r), randn<double>({2, 3}, r)}; },
        [](const Inputs& x) { return modulate(x[0], x[1], x[2]); }));
    cases.push_back(op_case(
        "squashed_log_prob",
        [](Rng& r) {
            const TD noise = randn<double>({2, 3}, r);
            const TD log_std = rand_uniform<double>({2, 3}, r, -1.0, 0.5);
            return Inputs{noise, log_std, squash(randn<double>({2, 3}, r))};
        },
        [](const Inputs& x) { return squashed_log_prob(x[0], x[1], x[2]); }));
    cases.push_back(op_case(
        "contrastive_loss",
        [](Rng& r) {
            return Inputs{randn<double>({3, 4}, r), randn<double>({3, 4}, r), randn<double>({3, 6}, r),
                          randn<double>({3, 6}, r)};
        },
        [](const Inputs& x) { return contrastive_loss<double>({x[0], x[2]}, {x[1], x[3]}); }));
    cases.push_back(op_case(
        "final_loss",
        [](Rng& r) { return Inputs{randn<double>({3}, r), positive({}, r), positive({}, r), positive({}, r)}; },
        [](const Inputs& x) {
            UncertaintyWeights<double> w{x[0]};
            return final_loss(w, x[1], x[2], x[3]).weighted_total;
        }));

    // Losses through the frozen extractor, gradients w.r.t. the produced image.
    cases.push_back({"content_loss", 1e-3, 0, kKink, [](Rng& r, std::uint64_t) {
                         const auto bb = FeatureBackbone<double>::seeded(7);
                         const TD ref = pixels({1, 3, 8, 8}, r);
                         ScalarFunction fn = [bb, ref](const Inputs& x) { return content_loss(bb, x[0], ref); };
                         return std::make_pair(Inputs{pixels({1, 3, 8, 8}, r)}, fn);
                     }});
    cases.push_back({"style_loss", 1e-3, 0, kKink, [](Rng& r, std::uint64_t) {
                         const auto bb = FeatureBackbone<double>::seeded(7);
                         const StyleTargets<double> targets = style_targets(bb, pixels({1, 3, 8, 8}, r));
                         ScalarFunction fn = [bb, targets](const Inputs& x) {
                             return style_loss(bb, x[0], targets);
                         };
                         return std::make_pair(Inputs{pixels({1, 3, 8, 8}, r)}, fn);
                     }});

    // Composite network paths: images/features plus a sample of every parameter array.
    cases.push_back({"actor", 1e-3, 3, kKink, [](Rng& r, std::uint64_t seed) {
                         const Actor<double> actor = Actor<double>::init(r);
                         const TD noise = randn<double>({1, kActionChannels, 2, 2}, r);
                         Inputs xs{pixels({1, 3, 8, 8}, r), pixels({1, 3, 8, 8}, r)};
                         append_params(actor, xs);
                         ScalarFunction fn = [actor, noise, seed](const Inputs& x) {
                             const PolicyOutput<double> p = actor.act(actor.encode({x[0], x[1]}), &noise, nullptr);
                             return add(add(contract(p.action, seed), affine_scalar(sum(p.log_prob), 1e-2, 0.0)),
                                        contract(p.encoding.style_features.shallow, seed + 1));
                         };
                         return std::make_pair(std::move(xs), fn);
                     }});
    cases.push_back({"builder", 1e-3, 3, kKink, [](Rng& r, std::uint64_t seed) {
                         const Builder<double> builder = Builder<double>::init(r);
                         // The moving image only enters through a detached skip, so it is not probed.
                         const TD moving = pixels({1, 3, 8, 8}, r);
                         Inputs xs{randn<double>({1, 64, 2, 2}, r),
                                   randn<double>({1, 64}, r),
                                   positive({1, 64}, r),
                                   randn<double>({1, 32}, r),
                                   positive({1, 32}, r),
                                   squash(randn<double>({1, kActionChannels, 2, 2}, r))};
                         append_params(builder, xs);
                         ScalarFunction fn = [builder, moving, seed](const Inputs& x) {
                             Encoding<double> e;
                             e.content_features = x[0];
                             e.signals = {x[3], x[4], x[1], x[2]};
                             return contract(builder.forward(moving, e, x[5]), seed);
                         };
                         return std::make_pair(std::move(xs), fn);
                     }});
    cases.push_back({"critic", 1e-3, 3, kKink, [](Rng& r, std::uint64_t seed) {
                         const Critic<double> critic = Critic<double>::init(r);
                         Inputs xs{pixels({2, 3, 8, 8}, r), pixels({2, 3, 8, 8}, r),
                                   squash(randn<double>({2, kActionChannels, 2, 2}, r))};
                         append_params(critic, xs);
                         ScalarFunction fn = [critic, seed](const Inputs& x) {
                             return contract(critic.forward({x[0], x[1]}, x[2]), seed);
                         };
                         return std::make_pair(std::move(xs), fn);
                     }});
    return cases;
}

}  // namespace

std::vector<OpCheckRow> run_gradcheck_suite(std::uint64_t seed, std::size_t seeds_per_op) {
    std::vector<OpCheckRow> rows;
    for (const Case& c : suite()) {
        OpCheckRow row;
        row.op = c.name;
        row.tolerance = c.tolerance;
        for (std::size_t s = 0; s < seeds_per_op; ++s) {
            Rng rng = Rng::derive(seed + s, c.name);
            auto [inputs, fn] = c.make(rng, seed + s + 1000);
            GradCheckOptions opt;
            opt.max_coords_per_input = c.coords;
            opt.coord_seed = seed + s;
            opt.kink_threshold = c.kink_threshold;
            const GradCheckResult res = check_gradients(fn, std::move(inputs), opt);
            row.worst_relative_error = std::max(row.worst_relative_error, res.relative_error);
            row.coords += res.coords;
            row.skipped += res.skipped;
            ++row.seeds;
        }
        // A check that skipped most of its coordinates has not checked much.
        row.passed = row.worst_relative_error < row.tolerance && row.skipped * 4 <= row.coords + row.skipped;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rlms
