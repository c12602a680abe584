#include "rlms/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlms/rng.hpp"

namespace rlms {

GradCheckResult check_gradients(const ScalarFunction& fn, std::vector<Tensor<double>> inputs,
                                const GradCheckOptions& options) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.clear_grad();
    }
    {
        Tape<double> tape;
        const Tensor<double> y = fn(inputs);
        tape.backward(y);
    }

    Rng rng = Rng::derive(options.coord_seed, "gradcheck-coords");
    double diff_sq = 0.0;
    double ana_sq = 0.0;
    double num_sq = 0.0;
    std::size_t coords = 0;
    std::size_t skipped = 0;
    NoGradGuard no_grad;
    const double center = options.kink_threshold > 0.0 ? fn(inputs).item() : 0.0;
    for (auto& t : inputs) {
        std::vector<std::size_t> picks(t.numel());
        std::iota(picks.begin(), picks.end(), std::size_t{0});
        if (options.max_coords_per_input != 0 && picks.size() > options.max_coords_per_input) {
            std::shuffle(picks.begin(), picks.end(), rng.engine());
            picks.resize(options.max_coords_per_input);
        }
        const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                          : std::vector<double>(t.numel(), 0.0);
        for (std::size_t i : picks) {
            const double saved = t.data()[i];
            t.data()[i] = saved + options.step;
            const double up = fn(inputs).item();
            t.data()[i] = saved - options.step;
            const double down = fn(inputs).item();
            t.data()[i] = saved;
            if (options.kink_threshold > 0.0) {
                const double fwd = (up - center) / options.step;
                const double bwd = (center - down) / options.step;
                if (std::abs(fwd - bwd) > options.kink_threshold * std::max(std::abs(fwd), std::abs(bwd)) + 1e-12) {
                    ++skipped;
                    continue;
                }
            }
            const double numeric = (up - down) / (2.0 * options.step);
            diff_sq += (analytic[i] - numeric) * (analytic[i] - numeric);
            ana_sq += analytic[i] * analytic[i];
            num_sq += numeric * numeric;
            ++coords;
        }
    }
    GradCheckResult result;
    result.coords = coords;
    result.skipped = skipped;
    const double scale = std::sqrt(std::max(ana_sq, num_sq));
    result.relative_error = scale < 1e-12 ? std::sqrt(diff_sq) : std::sqrt(diff_sq) / scale;
    return result;
}

}  // namespace rlms
