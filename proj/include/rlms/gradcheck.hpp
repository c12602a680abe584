#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rlms/tensor.hpp"

namespace rlms {

struct GradCheckOptions {
    double step = 1e-4;
    // Coordinates probed per input; 0 probes every element.
    std::size_t max_coords_per_input = 0;
    std::uint64_t coord_seed = 0;
    // For piecewise-linear paths: a coordinate whose one-sided slopes differ by
    // more than this fraction of their magnitude has a kink inside the stencil
    // and is skipped. 0 keeps every coordinate.
    double kink_threshold = 0.0;
};

struct GradCheckResult {
    // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the probed coordinates.
    double relative_error = 0.0;
    std::size_t coords = 0;
    std::size_t skipped = 0;  // kinked coordinates left out of relative_error
};

using ScalarFunction = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// Central finite differences against one backward pass of `fn` at `inputs`.
GradCheckResult check_gradients(const ScalarFunction& fn, std::vector<Tensor<double>> inputs,
                                const GradCheckOptions& options = {});

struct OpCheckRow {
    std::string op;
    double worst_relative_error = 0.0;
    double tolerance = 0.0;
    std::size_t seeds = 0;
    std::size_t coords = 0;
    std::size_t skipped = 0;
    bool passed = false;
};

// Finite-difference suite over every differentiable op plus the composite
// actor/builder/critic paths, each across `seeds_per_op` random seeds.
std::vector<OpCheckRow> run_gradcheck_suite(std::uint64_t seed, std::size_t seeds_per_op = 20);

}  // namespace rlms
