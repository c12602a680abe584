#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "rlms/tensor.hpp"

namespace rlms {

// Seeded generator. Every stream in a run is derived from the run seed, a fixed
// subsystem label, and a counter, so any stream can be recreated from those three
// values alone (which is what makes training resumable).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t counter = 0);

    double uniform(double lo = 0.0, double hi = 1.0);
    double normal();
    // Uniform in [0, n).
    std::size_t index(std::size_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t fnv1a(std::string_view text);

template <typename T>
Tensor<T> randn(Shape shape, Rng& rng, T scale = T(1)) {
    Tensor<T> t(std::move(shape));
    for (T& v : t.data()) v = static_cast<T>(rng.normal()) * scale;
    return t;
}

template <typename T>
Tensor<T> rand_uniform(Shape shape, Rng& rng, T lo = T(0), T hi = T(1)) {
    Tensor<T> t(std::move(shape));
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

}  // namespace rlms
