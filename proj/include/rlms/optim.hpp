#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rlms/layers.hpp"

namespace rlms {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment descent over a fixed parameter list. Parameters without a
// gradient buffer are skipped for that step (their moments are untouched).
class Adam {
public:
    Adam() = default;
    Adam(ParamList<float> params, AdamConfig config);

    // One update from the current gradients. Does not clear them.
    void step();

    std::size_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }
    void set_lr(double lr) { config_.lr = lr; }
    const ParamList<float>& params() const { return params_; }

    // Moments and step count as named arrays under `prefix`, for checkpoints.
    ParamList<float> state(const std::string& prefix) const;
    void load_state(const ParamList<float>& arrays, const std::string& prefix);

private:
    ParamList<float> params_;
    AdamConfig config_;
    std::vector<std::vector<float>> m_, v_;
    std::size_t steps_ = 0;
};

}  // namespace rlms
