#include "rlms/optim.hpp"

#include <cmath>

#include "rlms/checkpoint.hpp"
#include "rlms/error.hpp"

namespace rlms {

Adam::Adam(ParamList<float> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.lr >= 0.0)) throw ParameterError("learning rate must be non-negative");
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0f);
        v_.emplace_back(p.tensor.numel(), 0.0f);
    }
}

void Adam::step() {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    const float b1 = static_cast<float>(config_.beta1);
    const float b2 = static_cast<float>(config_.beta2);
    const float step_size = static_cast<float>(config_.lr / c1);
    const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
    const float eps = static_cast<float>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor<float> p = params_[i].tensor;
        if (!p.has_grad()) continue;
        const auto g = p.grad();
        auto x = p.data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            x[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
        }
    }
}

ParamList<float> Adam::state(const std::string& prefix) const {
    ParamList<float> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.push_back({prefix + ".m." + params_[i].name, Tensor<float>(params_[i].tensor.shape(), m_[i])});
        out.push_back({prefix + ".v." + params_[i].name, Tensor<float>(params_[i].tensor.shape(), v_[i])});
    }
    out.push_back({prefix + ".steps", Tensor<float>(Shape{1}, std::vector<float>{static_cast<float>(steps_)})});
    return out;
}

void Adam::load_state(const ParamList<float>& arrays, const std::string& prefix) {
    ParamList<float> moments;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        moments.push_back({prefix + ".m." + params_[i].name, Tensor<float>(params_[i].tensor.shape())});
        moments.push_back({prefix + ".v." + params_[i].name, Tensor<float>(params_[i].tensor.shape())});
    }
    Tensor<float> steps(Shape{1});
    moments.push_back({prefix + ".steps", steps});
    assign_by_name(arrays, moments);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto m = moments[2 * i].tensor.data();
        const auto v = moments[2 * i + 1].tensor.data();
        m_[i].assign(m.begin(), m.end());
        v_[i].assign(v.begin(), v.end());
    }
    steps_ = static_cast<std::size_t>(steps.at(0));
}

}  // namespace rlms
