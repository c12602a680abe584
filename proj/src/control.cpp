#include "rlms/control.hpp"

#include <numeric>

#include "rlms/error.hpp"

namespace rlms {

ReplayPool::ReplayPool(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ParameterError("replay pool capacity must be positive");
}

void ReplayPool::push(Transition t) {
    if (records_.size() == capacity_) records_.pop_front();
    records_.push_back(std::move(t));
}

std::vector<Transition> pool_sample(const ReplayPool& pool, std::size_t n, Rng& rng) {
    if (pool.size() < n) {
        throw ContractError("replay pool holds " + std::to_string(pool.size()) + " records, " + std::to_string(n) +
                            " requested (warm-up not complete)");
    }
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.index(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(pool.at(idx[i]));
    }
    return out;
}

EnvStep env_step(const Agent<float>& agent, const FeatureBackbone<float>& backbone, const State<float>& state,
                 const StyleTargets<float>& targets, Rng& rng) {
    NoGradGuard no_grad;
    const PolicyOutput<float> pol = agent.actor.forward(state, nullptr, &rng);
    EnvStep step;
    step.action = pol.action;
    step.next_state = {agent.builder.forward(state.moving, pol.encoding, pol.action), state.style};
    step.reward = reward(backbone, step.next_state.moving, targets).front();
    return step;
}

EnvStep env_step(const Agent<float>& agent, const FeatureBackbone<float>& backbone, const State<float>& state,
                 Rng& rng) {
    return env_step(agent, backbone, state, style_targets(backbone, state.style), rng);
}

double bellman_target(double reward, double gamma, double q_next, double log_prob_next, double alpha, bool done) {
    if (done) return reward;
    return reward + gamma * (q_next - alpha * log_prob_next);
}

template <typename T>
Tensor<T> soft_bellman_loss(const Tensor<T>& q, const std::vector<double>& targets) {
    if (q.numel() != targets.size()) {
        throw DimensionError("q holds " + std::to_string(q.numel()) + " values for " + std::to_string(targets.size()) +
                             " targets");
    }
    Tensor<T> y(q.shape());
    for (std::size_t i = 0; i < targets.size(); ++i) y.data()[i] = static_cast<T>(targets[i]);
    return affine_scalar(mean(square(sub(q, y))), T(0.5), T(0));
}

template Tensor<float> soft_bellman_loss<float>(const Tensor<float>&, const std::vector<double>&);
template Tensor<double> soft_bellman_loss<double>(const Tensor<double>&, const std::vector<double>&);

State<float> stack_states(const std::vector<Transition>& batch, bool next) {
    if (batch.empty()) throw ContractError("empty batch");
    std::vector<Tensor<float>> moving, style;
    for (const auto& t : batch) {
        const State<float>& s = next ? t.next_state : t.state;
        moving.push_back(s.moving);
        style.push_back(s.style);
    }
    return {concat(moving, 0), concat(style, 0)};
}

Tensor<float> stack_actions(const std::vector<Transition>& batch) {
    if (batch.empty()) throw ContractError("empty batch");
    std::vector<Tensor<float>> a;
    for (const auto& t : batch) a.push_back(t.action);
    return concat(a, 0);
}

FreezeGuard::FreezeGuard(ParamList<float> params) : params_(std::move(params)) {
    for (auto& p : params_) {
        previous_.push_back(p.tensor.requires_grad());
        p.tensor.set_requires_grad(false);
    }
}

FreezeGuard::~FreezeGuard() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].tensor.set_requires_grad(previous_[i]);
}

double critic_update(Agent<float>& agent, const std::vector<Transition>& batch, double gamma, double alpha,
                     Adam& critic_optimizer, Rng& rng) {
    if (batch.empty()) throw ContractError("critic update needs a non-empty batch");
    std::vector<double> targets(batch.size());
    {
        NoGradGuard no_grad;
        const State<float> next = stack_states(batch, true);
        const PolicyOutput<float> pol = agent.actor.forward(next, nullptr, &rng);
        const Tensor<float> q_next = agent.target_critic.forward(next, pol.action);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            targets[i] = bellman_target(batch[i].reward, gamma, q_next.at(i), pol.log_prob.at(i), alpha, batch[i].done);
        }
    }
    const ParamList<float> params = agent.critic_params();
    clear_grads(params);
    double value = 0.0;
    {
        Tape<float> tape;
        const Tensor<float> q = agent.critic.forward(stack_states(batch, false), stack_actions(batch));
        const Tensor<float> loss = soft_bellman_loss(q, targets);
        value = loss.item();
        tape.backward(loss);
    }
    critic_optimizer.step();
    clear_grads(params);
    return value;
}

ActorStep actor_update(Agent<float>& agent, const State<float>& states, double alpha, Adam& actor_optimizer,
                       Rng& rng, const QFunction& q) {
    if (states.moving.numel() == 0 || states.moving.size(0) == 0) {
        throw ContractError("actor update needs a non-empty batch");
    }
    const ParamList<float> params = agent.actor_params();
    clear_grads(params);
    FreezeGuard freeze(agent.critic_params());
    ActorStep result;
    {
        Tape<float> tape;
        const PolicyOutput<float> pol = agent.actor.forward(states, nullptr, &rng);
        const Tensor<float> qv = q ? q(states, pol.action) : agent.critic.forward(states, pol.action);
        const Tensor<float> objective =
            mean(sub(affine_scalar(pol.log_prob, static_cast<float>(alpha), 0.0f), qv));
        result.objective = objective.item();
        for (float lp : pol.log_prob.data()) result.log_probs.push_back(lp);
        tape.backward(objective);
    }
    actor_optimizer.step();
    clear_grads(params);
    return result;
}

double alpha_update(Agent<float>& agent, const std::vector<double>& log_probs, double target_entropy,
                    Adam& alpha_optimizer) {
    if (log_probs.empty()) throw ContractError("alpha update needs log-probabilities");
    double mean_term = 0.0;
    for (double lp : log_probs) mean_term += lp + target_entropy;
    mean_term /= static_cast<double>(log_probs.size());
    agent.log_alpha.clear_grad();
    {
        Tape<float> tape;
        const Tensor<float> objective = affine_scalar(exp(agent.log_alpha), static_cast<float>(-mean_term), 0.0f);
        tape.backward(objective);
    }
    alpha_optimizer.step();
    agent.log_alpha.clear_grad();
    return agent.alpha();
}

double alpha_update(Agent<float>& agent, const State<float>& states, double target_entropy, Adam& alpha_optimizer,
                    Rng& rng) {
    std::vector<double> log_probs;
    {
        NoGradGuard no_grad;
        const PolicyOutput<float> pol = agent.actor.forward(states, nullptr, &rng);
        for (float lp : pol.log_prob.data()) log_probs.push_back(lp);
    }
    return alpha_update(agent, log_probs, target_entropy, alpha_optimizer);
}

}  // namespace rlms
