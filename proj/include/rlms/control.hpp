#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "rlms/agent.hpp"
#include "rlms/objectives.hpp"
#include "rlms/optim.hpp"

namespace rlms {

// One replay record. Images are shared handles: consecutive transitions of an
// episode point at the same moving-image storage and all share the style image.
struct Transition {
    State<float> state;
    Tensor<float> action;  // [1, A, h, w]
    double reward = 0.0;
    State<float> next_state;
    bool done = false;
};

class ReplayPool {
public:
    explicit ReplayPool(std::size_t capacity);

    // Evicts the oldest record once full.
    void push(Transition t);
    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return records_.at(i); }

private:
    std::size_t capacity_;
    std::deque<Transition> records_;
};

// n distinct records drawn uniformly; throws ContractError before warm-up completes.
std::vector<Transition> pool_sample(const ReplayPool& pool, std::size_t n, Rng& rng);

struct EnvStep {
    Tensor<float> action;
    double reward = 0.0;
    State<float> next_state;
};

// Samples an action, builds the next moving image and scores it; nothing is
// recorded for gradients. `targets` caches the style statistics of state.style.
EnvStep env_step(const Agent<float>& agent, const FeatureBackbone<float>& backbone, const State<float>& state,
                 const StyleTargets<float>& targets, Rng& rng);
EnvStep env_step(const Agent<float>& agent, const FeatureBackbone<float>& backbone, const State<float>& state,
                 Rng& rng);

// r + gamma * (q_next - alpha * log_prob_next), or r alone for terminal records.
double bellman_target(double reward, double gamma, double q_next, double log_prob_next, double alpha, bool done);

// 0.5 * mean((q - target)^2) with the targets as constants.
template <typename T>
Tensor<T> soft_bellman_loss(const Tensor<T>& q, const std::vector<double>& targets);

// Concatenates the batch along axis 0.
State<float> stack_states(const std::vector<Transition>& batch, bool next);
Tensor<float> stack_actions(const std::vector<Transition>& batch);

// Temporarily clears requires_grad on a parameter list.
class FreezeGuard {
public:
    explicit FreezeGuard(ParamList<float> params);
    ~FreezeGuard();
    FreezeGuard(const FreezeGuard&) = delete;
    FreezeGuard& operator=(const FreezeGuard&) = delete;

private:
    ParamList<float> params_;
    std::vector<bool> previous_;
};

// One gradient step on the critic; returns J_Q measured before the step.
double critic_update(Agent<float>& agent, const std::vector<Transition>& batch, double gamma, double alpha,
                     Adam& critic_optimizer, Rng& rng);

using QFunction = std::function<Tensor<float>(const State<float>&, const Tensor<float>&)>;

struct ActorStep {
    double objective = 0.0;           // J_P before the step
    std::vector<double> log_probs;    // per sample, detached
};

// One reparameterized gradient step on the actor against `q` (the agent's
// critic when empty). Critic parameters are never modified.
ActorStep actor_update(Agent<float>& agent, const State<float>& states, double alpha, Adam& actor_optimizer,
                       Rng& rng, const QFunction& q = {});

// One step on log_alpha for J = mean(-alpha * (log_prob + target_entropy)); returns the new alpha.
double alpha_update(Agent<float>& agent, const std::vector<double>& log_probs, double target_entropy,
                    Adam& alpha_optimizer);
double alpha_update(Agent<float>& agent, const State<float>& states, double target_entropy, Adam& alpha_optimizer,
                    Rng& rng);

}  // namespace rlms
