#include <cmath>
#include <set>

#include "doctest.h"
#include "rlms/control.hpp"
#include "rlms/error.hpp"

using namespace rlms;
using TF = Tensor<float>;

namespace {

State<float> random_state(Rng& rng, std::size_t size = 8) {
    return {rand_uniform<float>(Shape{1, 3, size, size}, rng), rand_uniform<float>(Shape{1, 3, size, size}, rng)};
}

Transition tagged(int tag) {
    Transition t;
    t.state.moving = TF(Shape{1, 3, 4, 4}, static_cast<float>(tag));
    t.reward = tag;
    return t;
}

std::vector<float> flatten(const ParamList<float>& params) {
    std::vector<float> out;
    for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

// Log-std head channels pinned at the clamp floor: the policy is deterministic to ~1e-4.
void make_near_deterministic(Agent<float>& agent) {
    auto w = Tensor<float>(agent.actor.head.weight).data();
    auto b = Tensor<float>(agent.actor.head.bias).data();
    const std::size_t per_out = w.size() / (2 * kActionChannels);
    for (std::size_t o = kActionChannels; o < 2 * kActionChannels; ++o) {
        std::fill(w.begin() + o * per_out, w.begin() + (o + 1) * per_out, 0.0f);
        b[o] = -20.0f;
    }
}

}  // namespace

TEST_CASE("scalar Bellman toy case") {
    const double target = bellman_target(0.5, 0.99, 1.0, -1.0, 0.2, false);
    CHECK(target == doctest::Approx(1.688).epsilon(1e-12));
    const double jq = soft_bellman_loss(TF(Shape{1}, {1.0f}), {target}).item();
    CHECK(std::abs(jq - 0.23667) < 1e-4);
    CHECK(jq == doctest::Approx(0.5 * 0.688 * 0.688).epsilon(1e-6));
}

TEST_CASE("Bellman target endpoints") {
    CHECK(bellman_target(0.3, 0.99, 5.0, -2.0, 0.1, true) == 0.3);
    CHECK(bellman_target(0.3, 0.0, 5.0, -2.0, 0.1, false) == 0.3);
}

TEST_CASE("replay pool is a bounded FIFO") {
    ReplayPool pool(2);
    for (int i = 0; i < 3; ++i) pool.push(tagged(i));
    REQUIRE(pool.size() == 2);
    CHECK(pool.at(0).reward == 1.0);
    CHECK(pool.at(1).reward == 2.0);
}

TEST_CASE("pool sampling") {
    ReplayPool pool(10);
    for (int i = 0; i < 6; ++i) pool.push(tagged(i));
    SUBCASE("n = size returns every record once") {
        Rng rng(1);
        std::multiset<double> seen;
        for (const auto& t : pool_sample(pool, 6, rng)) seen.insert(t.reward);
        CHECK(seen == std::multiset<double>{0, 1, 2, 3, 4, 5});
    }
    SUBCASE("seeded generator reproduces the draw") {
        Rng a(7), b(7);
        const auto x = pool_sample(pool, 4, a);
        const auto y = pool_sample(pool, 4, b);
        for (std::size_t i = 0; i < 4; ++i) CHECK(x[i].reward == y[i].reward);
    }
    SUBCASE("too few records before warm-up") {
        Rng rng(0);
        CHECK_THROWS_AS(pool_sample(pool, 7, rng), ContractError);
    }
}

TEST_CASE("env_step contract") {
    const Agent<float> agent = Agent<float>::init(1, 1.0);
    const auto bb = FeatureBackbone<float>::seeded(2);
    Rng init(3);
    const State<float> s = random_state(init, 16);
    Rng r1(5), r2(5);
    const EnvStep a = env_step(agent, bb, s, r1);
    const EnvStep b = env_step(agent, bb, s, r2);
    CHECK(a.next_state.style.same_storage(s.style));
    CHECK(a.reward == doctest::Approx(-style_loss(bb, a.next_state.moving, s.style).item()).epsilon(1e-6));
    CHECK(a.reward == b.reward);
    CHECK(std::equal(a.action.data().begin(), a.action.data().end(), b.action.data().begin()));
    CHECK(std::equal(a.next_state.moving.data().begin(), a.next_state.moving.data().end(),
                     b.next_state.moving.data().begin()));
    CHECK_FALSE(a.next_state.moving.requires_grad());
}

TEST_CASE("critic update on terminal records fits the raw reward") {
    Agent<float> agent = Agent<float>::init(4, 0.2);
    Rng rng(8);
    std::vector<Transition> batch;
    for (int i = 0; i < 3; ++i) {
        Transition t;
        t.state = random_state(rng);
        t.next_state = random_state(rng);
        t.action = rand_uniform<float>(Shape{1, kActionChannels, 2, 2}, rng, -0.5f, 0.5f);
        t.reward = rng.uniform(-1, 0);
        t.done = true;
        batch.push_back(t);
    }
    const TF q = agent.critic.forward(stack_states(batch, false), stack_actions(batch));
    double expect = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expect += 0.5 * (q.at(i) - batch[i].reward) * (q.at(i) - batch[i].reward);
    expect /= 3.0;

    const auto target_before = flatten(agent.target_params());
    const auto actor_before = flatten(agent.actor_params());
    const auto critic_before = flatten(agent.critic_params());
    Adam opt(agent.critic_params(), AdamConfig{});
    const double jq = critic_update(agent, batch, 0.9, 0.2, opt, rng);
    CHECK(jq == doctest::Approx(expect).epsilon(1e-5));
    CHECK(flatten(agent.target_params()) == target_before);
    CHECK(flatten(agent.actor_params()) == actor_before);
    CHECK(flatten(agent.critic_params()) != critic_before);
    for (const auto& p : agent.target_params()) CHECK_FALSE(p.tensor.has_grad());
    for (const auto& p : agent.actor_params()) CHECK_FALSE(p.tensor.has_grad());
    std::vector<Transition> empty;
    CHECK_THROWS_AS(critic_update(agent, empty, 0.9, 0.2, opt, rng), ContractError);
}

TEST_CASE("critic update with alpha 0 and a deterministic policy is fitted Q iteration") {
    // Two states cycling A -> B -> A with rewards 1 and 0. Value iteration for the
    // fixed policy: Q_A = r_A + g Q_B, Q_B = r_B + g Q_A.
    const double gamma = 0.5;
    const double qa = (1.0 + gamma * 0.0) / (1.0 - gamma * gamma);
    const double qb = 0.0 + gamma * qa;

    Agent<float> agent = Agent<float>::init(10, 1.0);
    make_near_deterministic(agent);
    Rng rng(11);
    const State<float> a = random_state(rng);
    const State<float> b = random_state(rng);
    const TF zero(Shape{1, kActionChannels, 2, 2});
    const TF act_a = agent.actor.forward(a, &zero, nullptr).action;
    const TF act_b = agent.actor.forward(b, &zero, nullptr).action;
    const std::vector<Transition> batch{{a, act_a, 1.0, b, false}, {b, act_b, 0.0, a, false}};

    Adam opt(agent.critic_params(), AdamConfig{1e-3});
    for (int step = 0; step < 4000; ++step) {
        if (step == 2500) opt.set_lr(1e-4);
        critic_update(agent, batch, gamma, 0.0, opt, rng);
        ema_update(agent.critic_params(), agent.target_params(), 1.0);
    }
    const TF q = agent.critic.forward(stack_states(batch, false), stack_actions(batch));
    CHECK(std::abs(q.at(0) - qa) < 1e-3);
    CHECK(std::abs(q.at(1) - qb) < 1e-3);
}

TEST_CASE("actor update leaves the critic alone") {
    Agent<float> agent = Agent<float>::init(12, 0.2);
    Rng rng(13);
    const State<float> s = random_state(rng);
    const auto critic_before = flatten(agent.critic_params());
    const auto actor_before = flatten(agent.actor_params());
    Adam opt(agent.actor_params(), AdamConfig{});
    const ActorStep st = actor_update(agent, s, 0.2, opt, rng);
    CHECK(st.log_probs.size() == 1);
    CHECK(flatten(agent.critic_params()) == critic_before);
    CHECK(flatten(agent.actor_params()) != actor_before);
    for (const auto& p : agent.critic_params()) CHECK(p.tensor.requires_grad());
    const State<float> none{TF(Shape{0, 3, 8, 8}), TF(Shape{0, 3, 8, 8})};
    CHECK_THROWS_AS(actor_update(agent, none, 0.2, opt, rng), ContractError);
}

TEST_CASE("actor update with alpha 0 against a constant critic has no signal") {
    Agent<float> agent = Agent<float>::init(14, 1.0);
    Rng rng(15);
    const State<float> s = random_state(rng);
    const auto before = flatten(agent.actor_params());
    Adam opt(agent.actor_params(), AdamConfig{});
    const QFunction constant = [](const State<float>& st, const TF& action) {
        return add(mul(sum(action), TF::scalar(0.0f)), TF(Shape{st.moving.size(0)}, 3.0f));
    };
    const ActorStep r = actor_update(agent, s, 0.0, opt, rng, constant);
    CHECK(r.objective == doctest::Approx(-3.0));
    CHECK(flatten(agent.actor_params()) == before);
}

TEST_CASE("actor objective falls against a scripted critic") {
    Agent<float> agent = Agent<float>::init(16, 1.0);
    Rng rng(17);
    const State<float> s{concat(std::vector<TF>{random_state(rng).moving, random_state(rng).moving}, 0),
                         concat(std::vector<TF>{random_state(rng).style, random_state(rng).style}, 0)};
    const float goal = std::tanh(0.5f);
    const QFunction scripted = [goal](const State<float>&, const TF& action) {
        const TF d = affine_scalar(action, 1.0f, -goal);
        return negate(reduce(ReduceKind::sum, square(d), {1, 2, 3}));
    };
    Adam opt(agent.actor_params(), AdamConfig{1e-3});
    std::vector<double> j;
    for (int i = 0; i < 50; ++i) j.push_back(actor_update(agent, s, 0.0, opt, rng, scripted).objective);
    const double head = (j[0] + j[1] + j[2]) / 3.0;
    const double tail = (j[47] + j[48] + j[49]) / 3.0;
    MESSAGE("J_P " << head << " -> " << tail);
    CHECK(tail < head);
}

TEST_CASE("alpha moves toward the target entropy") {
    Agent<float> agent = Agent<float>::init(18, 0.5);
    const double a0 = agent.alpha();
    SUBCASE("entropy above target lowers alpha") {
        Adam opt({{"log_alpha", agent.log_alpha}}, AdamConfig{1e-2});
        // -E log p = 5 > target -10
        CHECK(alpha_update(agent, {-5.0, -5.0}, -10.0, opt) < a0);
    }
    SUBCASE("entropy below target raises alpha") {
        Adam opt({{"log_alpha", agent.log_alpha}}, AdamConfig{1e-2});
        CHECK(alpha_update(agent, {20.0, 20.0}, -10.0, opt) > a0);
    }
    SUBCASE("zero learning rate keeps alpha") {
        Adam opt({{"log_alpha", agent.log_alpha}}, AdamConfig{0.0});
        CHECK(alpha_update(agent, {-5.0}, -10.0, opt) == a0);
    }
    CHECK(agent.alpha() > 0.0f);
}
