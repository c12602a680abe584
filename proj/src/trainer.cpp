#include "rlms/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include "rlms/checkpoint.hpp"
#include "rlms/error.hpp"

namespace rlms {

namespace {

double monotonic_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void require_finite(double v, const char* what, std::size_t step) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string(what) + " is not finite at env step " + std::to_string(step));
    }
}

// Doubles and counters go into float arrays; 16-bit chunks are exact in a float.
Tensor<float> pack_u64(std::uint64_t v) {
    Tensor<float> t(Shape{4});
    for (std::size_t i = 0; i < 4; ++i) t.data()[i] = static_cast<float>((v >> (16 * i)) & 0xFFFFu);
    return t;
}

std::uint64_t unpack_u64(const Tensor<float>& t) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint64_t>(t.at(i)) << (16 * i);
    return v;
}

Tensor<float> pack_double(double d) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &d, sizeof bits);
    return pack_u64(bits);
}

double unpack_double(const Tensor<float>& t) {
    const std::uint64_t bits = unpack_u64(t);
    double d = 0.0;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

const Tensor<float>& require_array(const ParamList<float>& arrays, const std::string& name) {
    const Tensor<float>* t = find_array(arrays, name);
    if (t == nullptr) throw FormatError("checkpoint is missing array '" + name + "'");
    return *t;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    const auto bad = [](const std::string& msg) { throw ParameterError(msg); };
    if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (env_batch != 1) bad("env_batch must be 1 (one environment per step)");
    if (replay_batch < 2) bad("replay_batch must be >= 2 (the contrastive loss needs negatives)");
    if (horizon < 1) bad("horizon must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) bad("gamma must lie in [0, 1]");
    if (!(omega >= 0.0 && omega <= 1.0)) bad("omega must lie in [0, 1]");
    if (image_size < 8 || image_size % 4 != 0) bad("image_size must be a multiple of 4 and >= 8");
    if (pool_capacity < replay_batch) bad("pool_capacity must be >= replay_batch");
    if (!(initial_alpha > 0.0)) bad("initial_alpha must be > 0");
    if (!std::isfinite(entropy_scale)) bad("entropy_scale must be finite");
}

double TrainConfig::target_entropy() const {
    const double elements = static_cast<double>(kActionChannels * (image_size / 4) * (image_size / 4));
    return -entropy_scale * elements;
}

std::string train_log_header() {
    return "step,episode,critic_loss,actor_loss,content_loss,style_loss,contrastive_loss,final_loss,alpha,"
           "lambda_content,lambda_style,lambda_contrastive,reward,wall_time";
}

std::string train_log_row(const TrainRecord& r) {
    std::ostringstream os;
    os << r.step << ',' << r.episode << ',' << fmt(r.critic_loss) << ',' << fmt(r.actor_loss) << ','
       << fmt(r.content_loss) << ',' << fmt(r.style_loss) << ',' << fmt(r.contrastive_loss) << ','
       << fmt(r.final_loss) << ',' << fmt(r.alpha) << ',' << fmt(r.lambda_content) << ',' << fmt(r.lambda_style)
       << ',' << fmt(r.lambda_contrastive) << ',' << fmt(r.reward) << ',' << fmt(r.wall_time);
    return os.str();
}

std::string episode_log_header() {
    return "episode,content_index,style_index,total_reward";
}

std::string episode_log_row(const EpisodeRecord& e) {
    std::ostringstream os;
    os << e.episode << ',' << e.content_index << ',' << e.style_index << ',' << fmt(e.total_reward);
    return os.str();
}

Trainer::Trainer(TrainConfig config, Dataset data, FeatureBackbone<float> backbone)
    : config_(std::move(config)),
      data_(std::move(data)),
      backbone_(std::move(backbone)),
      pool_(config_.pool_capacity) {
    config_.validate();
    if (data_.content.empty()) throw DataError("training needs at least one content image");
    if (data_.style.size() < 2) throw DataError("training needs at least two style images (contrastive negatives)");
    const Shape want{1, 3, config_.image_size, config_.image_size};
    for (const auto* set : {&data_.content, &data_.style}) {
        for (const auto& img : *set) {
            if (img.shape() != want) {
                throw DimensionError("training image " + shape_str(img.shape()) + " does not match " + shape_str(want));
            }
        }
    }
    if (config_.image_size < backbone_.min_input_size()) {
        throw ParameterError("image_size " + std::to_string(config_.image_size) + " is below the extractor minimum " +
                             std::to_string(backbone_.min_input_size()));
    }
    for (const auto& s : data_.style) style_targets_.push_back(style_targets(backbone_, s));

    agent_ = Agent<float>::init(config_.seed, config_.initial_alpha);
    weights_ = UncertaintyWeights<float>::init();
    weights_.s.set_requires_grad(true);
    const AdamConfig adam{config_.learning_rate};
    critic_opt_ = Adam(agent_.critic_params(), adam);
    actor_opt_ = Adam(agent_.actor_params(), adam);
    alpha_opt_ = Adam({{"log_alpha", agent_.log_alpha}}, adam);
    // Separate moments for the generative path on kappa.
    actor_gen_opt_ = Adam(agent_.actor_params(), adam);
    builder_opt_ = Adam(agent_.builder_params(), adam);
    uncertainty_opt_ = Adam({{"s", weights_.s}}, adam);
}

bool Trainer::warm() const {
    return pool_.size() >= std::max(config_.warmup, config_.replay_batch);
}

void Trainer::run(const TrainHooks& hooks) {
    while (steps_done_ < config_.total_env_steps) step(hooks);
}

void Trainer::step(const TrainHooks& hooks) {
    const std::uint64_t seed = config_.seed;
    if (episode_t_ == 0) {
        Rng pick = Rng::derive(seed, "episode", episode_);
        content_index_ = pick.index(data_.content.size());
        style_index_ = pick.index(data_.style.size());
        state_ = {data_.content[content_index_], data_.style[style_index_]};
        episode_return_ = 0.0;
    }
    Rng env_rng = Rng::derive(seed, "env", steps_done_);
    const EnvStep es = env_step(agent_, backbone_, state_, style_targets_[style_index_], env_rng);
    require_finite(es.reward, "reward", steps_done_ + 1);
    const bool done = episode_t_ + 1 == config_.horizon;
    pool_.push({state_, es.action, es.reward, es.next_state, done});
    state_ = es.next_state;
    episode_return_ += es.reward;
    ++episode_t_;
    ++steps_done_;
    if (done) {
        const EpisodeRecord e{episode_, content_index_, style_index_, episode_return_};
        log_.episodes.push_back(e);
        if (hooks.on_episode) hooks.on_episode(e);
        ++episode_;
        episode_t_ = 0;
    }
    if (warm()) update_round(hooks, es.reward);
    if (!hooks.checkpoint_dir.empty() && config_.checkpoint_interval > 0 &&
        steps_done_ % config_.checkpoint_interval == 0) {
        save_checkpoint(hooks.checkpoint_dir / "checkpoint.ckpt");
    }
}

void Trainer::update_round(const TrainHooks& hooks, double reward) {
    const std::uint64_t seed = config_.seed;
    const std::size_t step = steps_done_;
    TrainRecord rec;
    rec.step = step;
    rec.episode = episode_t_ == 0 ? episode_ - 1 : episode_;
    rec.reward = reward;
    rec.alpha = agent_.alpha();

    Rng replay_rng = Rng::derive(seed, "replay", step);
    const std::vector<Transition> batch = pool_sample(pool_, config_.replay_batch, replay_rng);
    const State<float> states = stack_states(batch, false);
    const Tensor<float> actions = stack_actions(batch);

    // Control round.
    Rng policy_rng = Rng::derive(seed, "update", step);
    rec.critic_loss = critic_update(agent_, batch, config_.gamma, rec.alpha, critic_opt_, policy_rng);
    require_finite(rec.critic_loss, "critic loss", step);
    ++counters_.critic_steps;
    const ActorStep as = actor_update(agent_, states, rec.alpha, actor_opt_, policy_rng);
    rec.actor_loss = as.objective;
    require_finite(rec.actor_loss, "actor objective", step);
    ++counters_.actor_control_steps;
    alpha_update(agent_, as.log_probs, config_.target_entropy(), alpha_opt_);
    ++counters_.alpha_steps;
    ema_update(agent_.critic_params(), agent_.target_critic.params(), config_.omega);
    ++counters_.control_rounds;

    // Generative round on the same batch, replaying the stored actions.
    const ParamList<float> actor_params = agent_.actor_params();
    const ParamList<float> builder_params = agent_.builder_params();
    clear_grads(actor_params);
    clear_grads(builder_params);
    weights_.s.clear_grad();
    {
        Tape<float> tape;
        const Encoding<float> enc = agent_.actor.encode(states);
        const Tensor<float> produced = agent_.builder.forward(states.moving, enc, actions);
        const Tensor<float> lc = content_loss(backbone_, produced, states.moving);
        const Tensor<float> ls = style_loss(backbone_, produced, states.style);
        const StyleFeatures<float> pf = agent_.actor.style_features(produced);
        const Tensor<float> lt = contrastive_loss<float>({pf.shallow, pf.deep},
                                                         {enc.style_features.shallow, enc.style_features.deep});
        const LossBreakdown<float> lb = final_loss(weights_, lc, ls, lt);
        rec.content_loss = lc.item();
        rec.style_loss = ls.item();
        rec.contrastive_loss = lt.item();
        rec.final_loss = lb.weighted_total.item();
        rec.lambda_content = lb.lambdas[0];
        rec.lambda_style = lb.lambdas[1];
        rec.lambda_contrastive = lb.lambdas[2];
        require_finite(rec.final_loss, "final loss", step);
        tape.backward(lb.weighted_total);
    }
    actor_gen_opt_.step();
    builder_opt_.step();
    uncertainty_opt_.step();
    clear_grads(actor_params);
    clear_grads(builder_params);
    weights_.s.clear_grad();
    ++counters_.actor_generative_steps;
    ++counters_.builder_steps;
    ++counters_.uncertainty_steps;
    ++counters_.generative_rounds;

    const double now = hooks.clock ? hooks.clock() : monotonic_seconds();
    if (!clock_origin_) clock_origin_ = now;
    rec.wall_time = now - *clock_origin_;
    log_.records.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
}

ParamList<float> Trainer::checkpoint_arrays() const {
    ParamList<float> out = agent_.all_params();
    out.push_back({"uncertainty.s", weights_.s});
    for (const auto& p : backbone_.params()) out.push_back(p);
    const std::pair<const Adam*, const char*> opts[] = {{&critic_opt_, "adam.critic"},
                                                        {&actor_opt_, "adam.actor"},
                                                        {&alpha_opt_, "adam.alpha"},
                                                        {&actor_gen_opt_, "adam.actor_generative"},
                                                        {&builder_opt_, "adam.builder"},
                                                        {&uncertainty_opt_, "adam.uncertainty"}};
    for (const auto& [opt, prefix] : opts) {
        for (auto& a : opt->state(prefix)) out.push_back(std::move(a));
    }

    const std::size_t counters[] = {steps_done_,
                                    episode_,
                                    episode_t_,
                                    content_index_,
                                    style_index_,
                                    counters_.control_rounds,
                                    counters_.generative_rounds,
                                    counters_.critic_steps,
                                    counters_.actor_control_steps,
                                    counters_.actor_generative_steps,
                                    counters_.builder_steps,
                                    counters_.uncertainty_steps,
                                    counters_.alpha_steps};
    Tensor<float> packed(Shape{std::size(counters), 4});
    for (std::size_t i = 0; i < std::size(counters); ++i) {
        const Tensor<float> v = pack_u64(counters[i]);
        std::copy(v.data().begin(), v.data().end(), packed.data().begin() + 4 * i);
    }
    out.push_back({"trainer.counters", packed});
    out.push_back({"trainer.episode_return", pack_double(episode_return_)});
    out.push_back({"trainer.clock_origin", pack_double(clock_origin_.value_or(std::nan("")))});
    if (episode_t_ > 0) out.push_back({"trainer.moving", state_.moving});

    // Replay pool: each image storage once, records as indices into it.
    std::vector<Tensor<float>> images;
    std::unordered_map<const void*, std::size_t> seen;
    const auto image_id = [&](const Tensor<float>& t) {
        const void* key = t.impl_ptr().get();
        const auto it = seen.find(key);
        if (it != seen.end()) return it->second;
        seen.emplace(key, images.size());
        images.push_back(t);
        return images.size() - 1;
    };
    const std::size_t n = pool_.size();
    Tensor<float> index(Shape{n, 4});
    Tensor<float> rewards(Shape{n, 4});
    Tensor<float> done(Shape{n});
    std::vector<Tensor<float>> actions;
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = pool_.at(i);
        const std::size_t ids[] = {image_id(t.state.moving), image_id(t.state.style), image_id(t.next_state.moving),
                                   image_id(t.next_state.style)};
        for (std::size_t k = 0; k < 4; ++k) index.data()[4 * i + k] = static_cast<float>(ids[k]);
        const Tensor<float> r = pack_double(t.reward);
        std::copy(r.data().begin(), r.data().end(), rewards.data().begin() + 4 * i);
        done.data()[i] = t.done ? 1.0f : 0.0f;
        actions.push_back(t.action);
    }
    if (n > 0) {
        out.push_back({"pool.images", concat(images, 0)});
        out.push_back({"pool.index", index});
        out.push_back({"pool.rewards", rewards});
        out.push_back({"pool.done", done});
        out.push_back({"pool.actions", concat(actions, 0)});
    }
    return out;
}

void Trainer::restore(const ParamList<float>& arrays) {
    assign_by_name(arrays, agent_.all_params());
    assign_by_name(arrays, {{"uncertainty.s", weights_.s}});
    assign_by_name(arrays, backbone_.params());
    critic_opt_.load_state(arrays, "adam.critic");
    actor_opt_.load_state(arrays, "adam.actor");
    alpha_opt_.load_state(arrays, "adam.alpha");
    actor_gen_opt_.load_state(arrays, "adam.actor_generative");
    builder_opt_.load_state(arrays, "adam.builder");
    uncertainty_opt_.load_state(arrays, "adam.uncertainty");
    style_targets_.clear();
    for (const auto& s : data_.style) style_targets_.push_back(style_targets(backbone_, s));

    const Tensor<float>& packed = require_array(arrays, "trainer.counters");
    if (packed.shape() != Shape{13, 4}) throw FormatError("array 'trainer.counters' has the wrong shape");
    const auto counter = [&packed](std::size_t i) {
        return static_cast<std::size_t>(unpack_u64(slice(packed, 0, i, i + 1)));
    };
    steps_done_ = counter(0);
    episode_ = counter(1);
    episode_t_ = counter(2);
    content_index_ = counter(3);
    style_index_ = counter(4);
    counters_ = {counter(5), counter(6), counter(7), counter(8), counter(9), counter(10), counter(11), counter(12)};
    if (content_index_ >= data_.content.size() || style_index_ >= data_.style.size()) {
        throw FormatError("checkpoint refers to images beyond the current dataset");
    }
    episode_return_ = unpack_double(require_array(arrays, "trainer.episode_return"));
    const double origin = unpack_double(require_array(arrays, "trainer.clock_origin"));
    clock_origin_.reset();
    if (!std::isnan(origin)) clock_origin_ = origin;
    state_ = {data_.content[content_index_], data_.style[style_index_]};
    if (episode_t_ > 0) state_.moving = require_array(arrays, "trainer.moving").clone();

    pool_ = ReplayPool(config_.pool_capacity);
    if (const Tensor<float>* images = find_array(arrays, "pool.images")) {
        const Tensor<float>& index = require_array(arrays, "pool.index");
        const Tensor<float>& rewards = require_array(arrays, "pool.rewards");
        const Tensor<float>& done = require_array(arrays, "pool.done");
        const Tensor<float>& actions = require_array(arrays, "pool.actions");
        std::vector<Tensor<float>> unique;
        for (std::size_t k = 0; k < images->size(0); ++k) unique.push_back(slice(*images, 0, k, k + 1).detach());
        const std::size_t n = index.size(0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto img = [&](std::size_t k) {
                const std::size_t id = static_cast<std::size_t>(index.at(4 * i + k));
                if (id >= unique.size()) throw FormatError("pool record refers to a missing image");
                return unique[id];
            };
            Transition t;
            t.state = {img(0), img(1)};
            t.next_state = {img(2), img(3)};
            t.action = slice(actions, 0, i, i + 1).detach();
            t.reward = unpack_double(slice(rewards, 0, i, i + 1));
            t.done = done.at(i) != 0.0f;
            pool_.push(std::move(t));
        }
    }
    log_ = {};
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    save_container(path, checkpoint_arrays());
}

TrainResult train(const TrainConfig& config, const Dataset& data, const FeatureBackbone<float>& backbone,
                  const TrainHooks& hooks) {
    Trainer trainer(config, data, backbone);
    trainer.run(hooks);
    if (!hooks.checkpoint_dir.empty()) trainer.save_checkpoint(hooks.checkpoint_dir / "final.ckpt");
    return {trainer.agent(), trainer.weights(), trainer.backbone(), trainer.log(), trainer.counters()};
}

std::vector<Tensor<float>> generate_sequence(const Agent<float>& agent, const Tensor<float>& content,
                                             const Tensor<float>& style, std::size_t steps) {
    if (steps < 1) throw ParameterError("steps must be >= 1");
    NoGradGuard no_grad;
    State<float> state{content, style};
    std::vector<Tensor<float>> out;
    for (std::size_t t = 0; t < steps; ++t) {
        Encoding<float> enc = agent.actor.encode(state);
        const Shape noise_shape{content.size(0), kActionChannels, enc.content_features.size(2),
                                enc.content_features.size(3)};
        const Tensor<float> zero(noise_shape);
        const PolicyOutput<float> pol = agent.actor.act(std::move(enc), &zero, nullptr);
        state.moving = agent.builder.forward(state.moving, pol.encoding, pol.action);
        out.push_back(state.moving);
    }
    return out;
}

LoadedModel load_model(const std::filesystem::path& path) {
    const ParamList<float> arrays = load_container(path);
    LoadedModel m{Agent<float>::init(0, 1.0), FeatureBackbone<float>::seeded(0)};
    ParamList<float> wanted;
    for (const auto& p : m.agent.actor_params()) wanted.push_back({"actor." + p.name, p.tensor});
    for (const auto& p : m.agent.builder_params()) wanted.push_back({"builder." + p.name, p.tensor});
    assign_by_name(arrays, wanted);
    assign_by_name(arrays, m.backbone.params());
    return m;
}

}  // namespace rlms
