#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rlms/control.hpp"

namespace rlms {

struct TrainConfig {
    double learning_rate = 2e-4;
    std::size_t env_batch = 1;
    std::size_t replay_batch = 8;
    std::size_t total_env_steps = 2000;
    std::size_t horizon = 10;
    double gamma = 0.9;
    double omega = 0.005;
    std::uint64_t seed = 0;
    std::size_t image_size = 64;
    std::string content_dir;
    std::string style_dir;
    std::size_t checkpoint_interval = 500;  // env steps; 0 keeps only the final checkpoint
    std::size_t pool_capacity = 5000;
    std::size_t warmup = 64;
    double initial_alpha = 0.01;
    double entropy_scale = 0.5;  // target entropy = -entropy_scale * (action elements per sample)
    std::uint64_t backbone_seed = 1234;
    std::string backbone_path;  // empty: seeded stand-in extractor

    // Throws ParameterError naming the first bad field.
    void validate() const;
    double target_entropy() const;
};

// Images are [1, 3, image_size, image_size] in [0, 1].
struct Dataset {
    std::vector<Tensor<float>> content;
    std::vector<Tensor<float>> style;
};

struct TrainRecord {
    std::size_t step = 0;  // env step (1-based) whose update round this is
    std::size_t episode = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double content_loss = 0.0;
    double style_loss = 0.0;
    double contrastive_loss = 0.0;
    double final_loss = 0.0;
    double alpha = 0.0;  // temperature used by this round's critic and actor updates
    double lambda_content = 0.0;
    double lambda_style = 0.0;
    double lambda_contrastive = 0.0;
    double reward = 0.0;  // of this step's environment transition
    double wall_time = 0.0;
};

struct EpisodeRecord {
    std::size_t episode = 0;
    std::size_t content_index = 0;
    std::size_t style_index = 0;
    double total_reward = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::vector<EpisodeRecord> episodes;
};

std::string train_log_header();
std::string train_log_row(const TrainRecord& r);
std::string episode_log_header();
std::string episode_log_row(const EpisodeRecord& e);

struct UpdateCounters {
    std::size_t control_rounds = 0;
    std::size_t generative_rounds = 0;
    std::size_t critic_steps = 0;
    std::size_t actor_control_steps = 0;
    std::size_t actor_generative_steps = 0;
    std::size_t builder_steps = 0;
    std::size_t uncertainty_steps = 0;
    std::size_t alpha_steps = 0;
};

struct TrainHooks {
    std::function<double()> clock;  // seconds; monotonic clock when empty
    std::function<void(const TrainRecord&)> on_record;
    std::function<void(const EpisodeRecord&)> on_episode;
    std::filesystem::path checkpoint_dir;  // empty: no files written
};

// The joint loop as an explicit state machine so it can be stepped, inspected
// and resumed. Every random draw comes from a stream derived from
// (seed, label, step or episode index), so the step counters are the whole RNG state.
class Trainer {
public:
    Trainer(TrainConfig config, Dataset data, FeatureBackbone<float> backbone);

    // Runs env steps until `total_env_steps` have been taken.
    void run(const TrainHooks& hooks = {});
    // One env step plus, once warm, one control round and one generative round.
    void step(const TrainHooks& hooks = {});

    std::size_t steps_done() const { return steps_done_; }
    bool warm() const;
    const TrainConfig& config() const { return config_; }
    const Agent<float>& agent() const { return agent_; }
    const UncertaintyWeights<float>& weights() const { return weights_; }
    const FeatureBackbone<float>& backbone() const { return backbone_; }
    const TrainLog& log() const { return log_; }
    const UpdateCounters& counters() const { return counters_; }
    const ReplayPool& pool() const { return pool_; }

    // Everything needed to continue the run bit-exactly.
    ParamList<float> checkpoint_arrays() const;
    void restore(const ParamList<float>& arrays);
    void save_checkpoint(const std::filesystem::path& path) const;

private:
    void update_round(const TrainHooks& hooks, double reward);

    TrainConfig config_;
    Dataset data_;
    FeatureBackbone<float> backbone_;
    std::vector<StyleTargets<float>> style_targets_;
    Agent<float> agent_;
    UncertaintyWeights<float> weights_;
    Adam critic_opt_, actor_opt_, alpha_opt_, actor_gen_opt_, builder_opt_, uncertainty_opt_;
    ReplayPool pool_;
    TrainLog log_;
    UpdateCounters counters_;
    std::size_t steps_done_ = 0;
    std::size_t episode_ = 0;
    std::size_t episode_t_ = 0;
    std::size_t content_index_ = 0;
    std::size_t style_index_ = 0;
    double episode_return_ = 0.0;
    State<float> state_;
    std::optional<double> clock_origin_;
};

struct TrainResult {
    Agent<float> agent;
    UncertaintyWeights<float> weights;
    FeatureBackbone<float> backbone;
    TrainLog log;
    UpdateCounters counters;
};

// Fresh run from the config. Writes checkpoint.ckpt on schedule and final.ckpt
// at the end when hooks.checkpoint_dir is set.
TrainResult train(const TrainConfig& config, const Dataset& data, const FeatureBackbone<float>& backbone,
                  const TrainHooks& hooks = {});

// I_m^1..I_m^steps from I_m^0 = content with the noise fixed at zero.
std::vector<Tensor<float>> generate_sequence(const Agent<float>& agent, const Tensor<float>& content,
                                             const Tensor<float>& style, std::size_t steps);

// Inference arrays (actor, builder, backbone) from a training checkpoint. The
// agent's remaining parts keep their initial values.
struct LoadedModel {
    Agent<float> agent;
    FeatureBackbone<float> backbone;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace rlms
