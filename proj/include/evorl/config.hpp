#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evorl/agent.hpp"
#include "evorl/rewards.hpp"
#include "evorl/scene.hpp"

namespace evorl {

/// Full experiment configuration. One file (key = value with [dotted]
/// sections) plus repeatable `--override section.key=value` flags feed this;
/// every run echoes the resolved result to run_config.json. Defaults follow
/// the published hyperparameters where the method defines them.
struct Config {
    SceneConfig scene;
    DetectorModel detector;
    double detector_offset_spread = 0.5;  // used when category_offsets is empty

    RegionParams regions;

    int feature_dim = 32;
    std::uint64_t encoder_seed = 9001;
    AttentionFusion fusion = AttentionFusion::kHadamard;
    bool attention_on = true;

    RewardConfig rewards;

    std::vector<double> action_set = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};

    AgentMode agent_mode = AgentMode::kReinforce;
    double gamma = 0.99;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double dropout = 0.5;
    int gate_hidden = 16;
    double clip_ratio = 0.2;
    int ppo_epochs = 4;
    double entropy_beta = 0.0;
    double grad_clip = 0.0;

    bool evolution_on = true;
    int population = 32;        // W
    int evo_iterations = 10;    // I
    double delta = 0.5;
    double p_mut = 0.1;
    int history_capacity = 512;

    int episodes = 1000;          // P
    int steps = 50;               // T
    int scenes_per_batch = 8;     // M
    int checkpoint_interval = 50; // episodes
    std::uint64_t seed = 1;

    std::uint64_t eval_seed_start = 1000;
    int eval_num_scenes = 50;

    OracleMode oracle_mode = OracleMode::kExhaustive;
    std::uint64_t oracle_cap = 2000000;

    /// Detector with category offsets resolved for the configured category
    /// count (evenly spread when not given explicitly).
    DetectorModel resolved_detector() const;
    double consistency_k() const { return rewards.resolve_k(action_set); }

    void validate() const;

    /// Set one dotted key, e.g. "agent.lr" or "actions.set". Unknown keys and
    /// malformed values raise ConfigError.
    void apply(const std::string& key, const std::string& value);

    std::string to_json() const;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");
};

}  // namespace evorl
