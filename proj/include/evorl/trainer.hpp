#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evorl/agent.hpp"
#include "evorl/config.hpp"
#include "evorl/evolution.hpp"
#include "evorl/serialize.hpp"

namespace evorl {

struct TrainSinks {
    std::ostream* metrics = nullptr;          // episode,step,r_l,r_c,r_s,R
    std::ostream* evolution_trace = nullptr;  // episode,step,generation,best_rs,mean_rs
    std::string checkpoint_dir;               // empty disables checkpoints
};

struct StepCounters {
    long actor_updates = 0;
    long critic_updates = 0;
    long history_insertions = 0;
    int max_evolution_iterations = 0;
};

struct RunMetrics {
    std::vector<double> episode_mean_reward;
    StepCounters counters;
    long total_steps = 0;
    double wall_seconds = 0.0;
};

struct TrainedAgent {
    PolicyParams policy;
    CriticParams critic;
    HistoryBuffer history{512};
    long update_count = 0;
    std::vector<double> action_set;
};

struct TrainResult {
    TrainedAgent agent;
    RunMetrics metrics;
};

/// Run the training loop from scratch, or from `resume_from` when given
/// (restored runs continue bit-identically: every RNG stream is derived from
/// the master seed and the episode/step indices).
TrainResult train(const Config& cfg, const TrainSinks& sinks = {},
                  const Checkpoint* resume_from = nullptr);

struct EvalOptions {
    std::optional<bool> attention_on;   // default: config value
    std::optional<bool> evolution_on;   // default: config value
    std::optional<double> alpha_s;      // default: config value

    bool is_default() const { return !attention_on && !evolution_on && !alpha_s; }
};

struct SceneEval {
    std::uint64_t scene_seed = 0;
    int region_count = 0;
    RewardVector reward;
    double oracle_reward = 0.0;
    bool oracle_exact = false;  // exhaustive enumeration was feasible
    std::vector<double> lambdas;
    std::vector<int> region_bands;
    double within_group_variance = 0.0;  // mean over neighbor components, -1 if none
};

struct EvalSummary {
    bool attention_on = true;
    bool evolution_on = true;
    double alpha_s = 1.0;
    double mean_reward = 0.0;
    double oracle_mean_reward = 0.0;
    double oracle_ratio = 0.0;  // over scenes with an exact oracle
    double mean_within_group_variance = 0.0;
    int scenes_with_groups = 0;
    std::vector<SceneEval> scenes;
};

/// Deterministic benchmark evaluation: argmax actions, detector noise forced
/// to zero, exhaustive oracle comparison where the assignment space fits
/// under the cap. When `history` is given (the agent's archive), evolution
/// seeds its population from it, as during training; scenes do not write
/// back, so evaluation order cannot leak between scenes.
EvalSummary evaluate(const Config& cfg, const PolicyParams& policy, const EvalOptions& opts = {},
                     const HistoryBuffer* history = nullptr);

/// Per-object optimal-scale histogram over single-object scenes:
/// counts[band][action] from a brute-force sweep per scene.
std::vector<std::vector<long>> figure1_histogram(const Config& cfg, int num_scenes,
                                                 std::uint64_t seed_start);

std::string histogram_to_csv(const std::vector<std::vector<long>>& counts,
                             const std::vector<double>& action_set);

}  // namespace evorl
