#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "evorl/rewards.hpp"
#include "evorl/rng.hpp"
#include "evorl/tensor.hpp"

namespace evorl {

/// One candidate scaling assignment. Genes are indices into the action set,
/// which keeps mutation (adjacent step) and closure trivial.
struct Individual {
    std::vector<int> genes;
    double fitness = 0.0;  // cached r_s

    std::vector<double> lambdas(const std::vector<double>& action_set) const;
};

struct Population {
    std::vector<Individual> individuals;
    int generation = 0;

    int size() const { return static_cast<int>(individuals.size()); }
};

struct HistoryEntry {
    std::vector<int> genes;
    double total_reward = 0.0;
    int region_count = 0;  // scene signature
};

/// Ring buffer of past best assignments (the paper's archive of historical
/// solutions). Oldest entries are evicted past capacity.
class HistoryBuffer {
public:
    explicit HistoryBuffer(size_t capacity = 512) : capacity_(capacity) {}

    void record_best(const std::vector<int>& genes, double total_reward, int region_count);
    /// Top-k entries by stored total reward; stable on ties (insertion order).
    std::vector<HistoryEntry> top_by_reward(size_t k) const;

    size_t size() const { return entries_.size(); }
    size_t capacity() const { return capacity_; }
    const std::deque<HistoryEntry>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    size_t capacity_;
    std::deque<HistoryEntry> entries_;
};

/// Uniform crossover: each gene from either parent with probability 1/2.
Individual crossover(const Individual& parent_a, const Individual& parent_b, Rng& rng);

/// Each gene independently moves to an adjacent action-set value (one index
/// up or down, clamped at the ends) with probability p_mut.
Individual mutate(const Individual& individual, double p_mut, int num_actions, Rng& rng);

/// Actor assignment plus the top W-1 history entries (length-adapted to the
/// current region count); deficits are filled with mutants of the actor's
/// assignment.
Population init_population(const std::vector<int>& actor_genes, const HistoryBuffer& history,
                           int population_size, int num_actions, double p_mut, Rng& rng);

struct GenerationStats {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
};

struct EvolveResult {
    Individual best;
    int iterations = 0;
    bool stopped_early = false;  // the r_s >= delta break fired
    std::vector<GenerationStats> trace;
    Population final_population;
};

/// Scores an assignment's total reward; used only to break r_s ties in the
/// final selection, never inside the evolutionary selection itself.
using RewardEvaluator = std::function<double(const std::vector<int>&)>;

/// Elitist refinement loop: per iteration, W offspring by crossover+mutation
/// from random parent pairs, fitness = scale-consistency reward, keep the
/// top W of parents+offspring, break once the best reaches delta. The
/// returned individual is the r_s-best of the final population; ties prefer
/// the higher total reward (when `reward_eval` is given), then the higher
/// actor log-probability (when `actor_logp`, N x |actions|, is given), then
/// insertion order.
EvolveResult evolve(Population population, const NeighborGraph& graph,
                    const std::vector<double>& action_set, int max_iterations, double delta,
                    double p_mut, Rng& rng, const Tensor2* actor_logp = nullptr,
                    const RewardEvaluator* reward_eval = nullptr);

}  // namespace evorl
