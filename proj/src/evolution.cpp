#include "evorl/evolution.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace evorl {

std::vector<double> Individual::lambdas(const std::vector<double>& action_set) const {
    std::vector<double> out;
    out.reserve(genes.size());
    for (int g : genes) out.push_back(action_set.at(g));
    return out;
}

void HistoryBuffer::record_best(const std::vector<int>& genes, double total_reward,
                                int region_count) {
    entries_.push_back({genes, total_reward, region_count});
    if (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<HistoryEntry> HistoryBuffer::top_by_reward(size_t k) const {
    std::vector<HistoryEntry> sorted(entries_.begin(), entries_.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const HistoryEntry& a, const HistoryEntry& b) {
                         return a.total_reward > b.total_reward;
                     });
    if (sorted.size() > k) sorted.resize(k);
    return sorted;
}

Individual crossover(const Individual& parent_a, const Individual& parent_b, Rng& rng) {
    if (parent_a.genes.size() != parent_b.genes.size())
        throw std::invalid_argument("crossover: parent length mismatch");
    Individual child;
    child.genes.reserve(parent_a.genes.size());
    for (size_t i = 0; i < parent_a.genes.size(); ++i)
        child.genes.push_back(rng.uniform() < 0.5 ? parent_a.genes[i] : parent_b.genes[i]);
    return child;
}

Individual mutate(const Individual& individual, double p_mut, int num_actions, Rng& rng) {
    if (p_mut < 0.0 || p_mut > 1.0)
        throw std::invalid_argument("mutate: p_mut must be in [0, 1]");
    Individual out = individual;
    out.fitness = 0.0;
    if (num_actions < 2) return out;
    for (int& g : out.genes) {
        if (rng.uniform() >= p_mut) continue;
        if (g <= 0) g = 1;                          // clamped: move up only
        else if (g >= num_actions - 1) g -= 1;      // clamped: move down only
        else g += rng.uniform() < 0.5 ? 1 : -1;
    }
    return out;
}

Population init_population(const std::vector<int>& actor_genes, const HistoryBuffer& history,
                           int population_size, int num_actions, double p_mut, Rng& rng) {
    if (population_size < 2) throw ConfigError("init_population: population size must be >= 2");
    const int n = static_cast<int>(actor_genes.size());

    Population pop;
    pop.individuals.reserve(population_size);
    pop.individuals.push_back({actor_genes, 0.0});

    // Length-adapt stored assignments to the current region count: truncate,
    // or extend with the actor's genes at missing positions.
    for (const HistoryEntry& entry : history.top_by_reward(population_size - 1)) {
        Individual ind;
        ind.genes.resize(n);
        for (int i = 0; i < n; ++i) {
            int g = i < static_cast<int>(entry.genes.size()) ? entry.genes[i] : actor_genes[i];
            ind.genes[i] = std::clamp(g, 0, num_actions - 1);
        }
        pop.individuals.push_back(std::move(ind));
    }

    while (pop.size() < population_size)
        pop.individuals.push_back(mutate(pop.individuals.front(), p_mut, num_actions, rng));
    return pop;
}

namespace {

double logp_score(const Individual& ind, const Tensor2& logp) {
    double s = 0.0;
    for (size_t i = 0; i < ind.genes.size(); ++i)
        s += logp.at(static_cast<int>(i), ind.genes[i]);
    return s;
}

// Memoized total-reward lookups for the final tie-break; populations carry
// many duplicate genomes.
class RewardCache {
public:
    RewardCache(const RewardEvaluator* eval) : eval_(eval) {}

    double score(const Individual& ind) {
        auto it = cache_.find(ind.genes);
        if (it != cache_.end()) return it->second;
        const double r = (*eval_)(ind.genes);
        cache_.emplace(ind.genes, r);
        return r;
    }

    bool available() const { return eval_ != nullptr && *eval_ != nullptr; }

private:
    const RewardEvaluator* eval_;
    std::map<std::vector<int>, double> cache_;
};

}  // namespace

EvolveResult evolve(Population population, const NeighborGraph& graph,
                    const std::vector<double>& action_set, int max_iterations, double delta,
                    double p_mut, Rng& rng, const Tensor2* actor_logp,
                    const RewardEvaluator* reward_eval) {
    if (max_iterations < 1) throw ConfigError("evolve: need at least one iteration");
    if (delta <= 0.0 || delta > 1.0) throw ConfigError("evolve: delta must be in (0, 1]");
    if (population.size() < 1) throw ConfigError("evolve: empty population");

    const int w = population.size();
    const int num_actions = static_cast<int>(action_set.size());

    for (auto& ind : population.individuals)
        ind.fitness = scale_consistency_reward(ind.lambdas(action_set), graph);

    EvolveResult result;

    for (int iter = 1; iter <= max_iterations; ++iter) {
        // W offspring from uniformly sampled parent pairs, no self-pairing.
        std::vector<Individual> pool = population.individuals;
        pool.reserve(2 * w);
        for (int c = 0; c < w; ++c) {
            int pa = 0, pb = 0;
            if (w >= 2) {
                pa = rng.uniform_int(0, w - 1);
                pb = rng.uniform_int(0, w - 2);
                if (pb >= pa) ++pb;
            }
            Individual child = mutate(
                crossover(population.individuals[pa], population.individuals[pb], rng), p_mut,
                num_actions, rng);
            child.fitness = scale_consistency_reward(child.lambdas(action_set), graph);
            pool.push_back(std::move(child));
        }

        // Elitist top-W of parents+offspring; stable sort keeps insertion
        // order on ties.
        std::stable_sort(pool.begin(), pool.end(), [](const Individual& a, const Individual& b) {
            return a.fitness > b.fitness;
        });
        pool.resize(w);
        population.individuals = std::move(pool);
        ++population.generation;

        GenerationStats stats;
        stats.generation = population.generation;
        stats.best_fitness = population.individuals.front().fitness;
        stats.mean_fitness =
            std::accumulate(population.individuals.begin(), population.individuals.end(), 0.0,
                            [](double acc, const Individual& ind) { return acc + ind.fitness; }) /
            w;
        result.trace.push_back(stats);
        result.iterations = iter;

        if (stats.best_fitness >= delta) {
            result.stopped_early = true;
            break;
        }
    }

    // Final selection from the (sorted) population: r_s decides; exact ties
    // fall back to the total reward, then the actor log-probability, then
    // insertion order.
    RewardCache rewards(reward_eval);
    result.best = population.individuals.front();
    for (int i = 1; i < w; ++i) {
        const Individual& challenger = population.individuals[i];
        if (challenger.fitness != result.best.fitness) break;  // sorted descending
        if (rewards.available()) {
            const double rc = rewards.score(challenger);
            const double rb = rewards.score(result.best);
            if (rc > rb) {
                result.best = challenger;
                continue;
            }
            if (rc < rb) continue;
        }
        if (actor_logp != nullptr &&
            logp_score(challenger, *actor_logp) > logp_score(result.best, *actor_logp)) {
            result.best = challenger;
        }
    }
    result.final_population = std::move(population);
    return result;
}

}  // namespace evorl
