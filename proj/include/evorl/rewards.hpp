#pragma once

#include <vector>

#include "evorl/scene.hpp"

namespace evorl {

struct RewardWeights {
    double alpha_l = 1.0;
    double alpha_c = 1.0;
    double alpha_s = 1.0;

    void validate() const;
};

struct RewardVector {
    double r_l = 0.0;
    double r_c = 0.0;
    double r_s = 0.0;
    double total = 0.0;
};

/// Same-category neighborhood used by the scale-consistency reward. Note the
/// normalization factor K here is unrelated to the attention key matrix.
struct NeighborGraph {
    std::vector<std::vector<int>> neighbors;  // per region, same-category nearby regions
    double consistency_k = 2.5;

    int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};

/// Knobs shared by the trainer, evaluator and oracle when scoring an
/// assignment. consistency_k = 0 means "span of the action set".
struct RewardConfig {
    RewardWeights weights;
    double consistency_k = 0.0;
    double neighbor_radius = 256.0;
    int neighbor_k_max = 4;

    double resolve_k(const std::vector<double>& action_set) const;
};

/// Mean per-object IoU over all outcomes. Zero objects is a degenerate scene:
/// returns 0 and sets *warned if provided.
double localization_reward(const std::vector<DetectionOutcome>& outcomes,
                           bool* warned = nullptr);

/// Fraction of correct labels among objects with IoU >= 0.5; 0 when nothing
/// reaches the IoU bar.
double labeling_reward(const std::vector<DetectionOutcome>& outcomes);

double scale_consistency_reward(const std::vector<double>& lambdas,
                                const NeighborGraph& graph);

double total_reward(double r_l, double r_c, double r_s, const RewardWeights& weights);

RewardVector reward_vector(const std::vector<DetectionOutcome>& outcomes,
                           const std::vector<double>& lambdas,
                           const NeighborGraph& graph, const RewardWeights& weights);

/// j neighbors i iff same dominant category, center distance <= radius, and
/// j is among the k_max nearest such regions of i; symmetrized by union.
NeighborGraph build_neighbor_graph(const std::vector<ClusterRegion>& regions,
                                   double radius, int k_max,
                                   double consistency_k = 2.5);

}  // namespace evorl
