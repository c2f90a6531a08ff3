#include "evorl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evorl {

void RewardWeights::validate() const {
    if (alpha_l < 0.0 || alpha_c < 0.0 || alpha_s < 0.0)
        throw ConfigError("reward weights must be nonnegative");
    if (alpha_l == 0.0 && alpha_c == 0.0 && alpha_s == 0.0)
        throw ConfigError("at least one reward weight must be positive");
}

double RewardConfig::resolve_k(const std::vector<double>& action_set) const {
    if (consistency_k > 0.0) return consistency_k;
    if (consistency_k < 0.0) throw ConfigError("rewards.consistency_k must be >= 0");
    if (action_set.empty()) throw ConfigError("action set is empty");
    const auto [mn, mx] = std::minmax_element(action_set.begin(), action_set.end());
    const double span = *mx - *mn;
    if (span <= 0.0) throw ConfigError("action set span is zero; set rewards.consistency_k explicitly");
    return span;
}

double localization_reward(const std::vector<DetectionOutcome>& outcomes, bool* warned) {
    double sum = 0.0;
    int count = 0;
    for (const auto& o : outcomes) {
        for (const auto& obj : o.objects) {
            sum += obj.iou;
            ++count;
        }
    }
    if (count == 0) {
        if (warned != nullptr) *warned = true;
        return 0.0;
    }
    return sum / count;
}

double labeling_reward(const std::vector<DetectionOutcome>& outcomes) {
    int eligible = 0;
    int correct = 0;
    for (const auto& o : outcomes) {
        for (const auto& obj : o.objects) {
            if (obj.iou >= 0.5) {
                ++eligible;
                if (obj.label_correct) ++correct;
            }
        }
    }
    if (eligible == 0) return 0.0;
    return static_cast<double>(correct) / eligible;
}

double scale_consistency_reward(const std::vector<double>& lambdas, const NeighborGraph& graph) {
    if (graph.consistency_k <= 0.0)
        throw ConfigError("scale_consistency_reward: normalization factor K must be positive");
    if (lambdas.size() != graph.neighbors.size())
        throw std::invalid_argument("scale_consistency_reward: one lambda per region required");
    const int n = static_cast<int>(lambdas.size());
    if (n == 0) return 1.0;

    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = graph.neighbors[i];
        if (nbrs.empty()) {
            acc += 1.0;  // isolated regions are vacuously consistent
            continue;
        }
        double delta = 0.0;
        for (int j : nbrs) delta += std::fabs(lambdas[i] - lambdas[j]);
        delta /= static_cast<double>(nbrs.size());
        acc += std::exp(-delta / graph.consistency_k);
    }
    return acc / n;
}

double total_reward(double r_l, double r_c, double r_s, const RewardWeights& weights) {
    return weights.alpha_l * r_l + weights.alpha_c * r_c + weights.alpha_s * r_s;
}

RewardVector reward_vector(const std::vector<DetectionOutcome>& outcomes,
                           const std::vector<double>& lambdas,
                           const NeighborGraph& graph, const RewardWeights& weights) {
    RewardVector r;
    r.r_l = localization_reward(outcomes);
    r.r_c = labeling_reward(outcomes);
    r.r_s = scale_consistency_reward(lambdas, graph);
    r.total = total_reward(r.r_l, r.r_c, r.r_s, weights);
    return r;
}

NeighborGraph build_neighbor_graph(const std::vector<ClusterRegion>& regions,
                                   double radius, int k_max, double consistency_k) {
    if (radius <= 0.0) throw ConfigError("build_neighbor_graph: radius must be positive");
    if (k_max < 1) throw ConfigError("build_neighbor_graph: k_max must be >= 1");

    const int n = static_cast<int>(regions.size());
    NeighborGraph graph;
    graph.consistency_k = consistency_k;
    graph.neighbors.assign(n, {});

    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> candidates;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (regions[j].dominant_category != regions[i].dominant_category) continue;
            const double dx = regions[i].cx - regions[j].cx;
            const double dy = regions[i].cy - regions[j].cy;
            const double dist = std::sqrt(dx * dx + dy * dy);
            if (dist <= radius) candidates.emplace_back(dist, j);
        }
        std::sort(candidates.begin(), candidates.end());
        const int take = std::min<int>(k_max, static_cast<int>(candidates.size()));
        for (int t = 0; t < take; ++t) graph.neighbors[i].push_back(candidates[t].second);
    }

    // Symmetrize by union so the scale-consistency penalty is mutual.
    for (int i = 0; i < n; ++i) {
        for (int j : graph.neighbors[i]) {
            auto& back = graph.neighbors[j];
            if (std::find(back.begin(), back.end(), i) == back.end()) back.push_back(i);
        }
    }
    for (auto& nbrs : graph.neighbors) std::sort(nbrs.begin(), nbrs.end());
    return graph;
}

}  // namespace evorl
