#include "evorl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "evorl/rewards.hpp"

namespace evorl {

void SceneConfig::validate() const {
    if (width < 8 || height < 8) throw ConfigError("scene: width/height must be >= 8");
    if (categories < 2) throw ConfigError("scene: at least 2 categories required");
    if (objects_min < 1 || objects_max < objects_min)
        throw ConfigError("scene: invalid object count range");
    if (objects_per_cluster <= 0.0) throw ConfigError("scene: objects_per_cluster must be positive");
    if (band_edges.size() < 2 || band_weights.empty() ||
        band_weights.size() + 1 != band_edges.size())
        throw ConfigError("scene: size bands empty or edge/weight count mismatch");
    double wsum = 0.0;
    for (double w : band_weights) {
        if (w < 0.0) throw ConfigError("scene: band weights must be nonnegative");
        wsum += w;
    }
    if (wsum <= 0.0) throw ConfigError("scene: band weights sum to zero");
    for (size_t i = 0; i + 1 < band_edges.size(); ++i) {
        if (band_edges[i] <= 0.0 || band_edges[i] >= band_edges[i + 1])
            throw ConfigError("scene: band edges must be positive and ascending");
    }
}

int SceneConfig::band_of(double px_size) const {
    const int bands = num_bands();
    for (int b = 0; b < bands; ++b) {
        if (px_size < band_edges[b + 1]) return b;
    }
    return bands - 1;
}

void DetectorModel::validate() const {
    if (optimal_px <= 0.0) throw ConfigError("detector: optimal_px must be positive");
    if (sigma_loc <= 0.0 || sigma_cls <= 0.0)
        throw ConfigError("detector: sigma_loc/sigma_cls must be positive");
    if (max_scale <= 0.0) throw ConfigError("detector: max_scale must be positive");
    if (artifact_slope < 0.0) throw ConfigError("detector: artifact_slope must be nonnegative");
    if (noise_sd < 0.0) throw ConfigError("detector: noise_sd must be nonnegative");
}

double DetectorModel::category_optimum_px(int category) const {
    double offset = 0.0;
    if (category >= 0 && category < static_cast<int>(category_offsets.size()))
        offset = category_offsets[category];
    return optimal_px * std::exp2(offset);
}

std::vector<double> DetectorModel::default_offsets(int categories, double spread) {
    std::vector<double> offsets(categories, 0.0);
    if (categories <= 1) return offsets;
    for (int c = 0; c < categories; ++c)
        offsets[c] = -spread / 2.0 + spread * c / (categories - 1);
    return offsets;
}

double DetectionOutcome::mean_iou() const {
    if (objects.empty()) return 0.0;
    double s = 0.0;
    for (const auto& o : objects) s += o.iou;
    return s / objects.size();
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(mix_seed(seed, 0x5ce9eULL));

    Scene scene;
    scene.width = config.width;
    scene.height = config.height;
    scene.seed = seed;

    const int n = rng.uniform_int(config.objects_min, config.objects_max);
    const int n_clusters =
        std::clamp(static_cast<int>(std::lround(n / config.objects_per_cluster)), 1, n);

    // Per-scene category base sizes: one band draw per category, so that
    // same-category objects share a similar scale anywhere in the scene.
    std::vector<double> category_base(config.categories, 0.0);
    for (int c = 0; c < config.categories; ++c) {
        const int band = rng.weighted_index(config.band_weights);
        category_base[c] =
            std::exp(rng.uniform(std::log(config.band_edges[band]),
                                 std::log(config.band_edges[band + 1])));
    }

    const double margin =
        std::min(config.margin, std::min(config.width, config.height) / 4.0);
    struct Cluster {
        int category;
        double cx, cy;
        double base_px;
    };
    std::vector<Cluster> clusters(n_clusters);
    for (auto& cl : clusters) {
        cl.category = rng.uniform_int(0, config.categories - 1);
        cl.cx = rng.uniform(margin, config.width - margin);
        cl.cy = rng.uniform(margin, config.height - margin);
        cl.base_px = category_base[cl.category] *
                     std::exp(rng.normal(0.0, config.category_size_jitter));
    }

    const double px_min = config.band_edges.front();
    const double px_max = config.band_edges.back();
    scene.objects.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Cluster& cl = clusters[i % n_clusters];
        double px = cl.base_px * std::exp(rng.normal(0.0, config.size_jitter));
        px = std::clamp(px, px_min, px_max);
        const double aspect = std::exp(rng.uniform(-0.35, 0.35));
        double w = std::min(px * std::sqrt(aspect), static_cast<double>(config.width));
        double h = std::min(px / std::sqrt(aspect), static_cast<double>(config.height));
        const double cx = cl.cx + rng.normal(0.0, config.cluster_spread);
        const double cy = cl.cy + rng.normal(0.0, config.cluster_spread);

        SceneObject obj;
        obj.id = i;
        obj.category = cl.category;
        obj.bbox.w = w;
        obj.bbox.h = h;
        obj.bbox.x = std::clamp(cx - w / 2.0, 0.0, config.width - w);
        obj.bbox.y = std::clamp(cy - h / 2.0, 0.0, config.height - h);
        obj.px_size = std::sqrt(w * h);
        scene.objects.push_back(obj);
    }
    return scene;
}

Box expand_region(const Box& bbox, double beta, const Box& scene_bounds) {
    if (beta < 1.0) throw std::invalid_argument("expand_region: beta must be >= 1");
    const double w = std::min(beta * bbox.w, scene_bounds.w);
    const double h = std::min(beta * bbox.h, scene_bounds.h);
    Box out;
    out.w = w;
    out.h = h;
    out.x = std::clamp(bbox.cx() - w / 2.0, scene_bounds.x, scene_bounds.x + scene_bounds.w - w);
    out.y = std::clamp(bbox.cy() - h / 2.0, scene_bounds.y, scene_bounds.y + scene_bounds.h - h);
    return out;
}

std::vector<ClusterRegion> merge_clusters(const std::vector<Box>& expanded_boxes,
                                          double iou_threshold,
                                          const std::vector<SceneObject>& objects) {
    if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
        throw std::invalid_argument("merge_clusters: iou_threshold must be in (0, 1)");
    if (expanded_boxes.size() != objects.size())
        throw std::invalid_argument("merge_clusters: boxes/objects size mismatch");

    struct Group {
        Box box;
        std::vector<int> members;  // indices into `objects`
    };
    std::vector<Group> groups;
    groups.reserve(expanded_boxes.size());
    for (size_t i = 0; i < expanded_boxes.size(); ++i)
        groups.push_back({expanded_boxes[i], {static_cast<int>(i)}});

    // Greedy union to a fixpoint: merge the first qualifying pair, restart.
    bool merged = true;
    while (merged) {
        merged = false;
        for (size_t i = 0; i < groups.size() && !merged; ++i) {
            for (size_t j = i + 1; j < groups.size() && !merged; ++j) {
                if (iou(groups[i].box, groups[j].box) >= iou_threshold) {
                    groups[i].box = envelope(groups[i].box, groups[j].box);
                    groups[i].members.insert(groups[i].members.end(),
                                             groups[j].members.begin(),
                                             groups[j].members.end());
                    groups.erase(groups.begin() + j);
                    merged = true;
                }
            }
        }
    }

    std::vector<ClusterRegion> regions;
    regions.reserve(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) {
        ClusterRegion r;
        r.id = static_cast<int>(g);
        r.bbox = groups[g].box;
        r.cx = r.bbox.cx();
        r.cy = r.bbox.cy();

        std::sort(groups[g].members.begin(), groups[g].members.end());
        std::map<int, int> category_counts;
        double px_sum = 0.0;
        for (int idx : groups[g].members) {
            const SceneObject& obj = objects[idx];
            r.members.push_back(obj.id);
            ++category_counts[obj.category];
            px_sum += obj.px_size;
        }
        r.mean_px_size = px_sum / groups[g].members.size();

        // Modal category, smallest index on ties (map iterates ascending).
        int best_count = -1;
        for (const auto& [cat, count] : category_counts) {
            if (count > best_count) {
                best_count = count;
                r.dominant_category = cat;
            }
        }
        regions.push_back(std::move(r));
    }
    return regions;
}

std::vector<ClusterRegion> make_regions(const Scene& scene, const RegionParams& params) {
    std::vector<Box> expanded;
    expanded.reserve(scene.objects.size());
    for (const auto& obj : scene.objects)
        expanded.push_back(expand_region(obj.bbox, params.beta, scene.bounds()));
    return merge_clusters(expanded, params.merge_iou, scene.objects);
}

namespace {

double raw_quality(double px_size, int category, double lambda, const DetectorModel& model,
                   double sigma) {
    const double p_eff = lambda * px_size;
    const double p_star = model.category_optimum_px(category);
    const double z = std::log2(p_eff / p_star);
    const double gauss = std::exp(-(z * z) / (2.0 * sigma * sigma));
    const double penalty = model.artifact_slope * std::max(0.0, lambda - model.max_scale);
    return gauss - penalty;
}

}  // namespace

const SceneObject& object_by_id(const Scene& scene, int id) {
    if (id >= 0 && id < static_cast<int>(scene.objects.size()) && scene.objects[id].id == id)
        return scene.objects[id];
    for (const auto& o : scene.objects)
        if (o.id == id) return o;
    throw std::invalid_argument("object_by_id: unknown object id " + std::to_string(id));
}

double detection_quality(double px_size, int category, double lambda,
                         const DetectorModel& model, double sigma) {
    return std::clamp(raw_quality(px_size, category, lambda, model, sigma), 0.0, 1.0);
}

DetectionOutcome simulate_detection(const ClusterRegion& region, double lambda,
                                    const DetectorModel& model, const Scene& scene,
                                    std::uint64_t rng_seed) {
    if (lambda <= 0.0) throw std::invalid_argument("simulate_detection: lambda must be positive");
    model.validate();

    DetectionOutcome outcome;
    outcome.region_id = region.id;
    outcome.objects.reserve(region.members.size());
    for (int id : region.members) {
        const SceneObject& obj = object_by_id(scene, id);
        ObjectOutcome oo;
        oo.object_id = id;
        const double loc = raw_quality(obj.px_size, obj.category, lambda, model, model.sigma_loc);
        const double cls = raw_quality(obj.px_size, obj.category, lambda, model, model.sigma_cls);
        const double cls_prob = std::clamp(cls, 0.0, 1.0);
        if (model.noise_sd > 0.0) {
            Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(region.id) + 1,
                             static_cast<std::uint64_t>(id) + 1));
            oo.iou = std::clamp(loc + rng.normal(0.0, model.noise_sd), 0.0, 1.0);
            oo.label_correct = rng.uniform() < cls_prob;
        } else {
            oo.iou = std::clamp(loc, 0.0, 1.0);
            oo.label_correct = cls_prob >= 0.5;
        }
        outcome.objects.push_back(oo);
    }
    return outcome;
}

namespace {

struct RegionActionStats {
    double iou_sum = 0.0;
    int objects = 0;
    int eligible = 0;
    int correct = 0;
};

// Per-(region, action) detection tallies at noise 0; r_l and r_c of any
// assignment are then sums of these, which makes enumeration cheap.
std::vector<std::vector<RegionActionStats>> precompute_stats(
    const std::vector<ClusterRegion>& regions, const std::vector<double>& action_set,
    const DetectorModel& model, const Scene& scene) {
    DetectorModel quiet = model;
    quiet.noise_sd = 0.0;
    std::vector<std::vector<RegionActionStats>> stats(regions.size());
    for (size_t i = 0; i < regions.size(); ++i) {
        stats[i].resize(action_set.size());
        for (size_t a = 0; a < action_set.size(); ++a) {
            const DetectionOutcome out = simulate_detection(regions[i], action_set[a], quiet, scene);
            RegionActionStats& s = stats[i][a];
            for (const auto& obj : out.objects) {
                s.iou_sum += obj.iou;
                ++s.objects;
                if (obj.iou >= 0.5) {
                    ++s.eligible;
                    if (obj.label_correct) ++s.correct;
                }
            }
        }
    }
    return stats;
}

double assignment_reward(const std::vector<int>& idx,
                         const std::vector<std::vector<RegionActionStats>>& stats,
                         const std::vector<double>& action_set, const NeighborGraph& graph,
                         const RewardWeights& weights) {
    double iou_sum = 0.0;
    int objects = 0, eligible = 0, correct = 0;
    for (size_t i = 0; i < idx.size(); ++i) {
        const RegionActionStats& s = stats[i][idx[i]];
        iou_sum += s.iou_sum;
        objects += s.objects;
        eligible += s.eligible;
        correct += s.correct;
    }
    const double r_l = objects > 0 ? iou_sum / objects : 0.0;
    const double r_c = eligible > 0 ? static_cast<double>(correct) / eligible : 0.0;

    double acc = 0.0;
    const int n = static_cast<int>(idx.size());
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = graph.neighbors[i];
        if (nbrs.empty()) {
            acc += 1.0;
            continue;
        }
        double delta = 0.0;
        for (int j : nbrs) delta += std::fabs(action_set[idx[i]] - action_set[idx[j]]);
        delta /= static_cast<double>(nbrs.size());
        acc += std::exp(-delta / graph.consistency_k);
    }
    const double r_s = n > 0 ? acc / n : 1.0;
    return total_reward(r_l, r_c, r_s, weights);
}

}  // namespace

OracleResult oracle_scales(const std::vector<ClusterRegion>& regions,
                           const std::vector<double>& action_set, const DetectorModel& model,
                           const Scene& scene, const RewardConfig& reward_config,
                           const OracleOptions& options) {
    if (action_set.empty()) throw ConfigError("oracle_scales: action set is empty");
    reward_config.weights.validate();

    const int n = static_cast<int>(regions.size());
    const int num_actions = static_cast<int>(action_set.size());
    const NeighborGraph graph =
        build_neighbor_graph(regions, reward_config.neighbor_radius,
                             reward_config.neighbor_k_max, reward_config.resolve_k(action_set));

    OracleResult result;
    if (n == 0) {
        result.best_reward = total_reward(0.0, 0.0, 1.0, reward_config.weights);
        return result;
    }

    const auto stats = precompute_stats(regions, action_set, model, scene);
    std::vector<int> idx(n, 0);

    if (options.mode == OracleMode::kExhaustive) {
        double space = 1.0;
        for (int i = 0; i < n; ++i) space *= num_actions;
        if (space > static_cast<double>(options.exhaustive_cap)) {
            throw ConfigError("oracle_scales: exhaustive search space of " +
                              std::to_string(static_cast<std::uint64_t>(space)) +
                              " assignments exceeds cap " +
                              std::to_string(options.exhaustive_cap));
        }

        double best = -1.0;
        std::vector<int> best_idx = idx;
        // Lexicographic enumeration, region 0 most significant; strict
        // improvement keeps the smallest-index argmax on ties.
        while (true) {
            const double r = assignment_reward(idx, stats, action_set, graph,
                                               reward_config.weights);
            ++result.evaluations;
            if (r > best) {
                best = r;
                best_idx = idx;
            }
            int pos = n - 1;
            while (pos >= 0) {
                if (++idx[pos] < num_actions) break;
                idx[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
        result.action_indices = best_idx;
        result.best_reward = best;
    } else {
        // Coordinate ascent from the per-region local optimum (r_s ignored).
        for (int i = 0; i < n; ++i) {
            double best_local = -1.0;
            for (int a = 0; a < num_actions; ++a) {
                const RegionActionStats& s = stats[i][a];
                const double r_l = s.objects > 0 ? s.iou_sum / s.objects : 0.0;
                const double r_c = s.eligible > 0 ? static_cast<double>(s.correct) / s.eligible : 0.0;
                const double local = reward_config.weights.alpha_l * r_l +
                                     reward_config.weights.alpha_c * r_c;
                if (local > best_local) {
                    best_local = local;
                    idx[i] = a;
                }
            }
        }
        double current = assignment_reward(idx, stats, action_set, graph, reward_config.weights);
        ++result.evaluations;
        const int max_sweeps = 100;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                const int saved = idx[i];
                int best_a = saved;
                double best_r = current;
                for (int a = 0; a < num_actions; ++a) {
                    if (a == saved) continue;
                    idx[i] = a;
                    const double r = assignment_reward(idx, stats, action_set, graph,
                                                       reward_config.weights);
                    ++result.evaluations;
                    if (r > best_r) {
                        best_r = r;
                        best_a = a;
                    }
                }
                idx[i] = best_a;
                if (best_a != saved) {
                    current = best_r;
                    changed = true;
                }
            }
            ++result.iterations;
            if (!changed) break;
        }
        result.action_indices = idx;
        result.best_reward = current;
    }

    result.lambdas.reserve(n);
    for (int i = 0; i < n; ++i) result.lambdas.push_back(action_set[result.action_indices[i]]);
    return result;
}

}  // namespace evorl
