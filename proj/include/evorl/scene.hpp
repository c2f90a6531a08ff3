#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evorl/geometry.hpp"
#include "evorl/rng.hpp"

namespace evorl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SceneObject {
    int id = 0;
    int category = 0;
    Box bbox;
    double px_size = 0.0;  // sqrt(w*h), recomputable from bbox
};

struct Scene {
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;

    Box bounds() const { return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)}; }
};

/// Generator parameters. Same-category objects are placed in spatial
/// clusters, and clusters of one category share a per-scene base size, so
/// that nearby same-category objects have similar pixel sizes by
/// construction.
struct SceneConfig {
    int width = 1024;
    int height = 1024;
    int categories = 5;
    int objects_min = 4;
    int objects_max = 12;
    double objects_per_cluster = 3.0;
    double cluster_spread = 60.0;      // sd of object offsets around the cluster center, px
    double size_jitter = 0.15;         // log-scale sd of object size around the cluster base
    double category_size_jitter = 0.2; // log-scale sd of cluster base around the category base
    double margin = 64.0;              // keep cluster centers away from scene edges
    // Pixel-size bands (ultra-small / small / medium / large): edges and
    // sampling weights for category base sizes.
    std::vector<double> band_edges = {4.0, 16.0, 32.0, 96.0, 256.0};
    std::vector<double> band_weights = {0.35, 0.30, 0.20, 0.15};

    void validate() const;
    int band_of(double px_size) const;  // 0..bands-1, clamped at the ends
    int num_bands() const { return static_cast<int>(band_weights.size()); }
};

struct ClusterRegion {
    int id = 0;
    Box bbox;
    std::vector<int> members;  // SceneObject ids
    double cx = 0.0;
    double cy = 0.0;
    int dominant_category = 0;
    double mean_px_size = 0.0;
};

/// Parameterized surrogate for the fine-detection pass: detection quality is
/// a log-Gaussian curve in effective pixel size peaking at the per-category
/// optimum, with a linear penalty for scaling past max_scale.
struct DetectorModel {
    double optimal_px = 64.0;
    double sigma_loc = 1.0;    // log2-scale bandwidth of the IoU curve
    double sigma_cls = 1.25;   // log2-scale bandwidth of the label curve
    double max_scale = 2.5;
    double artifact_slope = 0.12;
    double noise_sd = 0.0;
    std::vector<double> category_offsets;  // p*_c = optimal_px * 2^offsets[c]

    void validate() const;
    double category_optimum_px(int category) const;
    /// Fill offsets evenly spaced in [-spread/2, spread/2] for C categories.
    static std::vector<double> default_offsets(int categories, double spread = 0.5);
};

struct ObjectOutcome {
    int object_id = 0;
    double iou = 0.0;
    bool label_correct = false;
};

struct DetectionOutcome {
    int region_id = 0;
    std::vector<ObjectOutcome> objects;

    double mean_iou() const;
};

Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Lookup by object id (ids equal indices for generated scenes; falls back
/// to a scan for hand-built fixtures). Throws on unknown ids.
const SceneObject& object_by_id(const Scene& scene, int id);

/// Center-preserving expansion by beta, clipped to the scene bounds. The
/// result always contains the input box.
Box expand_region(const Box& bbox, double beta, const Box& scene_bounds);

/// Greedy union: repeatedly merge the first pair of boxes with IoU >=
/// threshold into their envelope until no pair qualifies. Output regions are
/// pairwise below the threshold. expanded_boxes[i] belongs to objects[i].
std::vector<ClusterRegion> merge_clusters(const std::vector<Box>& expanded_boxes,
                                          double iou_threshold,
                                          const std::vector<SceneObject>& objects);

struct RegionParams {
    double beta = 1.5;
    double merge_iou = 0.3;
};

/// expand_region + merge_clusters over a scene's objects.
std::vector<ClusterRegion> make_regions(const Scene& scene, const RegionParams& params);

DetectionOutcome simulate_detection(const ClusterRegion& region, double lambda,
                                    const DetectorModel& model, const Scene& scene,
                                    std::uint64_t rng_seed = 0);

/// Localization quality for a single object before noise: the log-Gaussian
/// curve minus the over-scaling penalty, clamped to [0, 1].
double detection_quality(double px_size, int category, double lambda,
                         const DetectorModel& model, double sigma);

struct RewardWeights;
struct RewardConfig;

enum class OracleMode { kExhaustive, kCoordinateAscent };

struct OracleOptions {
    OracleMode mode = OracleMode::kExhaustive;
    std::uint64_t exhaustive_cap = 2000000;  // max assignments to enumerate
};

struct OracleResult {
    std::vector<int> action_indices;  // per region
    std::vector<double> lambdas;
    double best_reward = 0.0;
    std::uint64_t evaluations = 0;
    int iterations = 0;  // coordinate-ascent sweeps
};

/// Ground-truth maximizer of the total reward over the discrete assignment
/// space. Exhaustive mode refuses (ConfigError) when |actions|^N exceeds the
/// cap. Ties resolve to the lexicographically smallest assignment.
OracleResult oracle_scales(const std::vector<ClusterRegion>& regions,
                           const std::vector<double>& action_set,
                           const DetectorModel& model, const Scene& scene,
                           const RewardConfig& reward_config,
                           const OracleOptions& options = {});

}  // namespace evorl
