#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "evorl/config.hpp"
#include "evorl/rewards.hpp"
#include "evorl/scene.hpp"
#include "evorl/serialize.hpp"

using namespace evorl;

namespace {

SceneObject make_object(int id, int category, Box bbox) {
    SceneObject o;
    o.id = id;
    o.category = category;
    o.bbox = bbox;
    o.px_size = std::sqrt(bbox.w * bbox.h);
    return o;
}

ClusterRegion single_region(const SceneObject& obj) {
    ClusterRegion r;
    r.id = 0;
    r.bbox = obj.bbox;
    r.members = {obj.id};
    r.cx = obj.bbox.cx();
    r.cy = obj.bbox.cy();
    r.dominant_category = obj.category;
    r.mean_px_size = obj.px_size;
    return r;
}

}  // namespace

TEST_CASE("generate_scene respects the configured object count") {
    SceneConfig cfg;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Scene scene = generate_scene(cfg, seed);
        CHECK(scene.objects.size() >= static_cast<size_t>(cfg.objects_min));
        CHECK(scene.objects.size() <= static_cast<size_t>(cfg.objects_max));
    }

    SceneConfig one = cfg;
    one.objects_min = one.objects_max = 1;
    CHECK(generate_scene(one, 123).objects.size() == 1);
}

TEST_CASE("generate_scene is deterministic and objects are well-formed") {
    SceneConfig cfg;
    const Scene a = generate_scene(cfg, 7);
    const Scene b = generate_scene(cfg, 7);
    CHECK(scene_to_json(a) == scene_to_json(b));

    const Scene c = generate_scene(cfg, 42);
    for (const auto& obj : c.objects) {
        CHECK(obj.bbox.w > 0.0);
        CHECK(obj.bbox.h > 0.0);
        CHECK(obj.bbox.x >= 0.0);
        CHECK(obj.bbox.y >= 0.0);
        CHECK(obj.bbox.x2() <= cfg.width);
        CHECK(obj.bbox.y2() <= cfg.height);
        CHECK(obj.px_size == std::sqrt(obj.bbox.w * obj.bbox.h));
        CHECK(obj.category >= 0);
        CHECK(obj.category < cfg.categories);
    }
}

TEST_CASE("generate_scene rejects invalid configs") {
    SceneConfig cfg;
    cfg.categories = 0;
    CHECK_THROWS_AS(generate_scene(cfg, 1), ConfigError);

    SceneConfig bands;
    bands.band_weights.clear();
    bands.band_edges = {4.0};
    CHECK_THROWS_AS(generate_scene(bands, 1), ConfigError);

    SceneConfig counts;
    counts.objects_min = 5;
    counts.objects_max = 2;
    CHECK_THROWS_AS(generate_scene(counts, 1), ConfigError);
}

TEST_CASE("same-category spatial neighbors have correlated sizes") {
    SceneConfig cfg;
    std::vector<double> xs, ys;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Scene scene = generate_scene(cfg, seed);
        for (size_t i = 0; i < scene.objects.size(); ++i) {
            for (size_t j = i + 1; j < scene.objects.size(); ++j) {
                const auto& a = scene.objects[i];
                const auto& b = scene.objects[j];
                if (a.category != b.category) continue;
                if (center_distance(a.bbox, b.bbox) > 256.0) continue;
                xs.push_back(a.px_size);
                ys.push_back(b.px_size);
                xs.push_back(b.px_size);
                ys.push_back(a.px_size);
            }
        }
    }
    REQUIRE(xs.size() > 100);
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    };
    const double mx = mean(xs), my = mean(ys);
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        cov += (xs[i] - mx) * (ys[i] - my);
        vx += (xs[i] - mx) * (xs[i] - mx);
        vy += (ys[i] - my) * (ys[i] - my);
    }
    CHECK(cov / std::sqrt(vx * vy) >= 0.5);
}

TEST_CASE("expand_region scales around the center and clips to bounds") {
    const Box bounds{0, 0, 1000, 1000};
    const Box out = expand_region({10, 10, 20, 20}, 1.5, bounds);
    CHECK(out.x == doctest::Approx(5.0));
    CHECK(out.y == doctest::Approx(5.0));
    CHECK(out.w == doctest::Approx(30.0));
    CHECK(out.h == doctest::Approx(30.0));

    const Box same = expand_region({10, 10, 20, 20}, 1.0, bounds);
    CHECK(same.x == 10.0);
    CHECK(same.w == 20.0);

    // Clip fixture by hand: 1.5 * 980 = 1470 exceeds the scene, so the
    // width/height cap at 1000 and the box pins to the origin.
    const Box clipped = expand_region({10, 10, 980, 980}, 1.5, bounds);
    CHECK(clipped.x == 0.0);
    CHECK(clipped.y == 0.0);
    CHECK(clipped.w == 1000.0);
    CHECK(clipped.area() <= 1.5 * 1.5 * 980 * 980);
    CHECK(clipped.contains(Box{10, 10, 980, 980}));

    CHECK_THROWS_AS(expand_region({0, 0, 5, 5}, 0.9, bounds), std::invalid_argument);
}

TEST_CASE("expand_region always contains the original box") {
    Rng rng(77);
    const Box bounds{0, 0, 512, 512};
    for (int trial = 0; trial < 200; ++trial) {
        const double w = rng.uniform(1.0, 300.0);
        const double h = rng.uniform(1.0, 300.0);
        const Box box{rng.uniform(0.0, 512.0 - w), rng.uniform(0.0, 512.0 - h), w, h};
        const Box out = expand_region(box, rng.uniform(1.0, 4.0), bounds);
        CHECK(out.contains(box));
        CHECK(out.x >= 0.0);
        CHECK(out.y >= 0.0);
        CHECK(out.x2() <= 512.0 + 1e-9);
        CHECK(out.y2() <= 512.0 + 1e-9);
    }
}

TEST_CASE("merge_clusters handles identical, disjoint, and chained boxes") {
    const std::vector<SceneObject> two = {make_object(0, 1, {0, 0, 10, 10}),
                                          make_object(1, 1, {0, 0, 10, 10})};
    CHECK(merge_clusters({two[0].bbox, two[1].bbox}, 0.5, two).size() == 1);

    const std::vector<SceneObject> far = {make_object(0, 1, {0, 0, 10, 10}),
                                          make_object(1, 1, {500, 500, 10, 10})};
    CHECK(merge_clusters({far[0].bbox, far[1].bbox}, 0.5, far).size() == 2);

    // A~B and B~C above the 0.3 threshold, A and C below it; the union is
    // transitive through the growing envelope.
    const std::vector<SceneObject> chain = {make_object(0, 1, {0, 0, 10, 10}),
                                            make_object(1, 1, {4, 0, 10, 10}),
                                            make_object(2, 1, {8, 0, 10, 10})};
    CHECK(iou(chain[0].bbox, chain[1].bbox) > 0.3);
    CHECK(iou(chain[1].bbox, chain[2].bbox) > 0.3);
    CHECK(iou(chain[0].bbox, chain[2].bbox) < 0.3);
    const auto regions = merge_clusters({chain[0].bbox, chain[1].bbox, chain[2].bbox}, 0.3, chain);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].members == std::vector<int>{0, 1, 2});

    CHECK(merge_clusters({}, 0.3, {}).empty());
    CHECK_THROWS_AS(merge_clusters({two[0].bbox, two[1].bbox}, 0.0, two), std::invalid_argument);
}

TEST_CASE("merge_clusters output is idempotent and members intersect their region") {
    SceneConfig cfg;
    RegionParams params;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Scene scene = generate_scene(cfg, seed);
        const auto regions = make_regions(scene, params);
        // Pairwise below threshold implies re-merging changes nothing.
        std::vector<Box> boxes;
        std::vector<SceneObject> dummies;
        for (const auto& r : regions) {
            boxes.push_back(r.bbox);
            dummies.push_back(make_object(static_cast<int>(dummies.size()), 0, r.bbox));
        }
        CHECK(merge_clusters(boxes, params.merge_iou, dummies).size() == regions.size());
        for (const auto& r : regions)
            for (int id : r.members)
                CHECK(r.bbox.intersects(object_by_id(scene, id).bbox));
    }
}

TEST_CASE("dominant category breaks ties toward the smaller index") {
    const std::vector<SceneObject> objs = {
        make_object(0, 2, {0, 0, 10, 10}), make_object(1, 1, {1, 0, 10, 10}),
        make_object(2, 1, {2, 0, 10, 10}), make_object(3, 2, {3, 0, 10, 10})};
    const auto regions =
        merge_clusters({objs[0].bbox, objs[1].bbox, objs[2].bbox, objs[3].bbox}, 0.3, objs);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].dominant_category == 1);
    CHECK(regions[0].mean_px_size == doctest::Approx(10.0));
}

TEST_CASE("simulate_detection hits the quality peak at the category optimum") {
    DetectorModel model;
    model.artifact_slope = 0.0;
    model.category_offsets = {0.0, 0.5};
    Scene scene;
    scene.width = scene.height = 1024;

    // p = p*_c, lambda = 1 -> exponent 0 -> iou 1.
    scene.objects = {make_object(0, 0, {0, 0, 64, 64})};
    auto out = simulate_detection(single_region(scene.objects[0]), 1.0, model, scene);
    REQUIRE(out.objects.size() == 1);
    CHECK(out.objects[0].iou == doctest::Approx(1.0));
    CHECK(out.objects[0].label_correct);

    // p = p*_c / 2 at lambda = 2 lands on the optimum again.
    scene.objects = {make_object(0, 0, {0, 0, 32, 32})};
    out = simulate_detection(single_region(scene.objects[0]), 2.0, model, scene);
    CHECK(out.objects[0].iou == doctest::Approx(1.0));

    // Past max_scale the artifact penalty pushes quality strictly down.
    DetectorModel harsh;
    harsh.category_offsets = {0.0};
    scene.objects = {make_object(0, 0, {0, 0, 64, 64})};
    const auto at_one = simulate_detection(single_region(scene.objects[0]), 1.0, harsh, scene);
    const auto at_past =
        simulate_detection(single_region(scene.objects[0]), 2.0 * harsh.max_scale, harsh, scene);
    CHECK(at_past.objects[0].iou < at_one.objects[0].iou);

    CHECK_THROWS_AS(simulate_detection(single_region(scene.objects[0]), 0.0, model, scene),
                    std::invalid_argument);
}

TEST_CASE("zero-noise detection is deterministic, noisy detection is seed-stable") {
    DetectorModel model;
    model.noise_sd = 0.05;
    model.category_offsets = {0.0};
    Scene scene;
    scene.width = scene.height = 1024;
    scene.objects = {make_object(0, 0, {0, 0, 48, 48})};
    const ClusterRegion region = single_region(scene.objects[0]);

    const auto a = simulate_detection(region, 1.5, model, scene, 99);
    const auto b = simulate_detection(region, 1.5, model, scene, 99);
    CHECK(a.objects[0].iou == b.objects[0].iou);
    const auto c = simulate_detection(region, 1.5, model, scene, 100);
    CHECK(a.objects[0].iou != c.objects[0].iou);

    model.noise_sd = 0.0;
    const auto d = simulate_detection(region, 1.5, model, scene, 99);
    const auto e = simulate_detection(region, 1.5, model, scene, 12345);
    CHECK(d.objects[0].iou == e.objects[0].iou);
}

TEST_CASE("single-object quality curve is unimodal on the pre-penalty range") {
    DetectorModel model;
    model.category_offsets = DetectorModel::default_offsets(5);
    Scene scene;
    scene.width = scene.height = 1024;
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const double px = std::exp(rng.uniform(std::log(4.0), std::log(256.0)));
        scene.objects = {make_object(0, rng.uniform_int(0, 4), {0, 0, px, px})};
        const ClusterRegion region = single_region(scene.objects[0]);
        std::vector<double> values;
        for (int i = 0; i < 100; ++i) {
            const double lam = 0.5 + (model.max_scale - 0.5) * i / 99.0;
            values.push_back(simulate_detection(region, lam, model, scene).objects[0].iou);
        }
        int maxima = 0;
        for (int i = 1; i + 1 < 100; ++i)
            if (values[i] > values[i - 1] && values[i] > values[i + 1]) ++maxima;
        CHECK(maxima <= 1);
    }
}

TEST_CASE("oracle on one region equals the sweep argmax") {
    Config cfg;
    cfg.scene.objects_min = cfg.scene.objects_max = 1;
    const DetectorModel model = cfg.resolved_detector();
    const Scene scene = generate_scene(cfg.scene, 4242);
    const auto regions = make_regions(scene, cfg.regions);
    REQUIRE(regions.size() == 1);

    const OracleResult oracle =
        oracle_scales(regions, cfg.action_set, model, scene, cfg.rewards);
    CHECK(oracle.evaluations == cfg.action_set.size());

    double best = -1.0;
    int best_index = 0;
    const NeighborGraph graph = build_neighbor_graph(regions, cfg.rewards.neighbor_radius,
                                                     cfg.rewards.neighbor_k_max,
                                                     cfg.consistency_k());
    for (size_t a = 0; a < cfg.action_set.size(); ++a) {
        const auto out = simulate_detection(regions[0], cfg.action_set[a], model, scene);
        const RewardVector r =
            reward_vector({out}, {cfg.action_set[a]}, graph, cfg.rewards.weights);
        CHECK(r.r_s == 1.0);  // no neighbors
        if (r.total > best) {
            best = r.total;
            best_index = static_cast<int>(a);
        }
    }
    CHECK(oracle.action_indices[0] == best_index);
    CHECK(oracle.best_reward == doctest::Approx(best));
}

TEST_CASE("oracle assigns equal scales to identical adjacent regions") {
    Scene scene;
    scene.width = scene.height = 1024;
    scene.objects = {make_object(0, 2, {100, 100, 24, 24}),
                     make_object(1, 2, {160, 100, 24, 24})};
    const std::vector<ClusterRegion> regions = {single_region(scene.objects[0]),
                                                single_region(scene.objects[1])};
    Config cfg;
    const OracleResult oracle =
        oracle_scales(regions, cfg.action_set, cfg.resolved_detector(), scene, cfg.rewards);
    CHECK(oracle.evaluations == 36);
    CHECK(oracle.action_indices[0] == oracle.action_indices[1]);
}

TEST_CASE("oracle refuses exhaustive search spaces above the cap") {
    Config cfg;
    cfg.scene.objects_min = cfg.scene.objects_max = 8;
    cfg.scene.objects_per_cluster = 1.0;  // keep all regions separate
    cfg.scene.cluster_spread = 1.0;
    const Scene scene = generate_scene(cfg.scene, 5);
    const auto regions = make_regions(scene, cfg.regions);
    REQUIRE(regions.size() >= 4);

    OracleOptions opts;
    opts.exhaustive_cap = 10;
    CHECK_THROWS_WITH_AS(
        oracle_scales(regions, cfg.action_set, cfg.resolved_detector(), scene, cfg.rewards, opts),
        doctest::Contains("cap 10"), ConfigError);
}

TEST_CASE("coordinate-ascent oracle reaches a local optimum") {
    Config cfg;
    cfg.scene.objects_min = 4;
    cfg.scene.objects_max = 6;
    const DetectorModel model = cfg.resolved_detector();
    const Scene scene = generate_scene(cfg.scene, 11);
    const auto regions = make_regions(scene, cfg.regions);

    OracleOptions coord;
    coord.mode = OracleMode::kCoordinateAscent;
    const OracleResult local = oracle_scales(regions, cfg.action_set, model, scene,
                                             cfg.rewards, coord);
    CHECK(local.iterations >= 1);

    const OracleResult exact = oracle_scales(regions, cfg.action_set, model, scene, cfg.rewards);
    CHECK(local.best_reward <= exact.best_reward + 1e-12);
    // Coordinate ascent must be at least single-coordinate optimal.
    CHECK(local.best_reward > 0.0);
}

TEST_CASE("regression: exhaustive oracle over an 8-region scene") {
    Config cfg;
    cfg.scene.objects_min = cfg.scene.objects_max = 8;
    cfg.scene.objects_per_cluster = 1.0;
    cfg.scene.cluster_spread = 1.0;
    const Scene scene = generate_scene(cfg.scene, 21);
    const auto regions = make_regions(scene, cfg.regions);
    REQUIRE(regions.size() == 8);

    const OracleResult oracle =
        oracle_scales(regions, cfg.action_set, cfg.resolved_detector(), scene, cfg.rewards);
    CHECK(oracle.evaluations == 1679616);  // 6^8
    const OracleResult again =
        oracle_scales(regions, cfg.action_set, cfg.resolved_detector(), scene, cfg.rewards);
    CHECK(oracle.best_reward == again.best_reward);
    CHECK(oracle.action_indices == again.action_indices);
}

TEST_CASE("per-band mean optimal scale decreases from ultra-small to large") {
    Config cfg;
    cfg.scene.objects_min = cfg.scene.objects_max = 1;
    const DetectorModel model = cfg.resolved_detector();
    std::vector<double> sum(4, 0.0);
    std::vector<int> count(4, 0);
    for (int i = 0; i < 1000; ++i) {
        const Scene scene = generate_scene(cfg.scene, 20000 + i);
        const auto regions = make_regions(scene, cfg.regions);
        const OracleResult oracle =
            oracle_scales(regions, cfg.action_set, model, scene, cfg.rewards);
        const int band = cfg.scene.band_of(scene.objects[0].px_size);
        sum[band] += oracle.lambdas[0];
        ++count[band];
    }
    REQUIRE(count[0] > 20);
    REQUIRE(count[3] > 20);
    CHECK(sum[0] / count[0] > sum[3] / count[3]);
}

TEST_CASE("scene and region JSON round-trips are exact") {
    SceneConfig cfg;
    const Scene scene = generate_scene(cfg, 99);
    const Scene back = scene_from_json(scene_to_json(scene));
    CHECK(scene_to_json(back) == scene_to_json(scene));
    REQUIRE(back.objects.size() == scene.objects.size());
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        CHECK(back.objects[i].bbox.x == scene.objects[i].bbox.x);
        CHECK(back.objects[i].px_size == scene.objects[i].px_size);
    }

    const auto regions = make_regions(scene, {});
    const auto regions_back = regions_from_json(regions_to_json(regions));
    REQUIRE(regions_back.size() == regions.size());
    for (size_t i = 0; i < regions.size(); ++i) {
        CHECK(regions_back[i].members == regions[i].members);
        CHECK(regions_back[i].mean_px_size == regions[i].mean_px_size);
    }
}
