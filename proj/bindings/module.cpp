#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "evorl/config.hpp"
#include "evorl/evolution.hpp"
#include "evorl/features.hpp"
#include "evorl/rewards.hpp"
#include "evorl/scene.hpp"
#include "evorl/serialize.hpp"
#include "evorl/trainer.hpp"

namespace py = pybind11;
using namespace evorl;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Scale-optimization agent core: synthetic scenes, rewards, attention, "
              "evolutionary refinement, training and oracles";

    py::register_exception<ConfigError>(m, "ConfigError");

    py::class_<Box>(m, "Box")
        .def(py::init<>())
        .def(py::init([](double x, double y, double w, double h) {
                 return Box{x, y, w, h};
             }),
             py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"))
        .def_readwrite("x", &Box::x)
        .def_readwrite("y", &Box::y)
        .def_readwrite("w", &Box::w)
        .def_readwrite("h", &Box::h)
        .def("area", &Box::area)
        .def("__repr__", [](const Box& b) {
            return "Box(" + format_double(b.x) + ", " + format_double(b.y) + ", " +
                   format_double(b.w) + ", " + format_double(b.h) + ")";
        });
    m.def("iou", &iou, py::arg("a"), py::arg("b"));

    py::class_<SceneObject>(m, "SceneObject")
        .def(py::init<>())
        .def_readwrite("id", &SceneObject::id)
        .def_readwrite("category", &SceneObject::category)
        .def_readwrite("bbox", &SceneObject::bbox)
        .def_readwrite("px_size", &SceneObject::px_size);

    py::class_<Scene>(m, "Scene")
        .def(py::init<>())
        .def_readwrite("width", &Scene::width)
        .def_readwrite("height", &Scene::height)
        .def_readwrite("seed", &Scene::seed)
        .def_readwrite("objects", &Scene::objects)
        .def("to_json", [](const Scene& s) { return scene_to_json(s); });
    m.def("scene_from_json", &scene_from_json, py::arg("text"));

    py::class_<SceneConfig>(m, "SceneConfig")
        .def(py::init<>())
        .def_readwrite("width", &SceneConfig::width)
        .def_readwrite("height", &SceneConfig::height)
        .def_readwrite("categories", &SceneConfig::categories)
        .def_readwrite("objects_min", &SceneConfig::objects_min)
        .def_readwrite("objects_max", &SceneConfig::objects_max)
        .def_readwrite("band_edges", &SceneConfig::band_edges)
        .def_readwrite("band_weights", &SceneConfig::band_weights)
        .def("band_of", &SceneConfig::band_of, py::arg("px_size"));

    py::class_<ClusterRegion>(m, "ClusterRegion")
        .def(py::init<>())
        .def_readwrite("id", &ClusterRegion::id)
        .def_readwrite("bbox", &ClusterRegion::bbox)
        .def_readwrite("members", &ClusterRegion::members)
        .def_readwrite("cx", &ClusterRegion::cx)
        .def_readwrite("cy", &ClusterRegion::cy)
        .def_readwrite("dominant_category", &ClusterRegion::dominant_category)
        .def_readwrite("mean_px_size", &ClusterRegion::mean_px_size);

    py::class_<DetectorModel>(m, "DetectorModel")
        .def(py::init<>())
        .def_readwrite("optimal_px", &DetectorModel::optimal_px)
        .def_readwrite("sigma_loc", &DetectorModel::sigma_loc)
        .def_readwrite("sigma_cls", &DetectorModel::sigma_cls)
        .def_readwrite("max_scale", &DetectorModel::max_scale)
        .def_readwrite("artifact_slope", &DetectorModel::artifact_slope)
        .def_readwrite("noise_sd", &DetectorModel::noise_sd)
        .def_readwrite("category_offsets", &DetectorModel::category_offsets);

    py::class_<ObjectOutcome>(m, "ObjectOutcome")
        .def_readonly("object_id", &ObjectOutcome::object_id)
        .def_readonly("iou", &ObjectOutcome::iou)
        .def_readonly("label_correct", &ObjectOutcome::label_correct);

    py::class_<DetectionOutcome>(m, "DetectionOutcome")
        .def_readonly("region_id", &DetectionOutcome::region_id)
        .def_readonly("objects", &DetectionOutcome::objects)
        .def("mean_iou", &DetectionOutcome::mean_iou);

    m.def("generate_scene", &generate_scene, py::arg("config"), py::arg("seed"));
    m.def("expand_region", &expand_region, py::arg("bbox"), py::arg("beta"),
          py::arg("scene_bounds"));
    m.def("merge_clusters", &merge_clusters, py::arg("expanded_boxes"),
          py::arg("iou_threshold"), py::arg("objects"));
    m.def(
        "make_regions",
        [](const Scene& scene, double beta, double merge_iou) {
            return make_regions(scene, {beta, merge_iou});
        },
        py::arg("scene"), py::arg("beta") = 1.5, py::arg("merge_iou") = 0.3);
    m.def("simulate_detection", &simulate_detection, py::arg("region"), py::arg("lambda_"),
          py::arg("model"), py::arg("scene"), py::arg("rng_seed") = 0);

    py::class_<Tensor2>(m, "Tensor2")
        .def(py::init<int, int, double>(), py::arg("rows"), py::arg("cols"),
             py::arg("fill") = 0.0)
        .def_static("from_values", &Tensor2::from_values)
        .def_readonly("rows", &Tensor2::rows)
        .def_readonly("cols", &Tensor2::cols)
        .def_readwrite("data", &Tensor2::data)
        .def("at", [](const Tensor2& t, int i, int j) { return t.at(i, j); });

    py::class_<FeatureEncoder>(m, "FeatureEncoder")
        .def(py::init<int, int, std::uint64_t>(), py::arg("dim"), py::arg("categories"),
             py::arg("seed") = 9001)
        .def("encode_patch", &FeatureEncoder::encode_patch)
        .def("encode", &FeatureEncoder::encode);

    m.def("spatial_affinity", &spatial_affinity, py::arg("regions"));
    m.def("semantic_attention", &semantic_attention, py::arg("q"), py::arg("k"));
    m.def(
        "aggregate_attention",
        [](const Tensor2& sem, const Tensor2& s, const Tensor2& v, const std::string& fusion) {
            return aggregate_attention(
                sem, s, v,
                fusion == "matmul" ? AttentionFusion::kMatmul : AttentionFusion::kHadamard);
        },
        py::arg("sem"), py::arg("s"), py::arg("v"), py::arg("fusion") = "hadamard");

    py::class_<RewardWeights>(m, "RewardWeights")
        .def(py::init<>())
        .def_readwrite("alpha_l", &RewardWeights::alpha_l)
        .def_readwrite("alpha_c", &RewardWeights::alpha_c)
        .def_readwrite("alpha_s", &RewardWeights::alpha_s);

    py::class_<NeighborGraph>(m, "NeighborGraph")
        .def_readwrite("neighbors", &NeighborGraph::neighbors)
        .def_readwrite("consistency_k", &NeighborGraph::consistency_k);

    m.def("localization_reward",
          [](const std::vector<DetectionOutcome>& o) { return localization_reward(o); },
          py::arg("outcomes"));
    m.def("labeling_reward", &labeling_reward, py::arg("outcomes"));
    m.def("scale_consistency_reward", &scale_consistency_reward, py::arg("lambdas"),
          py::arg("graph"));
    m.def("total_reward", &total_reward, py::arg("r_l"), py::arg("r_c"), py::arg("r_s"),
          py::arg("weights"));
    m.def("build_neighbor_graph", &build_neighbor_graph, py::arg("regions"), py::arg("radius"),
          py::arg("k_max"), py::arg("consistency_k") = 2.5);

    py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));

    py::class_<Individual>(m, "Individual")
        .def(py::init([](std::vector<int> genes) {
                 Individual ind;
                 ind.genes = std::move(genes);
                 return ind;
             }),
             py::arg("genes"))
        .def_readwrite("genes", &Individual::genes)
        .def_readwrite("fitness", &Individual::fitness);

    py::class_<HistoryBuffer>(m, "HistoryBuffer")
        .def(py::init<size_t>(), py::arg("capacity") = 512)
        .def("record_best", &HistoryBuffer::record_best, py::arg("genes"),
             py::arg("total_reward"), py::arg("region_count"))
        .def("size", &HistoryBuffer::size);

    m.def("crossover", &crossover, py::arg("parent_a"), py::arg("parent_b"), py::arg("rng"));
    m.def("mutate", &mutate, py::arg("individual"), py::arg("p_mut"), py::arg("num_actions"),
          py::arg("rng"));
    m.def(
        "evolve",
        [](const std::vector<std::vector<int>>& genomes, const NeighborGraph& graph,
           const std::vector<double>& action_set, int iterations, double delta, double p_mut,
           std::uint64_t seed) {
            Population pop;
            for (const auto& g : genomes) pop.individuals.push_back({g, 0.0});
            Rng rng(seed);
            const EvolveResult res =
                evolve(std::move(pop), graph, action_set, iterations, delta, p_mut, rng);
            py::dict out;
            out["genes"] = res.best.genes;
            out["fitness"] = res.best.fitness;
            out["iterations"] = res.iterations;
            out["stopped_early"] = res.stopped_early;
            return out;
        },
        py::arg("population"), py::arg("graph"), py::arg("action_set"), py::arg("iterations"),
        py::arg("delta"), py::arg("p_mut"), py::arg("seed"));

    py::class_<OracleResult>(m, "OracleResult")
        .def_readonly("action_indices", &OracleResult::action_indices)
        .def_readonly("lambdas", &OracleResult::lambdas)
        .def_readonly("best_reward", &OracleResult::best_reward)
        .def_readonly("evaluations", &OracleResult::evaluations);

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("from_file", &Config::from_file, py::arg("path"))
        .def("apply", &Config::apply, py::arg("key"), py::arg("value"))
        .def("validate", &Config::validate)
        .def("to_json", &Config::to_json)
        .def_readwrite("scene", &Config::scene)
        .def_readwrite("detector", &Config::detector)
        .def_readwrite("action_set", &Config::action_set)
        .def_readwrite("seed", &Config::seed);

    m.def(
        "oracle_scales",
        [](const std::vector<ClusterRegion>& regions, const std::vector<double>& action_set,
           const DetectorModel& model, const Scene& scene, const Config& cfg) {
            return oracle_scales(regions, action_set, model, scene, cfg.rewards,
                                 {cfg.oracle_mode, cfg.oracle_cap});
        },
        py::arg("regions"), py::arg("action_set"), py::arg("model"), py::arg("scene"),
        py::arg("config"));

    py::class_<StepCounters>(m, "StepCounters")
        .def_readonly("actor_updates", &StepCounters::actor_updates)
        .def_readonly("critic_updates", &StepCounters::critic_updates)
        .def_readonly("history_insertions", &StepCounters::history_insertions);

    py::class_<RunMetrics>(m, "RunMetrics")
        .def_readonly("episode_mean_reward", &RunMetrics::episode_mean_reward)
        .def_readonly("counters", &RunMetrics::counters)
        .def_readonly("total_steps", &RunMetrics::total_steps)
        .def_readonly("wall_seconds", &RunMetrics::wall_seconds);

    py::class_<TrainedAgent>(m, "TrainedAgent")
        .def_readonly("update_count", &TrainedAgent::update_count)
        .def_readonly("action_set", &TrainedAgent::action_set);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("agent", &TrainResult::agent)
        .def_readonly("metrics", &TrainResult::metrics);

    py::class_<SceneEval>(m, "SceneEval")
        .def_readonly("scene_seed", &SceneEval::scene_seed)
        .def_readonly("region_count", &SceneEval::region_count)
        .def_readonly("oracle_reward", &SceneEval::oracle_reward)
        .def_readonly("oracle_exact", &SceneEval::oracle_exact)
        .def_readonly("lambdas", &SceneEval::lambdas);

    py::class_<EvalSummary>(m, "EvalSummary")
        .def_readonly("mean_reward", &EvalSummary::mean_reward)
        .def_readonly("oracle_mean_reward", &EvalSummary::oracle_mean_reward)
        .def_readonly("oracle_ratio", &EvalSummary::oracle_ratio)
        .def_readonly("mean_within_group_variance", &EvalSummary::mean_within_group_variance)
        .def_readonly("scenes", &EvalSummary::scenes);

    m.def(
        "train",
        [](const Config& cfg) { return train(cfg, {}, nullptr); },
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate",
        [](const Config& cfg, const TrainedAgent& agent, std::optional<bool> attention_on,
           std::optional<bool> evolution_on, std::optional<double> alpha_s) {
            EvalOptions opts;
            opts.attention_on = attention_on;
            opts.evolution_on = evolution_on;
            opts.alpha_s = alpha_s;
            return evaluate(cfg, agent.policy, opts, &agent.history);
        },
        py::arg("config"), py::arg("agent"), py::arg("attention_on") = std::nullopt,
        py::arg("evolution_on") = std::nullopt, py::arg("alpha_s") = std::nullopt,
        py::call_guard<py::gil_scoped_release>());
    m.def("figure1_histogram", &figure1_histogram, py::arg("config"), py::arg("num_scenes"),
          py::arg("seed_start"), py::call_guard<py::gil_scoped_release>());
}
