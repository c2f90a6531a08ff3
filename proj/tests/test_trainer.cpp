#include <doctest.h>

#include <stdexcept>
#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "evorl/serialize.hpp"
#include "evorl/trainer.hpp"

using namespace evorl;
namespace fs = std::filesystem;

namespace {

Config tiny_config() {
    Config cfg;
    cfg.scene.objects_min = 2;
    cfg.scene.objects_max = 4;
    cfg.feature_dim = 16;
    cfg.gate_hidden = 4;
    cfg.population = 4;
    cfg.evo_iterations = 2;
    cfg.episodes = 2;
    cfg.steps = 3;
    cfg.scenes_per_batch = 2;
    cfg.checkpoint_interval = 1;
    cfg.eval_num_scenes = 3;
    cfg.dropout = 0.0;
    cfg.momentum = 0.0;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("evorl_test_" + tag + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("smoke: a one-step run emits one metrics row") {
    Config cfg = tiny_config();
    cfg.episodes = 1;
    cfg.steps = 1;
    cfg.scenes_per_batch = 1;
    std::ostringstream metrics;
    TrainSinks sinks;
    sinks.metrics = &metrics;
    const TrainResult result = train(cfg, sinks);

    CHECK(result.metrics.total_steps == 1);
    CHECK(result.metrics.counters.actor_updates == 1);
    CHECK(result.metrics.counters.critic_updates == 1);
    CHECK(result.metrics.counters.history_insertions == 1);
    std::istringstream lines(metrics.str());
    std::string header, row, extra;
    CHECK(std::getline(lines, header));
    CHECK(header == "episode,step,r_l,r_c,r_s,R");
    CHECK(std::getline(lines, row));
    CHECK(row.substr(0, 4) == "1,1,");
    CHECK_FALSE(std::getline(lines, extra));
}

TEST_CASE("training loop fidelity: one update pair and one insertion per step") {
    Config cfg = tiny_config();
    const TrainResult result = train(cfg);
    const long steps = static_cast<long>(cfg.episodes) * cfg.steps;
    CHECK(result.metrics.total_steps == steps);
    CHECK(result.metrics.counters.actor_updates == steps);
    CHECK(result.metrics.counters.critic_updates == steps);
    CHECK(result.metrics.counters.history_insertions == steps);
    CHECK(result.metrics.counters.max_evolution_iterations <= cfg.evo_iterations);
    CHECK(result.agent.history.size() == static_cast<size_t>(steps));
}

TEST_CASE("fixed seeds reproduce byte-identical metrics") {
    Config cfg = tiny_config();
    auto run = [&] {
        std::ostringstream metrics, evo;
        TrainSinks sinks;
        sinks.metrics = &metrics;
        sinks.evolution_trace = &evo;
        train(cfg, sinks);
        return metrics.str() + "|" + evo.str();
    };
    CHECK(run() == run());

    // Noisy detection is still seed-determined.
    Config noisy = tiny_config();
    noisy.detector.noise_sd = 0.05;
    auto run_noisy = [&] {
        std::ostringstream metrics;
        TrainSinks sinks;
        sinks.metrics = &metrics;
        train(noisy, sinks);
        return metrics.str();
    };
    CHECK(run_noisy() == run_noisy());
}

TEST_CASE("the evolution trace logs generations within the iteration budget") {
    Config cfg = tiny_config();
    std::ostringstream evo;
    TrainSinks sinks;
    sinks.evolution_trace = &evo;
    train(cfg, sinks);

    std::istringstream lines(evo.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "episode,step,generation,best_rs,mean_rs");
    int rows = 0;
    while (std::getline(lines, line)) {
        int episode = 0, step = 0, generation = 0;
        double best = 0.0, mean = 0.0;
        char comma = 0;
        std::istringstream row(line);
        row >> episode >> comma >> step >> comma >> generation >> comma >> best >> comma >> mean;
        CHECK(generation >= 1);
        CHECK(generation <= cfg.evo_iterations);
        CHECK(best >= mean - 1e-12);
        ++rows;
    }
    CHECK(rows >= cfg.episodes * cfg.steps);  // at least one generation per step
}

TEST_CASE("resume from a checkpoint reproduces the straight run bit-for-bit") {
    Config cfg = tiny_config();
    cfg.episodes = 4;

    std::ostringstream metrics_straight;
    TrainSinks straight_sinks;
    straight_sinks.metrics = &metrics_straight;
    const TrainResult straight = train(cfg, straight_sinks);

    TempDir dir("resume");
    Config first_half = cfg;
    first_half.episodes = 2;
    std::ostringstream metrics_a;
    TrainSinks sinks_a;
    sinks_a.metrics = &metrics_a;
    sinks_a.checkpoint_dir = dir.path.string();
    train(first_half, sinks_a);

    const Checkpoint ckpt = load_checkpoint((dir.path / "latest.json").string());
    CHECK(ckpt.episode == 2);
    std::ostringstream metrics_b;
    TrainSinks sinks_b;
    sinks_b.metrics = &metrics_b;
    const TrainResult resumed = train(cfg, sinks_b, &ckpt);

    // Straight metrics = first-half metrics + resumed metrics (minus the
    // resumed run's duplicate header).
    std::string resumed_rows = metrics_b.str();
    resumed_rows.erase(0, resumed_rows.find('\n') + 1);
    CHECK(metrics_a.str() + resumed_rows == metrics_straight.str());

    const auto av = straight.agent.policy.param_list();
    const auto bv = resumed.agent.policy.param_list();
    for (size_t k = 0; k < av.size(); ++k)
        for (size_t i = 0; i < av[k]->data.size(); ++i)
            CHECK(av[k]->data[i] == bv[k]->data[i]);
    CHECK(straight.agent.update_count == resumed.agent.update_count);

    Config wrong_actions = cfg;
    wrong_actions.action_set = {1.0, 2.0};
    CHECK_THROWS_AS(train(wrong_actions, {}, &ckpt), ConfigError);
}

TEST_CASE("checkpoint JSON round-trips parameters exactly") {
    Config cfg = tiny_config();
    TempDir dir("ckpt");
    TrainSinks sinks;
    sinks.checkpoint_dir = dir.path.string();
    const TrainResult result = train(cfg, sinks);

    const Checkpoint ckpt = load_checkpoint((dir.path / "latest.json").string());
    const auto expect = result.agent.policy.param_list();
    const auto got = ckpt.policy.param_list();
    for (size_t k = 0; k < expect.size(); ++k)
        CHECK(got[k]->data == expect[k]->data);
    CHECK(ckpt.history.size() == result.agent.history.size());
    CHECK(ckpt.action_set == cfg.action_set);

    // Re-serialization is byte-stable.
    CHECK(checkpoint_to_json(ckpt) ==
          checkpoint_to_json(checkpoint_from_json(checkpoint_to_json(ckpt))));
}

TEST_CASE("evaluation is deterministic and honors ablation switches") {
    Config cfg = tiny_config();
    const TrainResult result = train(cfg);

    const EvalSummary a = evaluate(cfg, result.agent.policy, {}, &result.agent.history);
    const EvalSummary b = evaluate(cfg, result.agent.policy, {}, &result.agent.history);
    CHECK(a.mean_reward == b.mean_reward);
    CHECK(a.scenes.size() == static_cast<size_t>(cfg.eval_num_scenes));
    for (size_t i = 0; i < a.scenes.size(); ++i)
        CHECK(a.scenes[i].lambdas == b.scenes[i].lambdas);

    EvalOptions no_evo;
    no_evo.evolution_on = false;
    const EvalSummary c = evaluate(cfg, result.agent.policy, no_evo);
    CHECK_FALSE(c.evolution_on);

    EvalOptions alpha0;
    alpha0.alpha_s = 0.0;
    const EvalSummary d = evaluate(cfg, result.agent.policy, alpha0);
    CHECK(d.alpha_s == 0.0);

    EvalOptions no_att;
    no_att.attention_on = false;
    const EvalSummary e = evaluate(cfg, result.agent.policy, no_att);
    CHECK_FALSE(e.attention_on);
}

TEST_CASE("single-region evaluation oracle equals the detection sweep argmax") {
    Config cfg = tiny_config();
    cfg.scene.objects_min = cfg.scene.objects_max = 1;
    cfg.eval_num_scenes = 4;
    const TrainResult result = train(cfg);
    const EvalSummary summary = evaluate(cfg, result.agent.policy);

    const DetectorModel model = cfg.resolved_detector();
    for (const auto& scene_eval : summary.scenes) {
        REQUIRE(scene_eval.region_count == 1);
        REQUIRE(scene_eval.oracle_exact);
        const Scene scene = generate_scene(cfg.scene, scene_eval.scene_seed);
        const auto regions = make_regions(scene, cfg.regions);
        double best = -1.0;
        for (double lam : cfg.action_set) {
            const auto out = simulate_detection(regions[0], lam, model, scene);
            best = std::max(best, total_reward(localization_reward({out}),
                                               labeling_reward({out}), 1.0,
                                               cfg.rewards.weights));
        }
        CHECK(scene_eval.oracle_reward == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("figure1 histogram orders modal scales by size band") {
    Config cfg;
    const auto counts = figure1_histogram(cfg, 300, 5000);
    REQUIRE(counts.size() == 4);
    for (const auto& row : counts) REQUIRE(row.size() == cfg.action_set.size());

    auto modal = [&](int band) {
        int best = 0;
        for (size_t a = 1; a < counts[band].size(); ++a)
            if (counts[band][a] > counts[band][best]) best = static_cast<int>(a);
        return cfg.action_set[best];
    };
    CHECK(modal(0) > modal(3));

    const std::string csv = histogram_to_csv(counts, cfg.action_set);
    CHECK(csv.substr(0, 4) == "band");
    CHECK(csv.find("ultra_small") != std::string::npos);
    CHECK(histogram_to_csv(figure1_histogram(cfg, 300, 5000), cfg.action_set) == csv);
}

TEST_CASE("ppo mode batches updates per episode") {
    Config cfg = tiny_config();
    cfg.agent_mode = AgentMode::kPpoClip;
    const TrainResult result = train(cfg);
    CHECK(result.metrics.counters.actor_updates == cfg.episodes);
    CHECK(result.metrics.counters.critic_updates == cfg.episodes);
    CHECK(result.metrics.counters.history_insertions ==
          static_cast<long>(cfg.episodes) * cfg.steps);
}
