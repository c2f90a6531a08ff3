#include "evorl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>

#include "evorl/serialize.hpp"

namespace evorl {

namespace {

// Stream tags for deriving per-step RNG seeds from the master seed.
constexpr std::uint64_t kSceneStream = 0xA1;
constexpr std::uint64_t kSampleStream = 0xB2;
constexpr std::uint64_t kDropoutStream = 0xC3;
constexpr std::uint64_t kEvolveStream = 0xD4;
constexpr std::uint64_t kNoiseStream = 0xE5;
constexpr std::uint64_t kInitStream = 0xF6;
constexpr std::uint64_t kEvalStream = 0x77;

struct StepContext {
    Scene scene;
    std::vector<ClusterRegion> regions;
    Tensor2 features;
    Tensor2 affinity;
    NeighborGraph graph;
};

StepContext build_step_context(const Config& cfg, const FeatureEncoder& encoder,
                               std::uint64_t scene_seed) {
    StepContext ctx;
    ctx.scene = generate_scene(cfg.scene, scene_seed);
    ctx.regions = make_regions(ctx.scene, cfg.regions);
    ctx.features = encoder.encode(ctx.regions, ctx.scene);
    ctx.affinity = spatial_affinity(ctx.regions);
    ctx.graph = build_neighbor_graph(ctx.regions, cfg.rewards.neighbor_radius,
                                     cfg.rewards.neighbor_k_max, cfg.consistency_k());
    return ctx;
}

double critic_value(const CriticParams& critic, const Tensor2& pooled) {
    Graph g;
    const CriticForward f = critic_forward(g, critic, pooled);
    return g.value(f.value).at(0, 0);
}

std::vector<DetectionOutcome> run_detection(const StepContext& ctx,
                                            const std::vector<double>& lambdas,
                                            const DetectorModel& model,
                                            std::uint64_t noise_seed) {
    std::vector<DetectionOutcome> outcomes;
    outcomes.reserve(ctx.regions.size());
    for (size_t i = 0; i < ctx.regions.size(); ++i)
        outcomes.push_back(
            simulate_detection(ctx.regions[i], lambdas[i], model, ctx.scene, noise_seed));
    return outcomes;
}

void write_metrics_header(std::ostream* os) {
    if (os != nullptr && os->tellp() <= 0) *os << "episode,step,r_l,r_c,r_s,R\n";
}

void write_evolution_header(std::ostream* os) {
    if (os != nullptr && os->tellp() <= 0) *os << "episode,step,generation,best_rs,mean_rs\n";
}

}  // namespace

TrainResult train(const Config& cfg, const TrainSinks& sinks, const Checkpoint* resume_from) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const DetectorModel detector = cfg.resolved_detector();
    const FeatureEncoder encoder(cfg.feature_dim, cfg.scene.categories, cfg.encoder_seed);
    const int num_actions = static_cast<int>(cfg.action_set.size());

    AgentOptions agent_options;
    agent_options.mode = cfg.agent_mode;
    agent_options.attention_on = cfg.attention_on;
    agent_options.fusion = cfg.fusion;
    agent_options.clip_ratio = cfg.clip_ratio;
    agent_options.ppo_epochs = cfg.ppo_epochs;
    agent_options.entropy_beta = cfg.entropy_beta;
    agent_options.grad_clip = cfg.grad_clip;

    TrainResult result;
    TrainedAgent& agent = result.agent;
    agent.action_set = cfg.action_set;
    agent.history = HistoryBuffer(cfg.history_capacity);

    SgdMomentum actor_opt(cfg.momentum, cfg.weight_decay);
    SgdMomentum critic_opt(cfg.momentum, cfg.weight_decay);
    int start_episode = 1;

    if (resume_from != nullptr) {
        if (resume_from->action_set != cfg.action_set)
            throw ConfigError("resume: checkpoint action set differs from config");
        agent.policy = resume_from->policy;
        agent.critic = resume_from->critic;
        agent.update_count = resume_from->update_count;
        actor_opt.set_velocities(resume_from->actor_velocity);
        critic_opt.set_velocities(resume_from->critic_velocity);
        for (const auto& h : resume_from->history)
            agent.history.record_best(h.genes, h.total_reward, h.region_count);
        start_episode = resume_from->episode + 1;
    } else {
        Rng init_rng(mix_seed(cfg.seed, kInitStream));
        agent.policy = PolicyParams::init(cfg.feature_dim, cfg.gate_hidden, num_actions, init_rng);
        agent.critic = CriticParams::init(cfg.feature_dim, cfg.gate_hidden, init_rng);
    }

    // Eq.-style mode updates once per step; the clipped-surrogate mode
    // batches the episode's trajectory into one update round.
    const bool episode_batched = cfg.agent_mode == AgentMode::kPpoClip;
    const CosineSchedule schedule{
        cfg.learning_rate,
        episode_batched ? static_cast<long>(cfg.episodes)
                        : static_cast<long>(cfg.episodes) * cfg.steps};

    write_metrics_header(sinks.metrics);
    if (sinks.evolution_trace != nullptr) write_evolution_header(sinks.evolution_trace);
    if (!sinks.checkpoint_dir.empty())
        std::filesystem::create_directories(sinks.checkpoint_dir);

    auto make_checkpoint = [&](int episode) {
        Checkpoint ckpt;
        ckpt.episode = episode;
        ckpt.update_count = agent.update_count;
        ckpt.master_seed = cfg.seed;
        ckpt.action_set = cfg.action_set;
        ckpt.policy = agent.policy;
        ckpt.critic = agent.critic;
        ckpt.actor_velocity = actor_opt.velocities();
        ckpt.critic_velocity = critic_opt.velocities();
        ckpt.history.assign(agent.history.entries().begin(), agent.history.entries().end());
        ckpt.config_json = cfg.to_json();
        return ckpt;
    };
    auto save_at = [&](int episode, const std::string& name) {
        if (sinks.checkpoint_dir.empty()) return;
        save_checkpoint(make_checkpoint(episode),
                        (std::filesystem::path(sinks.checkpoint_dir) / name).string());
    };

    for (int episode = start_episode; episode <= cfg.episodes; ++episode) {
        double episode_reward = 0.0;

        // The episode's scene batch; step t uses scene (t-1) mod M.
        std::vector<std::uint64_t> batch_seeds(cfg.scenes_per_batch);
        for (int m = 0; m < cfg.scenes_per_batch; ++m)
            batch_seeds[m] = mix_seed(cfg.seed, kSceneStream, episode, m);

        // Lookahead context for the bootstrapped next-state value.
        StepContext ctx = build_step_context(cfg, encoder, batch_seeds[0]);

        Trajectory episode_traj;
        episode_traj.gamma = cfg.gamma;

        try {
            for (int step = 1; step <= cfg.steps; ++step) {
                Rng sample_rng(mix_seed(cfg.seed, kSampleStream, episode, step));
                Rng dropout_rng(mix_seed(cfg.seed, kDropoutStream, episode, step));
                Rng evolve_rng(mix_seed(cfg.seed, kEvolveStream, episode, step));
                const std::uint64_t noise_seed = mix_seed(cfg.seed, kNoiseStream, episode, step);

                const int n = static_cast<int>(ctx.regions.size());
                TrajectoryStep traj_step;
                traj_step.features = ctx.features;
                traj_step.affinity = ctx.affinity;
                if (cfg.dropout > 0.0) {
                    traj_step.dropout_mask =
                        make_dropout_mask(n, cfg.feature_dim, cfg.dropout, dropout_rng);
                    traj_step.critic_dropout_mask =
                        make_dropout_mask(1, cfg.feature_dim, cfg.dropout, dropout_rng);
                }

                // Actor proposal.
                Graph g;
                const Tensor2* mask =
                    traj_step.dropout_mask.size() > 0 ? &traj_step.dropout_mask : nullptr;
                const PolicyForward pf = policy_forward(g, agent.policy, ctx.features,
                                                        ctx.affinity, agent_options, mask);
                const Tensor2 logp = g.value(pf.logp);
                const ActionSample proposal = sample_actions(logp, sample_rng);
                traj_step.pooled = mean_rows(g.value(pf.attended));
                traj_step.value = critic_value(agent.critic, traj_step.pooled);

                // Evolutionary refinement of the proposal, seeded from the
                // history archive; fitness is the scale-consistency reward.
                std::vector<int> applied = proposal.actions;
                if (cfg.evolution_on) {
                    const RewardEvaluator reward_eval = [&](const std::vector<int>& genes) {
                        std::vector<double> ls;
                        ls.reserve(genes.size());
                        for (int a : genes) ls.push_back(cfg.action_set[a]);
                        const auto outs = run_detection(ctx, ls, detector, noise_seed);
                        return reward_vector(outs, ls, ctx.graph, cfg.rewards.weights).total;
                    };
                    Population pop = init_population(proposal.actions, agent.history,
                                                     cfg.population, num_actions, cfg.p_mut,
                                                     evolve_rng);
                    const EvolveResult evo =
                        evolve(std::move(pop), ctx.graph, cfg.action_set, cfg.evo_iterations,
                               cfg.delta, cfg.p_mut, evolve_rng, &logp, &reward_eval);
                    applied = evo.best.genes;
                    result.metrics.counters.max_evolution_iterations =
                        std::max(result.metrics.counters.max_evolution_iterations,
                                 evo.iterations);
                    if (sinks.evolution_trace != nullptr) {
                        for (const auto& gen : evo.trace) {
                            *sinks.evolution_trace
                                << episode << ',' << step << ',' << gen.generation << ','
                                << format_double(gen.best_fitness) << ','
                                << format_double(gen.mean_fitness) << '\n';
                        }
                    }
                }

                // Environment evaluation of the applied scales.
                std::vector<double> lambdas;
                lambdas.reserve(applied.size());
                for (int a : applied) lambdas.push_back(cfg.action_set[a]);
                const auto outcomes = run_detection(ctx, lambdas, detector, noise_seed);
                const RewardVector reward =
                    reward_vector(outcomes, lambdas, ctx.graph, cfg.rewards.weights);
                agent.history.record_best(applied, reward.total, n);
                ++result.metrics.counters.history_insertions;

                // The applied assignment is the executed action: the update
                // reinforces it, which also distills the refinement back
                // into the policy.
                traj_step.actions = applied;
                traj_step.logp_chosen.reserve(applied.size());
                for (size_t i = 0; i < applied.size(); ++i)
                    traj_step.logp_chosen.push_back(
                        logp.at(static_cast<int>(i), applied[i]));
                traj_step.reward = reward.total;

                // Bootstrapped next-state value from the next scene in the
                // batch; terminal steps use 0.
                if (step < cfg.steps) {
                    ctx = build_step_context(cfg, encoder,
                                             batch_seeds[step % cfg.scenes_per_batch]);
                    Graph g_next;
                    const PolicyForward pf_next =
                        policy_forward(g_next, agent.policy, ctx.features, ctx.affinity,
                                       agent_options, nullptr);
                    traj_step.next_value =
                        critic_value(agent.critic, mean_rows(g_next.value(pf_next.attended)));
                } else {
                    traj_step.next_value = 0.0;
                }

                if (episode_batched) {
                    episode_traj.steps.push_back(std::move(traj_step));
                } else {
                    Trajectory traj;
                    traj.gamma = cfg.gamma;
                    traj.steps.push_back(std::move(traj_step));

                    const double lr = schedule.lr(agent.update_count);
                    actor_update(traj, agent.policy, actor_opt, lr, agent_options);
                    ++result.metrics.counters.actor_updates;
                    critic_update(traj, agent.critic, critic_opt, lr, cfg.grad_clip);
                    ++result.metrics.counters.critic_updates;
                    ++agent.update_count;
                }

                if (sinks.metrics != nullptr) {
                    *sinks.metrics << episode << ',' << step << ','
                                   << format_double(reward.r_l) << ','
                                   << format_double(reward.r_c) << ','
                                   << format_double(reward.r_s) << ','
                                   << format_double(reward.total) << '\n';
                }
                episode_reward += reward.total;
                ++result.metrics.total_steps;
            }

            if (episode_batched) {
                const double lr = schedule.lr(agent.update_count);
                actor_update(episode_traj, agent.policy, actor_opt, lr, agent_options);
                ++result.metrics.counters.actor_updates;
                // The critic loss sums over the trajectory; scale to a
                // per-sample learning rate for the batched round.
                critic_update(episode_traj, agent.critic, critic_opt,
                              lr / episode_traj.steps.size(), cfg.grad_clip);
                ++result.metrics.counters.critic_updates;
                ++agent.update_count;
            }
        } catch (const std::runtime_error& e) {
            save_at(episode - 1, "diagnostic.json");
            throw std::runtime_error("train: aborted in episode " + std::to_string(episode) +
                                     ": " + e.what());
        }

        result.metrics.episode_mean_reward.push_back(episode_reward / cfg.steps);
        if (episode % cfg.checkpoint_interval == 0) {
            save_at(episode, "ckpt_ep" + std::to_string(episode) + ".json");
            save_at(episode, "latest.json");
        }
    }

    save_at(cfg.episodes, "latest.json");
    result.metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

EvalSummary evaluate(const Config& cfg, const PolicyParams& policy, const EvalOptions& opts,
                     const HistoryBuffer* history) {
    Config eval_cfg = cfg;
    eval_cfg.detector.noise_sd = 0.0;
    if (opts.attention_on) eval_cfg.attention_on = *opts.attention_on;
    if (opts.evolution_on) eval_cfg.evolution_on = *opts.evolution_on;
    if (opts.alpha_s) eval_cfg.rewards.weights.alpha_s = *opts.alpha_s;
    eval_cfg.validate();

    const DetectorModel detector = eval_cfg.resolved_detector();
    const FeatureEncoder encoder(eval_cfg.feature_dim, eval_cfg.scene.categories,
                                 eval_cfg.encoder_seed);
    const int num_actions = static_cast<int>(eval_cfg.action_set.size());

    AgentOptions agent_options;
    agent_options.mode = eval_cfg.agent_mode;
    agent_options.attention_on = eval_cfg.attention_on;
    agent_options.fusion = eval_cfg.fusion;

    EvalSummary summary;
    summary.attention_on = eval_cfg.attention_on;
    summary.evolution_on = eval_cfg.evolution_on;
    summary.alpha_s = eval_cfg.rewards.weights.alpha_s;

    double reward_sum = 0.0;
    double oracle_sum = 0.0;
    int oracle_count = 0;
    double variance_sum = 0.0;

    for (int i = 0; i < eval_cfg.eval_num_scenes; ++i) {
        const std::uint64_t scene_seed = eval_cfg.eval_seed_start + i;
        const StepContext ctx = build_step_context(eval_cfg, encoder, scene_seed);
        const int n = static_cast<int>(ctx.regions.size());

        Graph g;
        const PolicyForward pf =
            policy_forward(g, policy, ctx.features, ctx.affinity, agent_options, nullptr);
        const Tensor2 logp = g.value(pf.logp);
        const ActionSample proposal = argmax_actions(logp);

        std::vector<int> applied = proposal.actions;
        if (eval_cfg.evolution_on) {
            const RewardEvaluator reward_eval = [&](const std::vector<int>& genes) {
                std::vector<double> ls;
                ls.reserve(genes.size());
                for (int a : genes) ls.push_back(eval_cfg.action_set[a]);
                const auto outs = run_detection(ctx, ls, detector, 0);
                return reward_vector(outs, ls, ctx.graph, eval_cfg.rewards.weights).total;
            };
            // The archive is read-only here: scenes cannot leak into each
            // other through it, so per-scene results stay order-independent.
            const HistoryBuffer empty(eval_cfg.history_capacity);
            const HistoryBuffer& archive = history != nullptr ? *history : empty;
            Rng evolve_rng(mix_seed(kEvalStream, scene_seed));
            Population pop = init_population(proposal.actions, archive, eval_cfg.population,
                                             num_actions, eval_cfg.p_mut, evolve_rng);
            const EvolveResult evo =
                evolve(std::move(pop), ctx.graph, eval_cfg.action_set, eval_cfg.evo_iterations,
                       eval_cfg.delta, eval_cfg.p_mut, evolve_rng, &logp, &reward_eval);
            applied = evo.best.genes;
        }

        SceneEval scene_eval;
        scene_eval.scene_seed = scene_seed;
        scene_eval.region_count = n;
        scene_eval.lambdas.reserve(n);
        for (int a : applied) scene_eval.lambdas.push_back(eval_cfg.action_set[a]);
        for (const auto& region : ctx.regions)
            scene_eval.region_bands.push_back(eval_cfg.scene.band_of(region.mean_px_size));

        const auto outcomes = run_detection(ctx, scene_eval.lambdas, detector, 0);
        scene_eval.reward = reward_vector(outcomes, scene_eval.lambdas, ctx.graph,
                                          eval_cfg.rewards.weights);
        reward_sum += scene_eval.reward.total;

        // Exhaustive oracle when the assignment space fits under the cap.
        double space = 1.0;
        for (int r = 0; r < n; ++r) space *= num_actions;
        if (space <= static_cast<double>(eval_cfg.oracle_cap)) {
            OracleOptions oracle_opts;
            oracle_opts.mode = OracleMode::kExhaustive;
            oracle_opts.exhaustive_cap = eval_cfg.oracle_cap;
            const OracleResult oracle =
                oracle_scales(ctx.regions, eval_cfg.action_set, detector, ctx.scene,
                              eval_cfg.rewards, oracle_opts);
            scene_eval.oracle_reward = oracle.best_reward;
            scene_eval.oracle_exact = true;
            oracle_sum += oracle.best_reward;
            ++oracle_count;
        }

        // Within-group lambda variance over neighbor-graph components.
        std::vector<int> component(n, -1);
        int num_components = 0;
        double scene_variance = 0.0;
        int groups = 0;
        for (int start = 0; start < n; ++start) {
            if (component[start] != -1) continue;
            std::vector<int> stack{start};
            std::vector<int> members;
            component[start] = num_components;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                members.push_back(cur);
                for (int nb : ctx.graph.neighbors[cur]) {
                    if (component[nb] == -1) {
                        component[nb] = num_components;
                        stack.push_back(nb);
                    }
                }
            }
            ++num_components;
            if (members.size() >= 2) {
                double mean = 0.0;
                for (int m : members) mean += scene_eval.lambdas[m];
                mean /= members.size();
                double var = 0.0;
                for (int m : members) {
                    const double d = scene_eval.lambdas[m] - mean;
                    var += d * d;
                }
                scene_variance += var / members.size();
                ++groups;
            }
        }
        if (groups > 0) {
            scene_eval.within_group_variance = scene_variance / groups;
            variance_sum += scene_eval.within_group_variance;
            ++summary.scenes_with_groups;
        } else {
            scene_eval.within_group_variance = -1.0;
        }

        summary.scenes.push_back(std::move(scene_eval));
    }

    summary.mean_reward = reward_sum / eval_cfg.eval_num_scenes;
    if (oracle_count > 0) {
        summary.oracle_mean_reward = oracle_sum / oracle_count;
        double comparable_sum = 0.0;
        for (const auto& s : summary.scenes)
            if (s.oracle_exact) comparable_sum += s.reward.total;
        summary.oracle_ratio = comparable_sum / oracle_sum;
    }
    if (summary.scenes_with_groups > 0)
        summary.mean_within_group_variance = variance_sum / summary.scenes_with_groups;
    return summary;
}

std::vector<std::vector<long>> figure1_histogram(const Config& cfg, int num_scenes,
                                                 std::uint64_t seed_start) {
    Config single = cfg;
    single.scene.objects_min = 1;
    single.scene.objects_max = 1;
    single.detector.noise_sd = 0.0;
    single.validate();

    const DetectorModel detector = single.resolved_detector();
    const int bands = single.scene.num_bands();
    const int num_actions = static_cast<int>(single.action_set.size());
    std::vector<std::vector<long>> counts(bands, std::vector<long>(num_actions, 0));

    for (int i = 0; i < num_scenes; ++i) {
        const Scene scene = generate_scene(single.scene, seed_start + i);
        const auto regions = make_regions(scene, single.regions);
        OracleOptions opts;
        opts.mode = OracleMode::kExhaustive;
        opts.exhaustive_cap = single.oracle_cap;
        const OracleResult oracle =
            oracle_scales(regions, single.action_set, detector, scene, single.rewards, opts);
        const int band = single.scene.band_of(scene.objects.front().px_size);
        counts[band][oracle.action_indices.front()] += 1;
    }
    return counts;
}

std::string histogram_to_csv(const std::vector<std::vector<long>>& counts,
                             const std::vector<double>& action_set) {
    std::string csv = "band";
    for (double a : action_set) csv += ",lambda_" + format_double(a);
    csv += "\n";
    static const char* kBandNames[] = {"ultra_small", "small", "medium", "large"};
    for (size_t b = 0; b < counts.size(); ++b) {
        csv += b < 4 ? kBandNames[b] : ("band_" + std::to_string(b));
        for (long c : counts[b]) csv += "," + std::to_string(c);
        csv += "\n";
    }
    return csv;
}

}  // namespace evorl
