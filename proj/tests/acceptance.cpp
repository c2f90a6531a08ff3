// Benchmark acceptance suite: one PASS/FAIL line per criterion, exit code =
// number of failures. Training-based criteria share one set of seeded runs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evorl/agent.hpp"
#include "evorl/config.hpp"
#include "evorl/gradcheck.hpp"
#include "evorl/rewards.hpp"
#include "evorl/serialize.hpp"
#include "evorl/trainer.hpp"
#include "oracles.hpp"

using namespace evorl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) { return format_double(v); }

Config bench_config(std::uint64_t seed) {
    Config cfg = Config::from_file(std::string(EVORL_CONFIG_DIR) + "/bench.toml");
    cfg.seed = seed;
    return cfg;
}

int run_cli(const std::string& args, const fs::path& log_dir) {
    fs::create_directories(log_dir);
    const std::string cmd = std::string("\"") + EVORL_CLI_PATH + "\" " + args + " > " +
                            (log_dir / "out.txt").string() + " 2> " +
                            (log_dir / "err.txt").string();
    return WEXITSTATUS(std::system(cmd.c_str()));
}

// ---------------------------------------------------------------- 1: rewards

void criterion_1() {
    bool pass = true;
    std::string detail;

    NeighborGraph pair;
    pair.consistency_k = 2.5;
    pair.neighbors = {{1}, {0}};
    pass &= scale_consistency_reward({1.75, 1.75}, pair) == 1.0;

    const double rs = scale_consistency_reward({0.5, 3.0}, pair);  // gap == K
    pass &= std::fabs(rs - std::exp(-1.0)) <= 1e-12;

    RewardWeights w;
    w.alpha_l = 2.0;
    w.alpha_c = 0.7;
    w.alpha_s = 0.25;
    const double base = total_reward(0.3, 0.5, 0.9, w);
    pass &= std::fabs((total_reward(0.4, 0.5, 0.9, w) - base) - 0.1 * w.alpha_l) <= 1e-12;
    pass &= std::fabs((total_reward(0.3, 0.6, 0.9, w) - base) - 0.1 * w.alpha_c) <= 1e-12;
    pass &= std::fabs((total_reward(0.3, 0.5, 1.0, w) - base) - 0.1 * w.alpha_s) <= 1e-12;

    report(1, pass, "reward exactness: all-equal r_s == 1, gap-K fixture == e^-1 +- 1e-12 (got " +
                        fmt(rs) + "), slopes equal weights");
}

// -------------------------------------------------------------- 2: attention

void criterion_2() {
    Rng rng(20240001);
    double worst = 0.0;
    double worst_row_sum_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(1, 6);
        const int d = rng.uniform_int(8, 16);
        const Tensor2 x = Tensor2::randn(n, d, 1.2, rng);
        Tensor2 s(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                s.at(i, j) = 1.0 / std::max(1.0, std::fabs(i - j) * rng.uniform(1.0, 60.0));
        const AttentionParams params = AttentionParams::init(d, rng);
        const AttentionState state = attention_forward(x, s, params);
        const Tensor2 expected =
            test_oracles::naive_attention(x, s, params.wq, params.wk, params.wv);
        worst = std::max(worst, test_oracles::max_abs_diff(state.output, expected));
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) sum += state.weights.at(i, j);
            worst_row_sum_err = std::max(worst_row_sum_err, std::fabs(sum - 1.0));
        }
    }
    const bool pass = worst < 1e-12 && worst_row_sum_err < 1e-9;
    report(2, pass, "attention matches the naive oracle on 200 instances (max |diff| " +
                        fmt(worst) + "), rows sum to 1 (max err " + fmt(worst_row_sum_err) + ")");
}

// -------------------------------------------------------------- 3: gradients

Trajectory random_policy_trajectory(Rng& rng, const PolicyParams& params,
                                    const AgentOptions& options, int steps) {
    Trajectory traj;
    traj.gamma = 0.9;
    const int n = rng.uniform_int(2, 4);
    const int d = params.gate.w1.rows;
    const int num_actions = params.head_w.cols;
    for (int t = 0; t < steps; ++t) {
        TrajectoryStep step;
        step.features = Tensor2::randn(n, d, 1.0, rng);
        step.affinity = Tensor2(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                step.affinity.at(i, j) = 1.0 / (1.0 + std::fabs(i - j) * rng.uniform(0.5, 20.0));
        for (int i = 0; i < n; ++i) step.actions.push_back(rng.uniform_int(0, num_actions - 1));
        step.reward = rng.uniform(0.0, 3.0);
        step.value = rng.uniform(0.0, 2.0);
        step.next_value = rng.uniform(0.0, 2.0);
        Graph g;
        const PolicyForward f =
            policy_forward(g, params, step.features, step.affinity, options);
        for (int i = 0; i < n; ++i)
            step.logp_chosen.push_back(g.value(f.logp).at(i, step.actions[i]));
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

double max_fd_error_actor(std::uint64_t seed, bool attention_on) {
    Rng rng(seed);
    PolicyParams params = PolicyParams::init(8, 4, 4, rng);
    AgentOptions options;
    options.attention_on = attention_on;
    const Trajectory traj = random_policy_trajectory(rng, params, options, 2);
    double loss = 0.0;
    const std::vector<Tensor2> analytic = actor_loss_gradients(traj, params, options, &loss);
    return finite_diff_check(
               [&] {
                   double l = 0.0;
                   actor_loss_gradients(traj, params, options, &l);
                   return l;
               },
               params.param_list(), analytic, 1e-5)
        .max_rel_err;
}

double max_fd_error_critic(std::uint64_t seed) {
    Rng rng(seed);
    CriticParams params = CriticParams::init(8, 4, rng);
    Trajectory traj;
    traj.gamma = 0.9;
    for (int t = 0; t < 3; ++t) {
        TrajectoryStep step;
        step.pooled = Tensor2::randn(1, 8, 1.0, rng);
        step.reward = rng.uniform(0.0, 3.0);
        traj.steps.push_back(std::move(step));
    }
    double loss = 0.0;
    const std::vector<Tensor2> analytic = critic_loss_gradients(traj, params, &loss);
    return finite_diff_check(
               [&] {
                   double l = 0.0;
                   critic_loss_gradients(traj, params, &l);
                   return l;
               },
               params.param_list(), analytic, 1e-5)
        .max_rel_err;
}

void criterion_3() {
    double worst_actor = 0.0, worst_critic = 0.0, worst_full = 0.0;
    for (int i = 0; i < 50; ++i) {
        worst_actor = std::max(worst_actor, max_fd_error_actor(3000 + i, false));
        worst_critic = std::max(worst_critic, max_fd_error_critic(3100 + i));
        worst_full = std::max(worst_full, max_fd_error_actor(3200 + i, true));
    }
    const bool pass = worst_actor < 1e-4 && worst_critic < 1e-4 && worst_full < 1e-4;
    report(3, pass, "finite-difference gradient checks, 50 instances each: actor " +
                        fmt(worst_actor) + ", critic " + fmt(worst_critic) +
                        ", attention-through-policy " + fmt(worst_full) + " (< 1e-4)");
}

// -------------------------------------------------------------- 4: evolution

void criterion_4() {
    const std::vector<double> actions = {1.0, 2.0};
    NeighborGraph graph;
    graph.consistency_k = 0.2;
    graph.neighbors = {{1, 2}, {0, 2}, {0, 1}};

    // Exhaustive maximum over the reachable genome space (both gene values
    // are one mutation step apart, so the full 2^3 space is reachable).
    double brute = -1.0;
    for (int mask = 0; mask < 8; ++mask) {
        Individual ind;
        ind.genes = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        brute = std::max(brute, scale_consistency_reward(ind.lambdas(actions), graph));
    }

    bool monotone = true, stop_iff = true, matches = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(mix_seed(44100, seed));
        Population pop = init_population({0, 1, 0}, HistoryBuffer(4), 4, 2, 0.5, rng);
        const EvolveResult res = evolve(pop, graph, actions, 10, 0.5, 0.5, rng);
        for (size_t g = 1; g < res.trace.size(); ++g)
            monotone &= res.trace[g].best_fitness >= res.trace[g - 1].best_fitness;
        stop_iff &= res.stopped_early == (res.best.fitness >= 0.5);
        matches &= res.best.fitness == brute;
    }
    report(4, monotone && stop_iff && matches,
           std::string("evolution fixture over 100 seeded runs: monotone best ") +
               (monotone ? "yes" : "NO") + ", stop iff r_s >= 0.5 " + (stop_iff ? "yes" : "NO") +
               ", final best equals the exhaustive max " + (matches ? "yes" : "NO"));
}

// ------------------------------------------------- 5/6/7: trained variants

struct VariantResult {
    double mean_reward = 0.0;
    double oracle_ratio = 0.0;
    double oracle_mean = 0.0;
    double within_group_variance = 0.0;
    double early_training_reward = 0.0;  // mean of first 50 episodes
    double late_training_reward = 0.0;   // mean of last 50 episodes
};

enum class Variant { kFull, kNoEvolution, kNoAttentionNoEvolution, kAlphaS0NoEvolution };

VariantResult run_variant(std::uint64_t seed, Variant variant) {
    Config cfg = bench_config(seed);
    EvalOptions opts;
    switch (variant) {
        case Variant::kFull:
            break;
        case Variant::kNoEvolution:
            cfg.evolution_on = false;
            break;
        case Variant::kNoAttentionNoEvolution:
            cfg.evolution_on = false;
            cfg.attention_on = false;
            break;
        case Variant::kAlphaS0NoEvolution:
            cfg.evolution_on = false;
            cfg.rewards.weights.alpha_s = 0.0;
            opts.alpha_s = 0.0;
            break;
    }
    const TrainResult trained = train(cfg);
    const EvalSummary summary = evaluate(cfg, trained.agent.policy, opts, &trained.agent.history);

    VariantResult out;
    out.mean_reward = summary.mean_reward;
    out.oracle_ratio = summary.oracle_ratio;
    out.oracle_mean = summary.oracle_mean_reward;
    out.within_group_variance = summary.mean_within_group_variance;
    const auto& em = trained.metrics.episode_mean_reward;
    const size_t window = std::min<size_t>(50, em.size());
    for (size_t i = 0; i < window; ++i) {
        out.early_training_reward += em[i] / window;
        out.late_training_reward += em[em.size() - 1 - i] / window;
    }
    return out;
}

struct VariantTable {
    std::vector<VariantResult> full, no_evo, base, alpha0;
};

VariantTable run_all_variants(int seeds) {
    struct Job {
        std::uint64_t seed;
        Variant variant;
    };
    std::vector<Job> jobs;
    for (int s = 1; s <= seeds; ++s) {
        jobs.push_back({static_cast<std::uint64_t>(s), Variant::kFull});
        jobs.push_back({static_cast<std::uint64_t>(s), Variant::kNoEvolution});
        jobs.push_back({static_cast<std::uint64_t>(s), Variant::kNoAttentionNoEvolution});
        jobs.push_back({static_cast<std::uint64_t>(s), Variant::kAlphaS0NoEvolution});
    }

    VariantTable table;
    table.full.resize(seeds);
    table.no_evo.resize(seeds);
    table.base.resize(seeds);
    table.alpha0.resize(seeds);

    std::mutex mutex;
    size_t next = 0;
    auto worker = [&] {
        while (true) {
            size_t index;
            {
                std::lock_guard<std::mutex> lock(mutex);
                if (next >= jobs.size()) return;
                index = next++;
            }
            const Job job = jobs[index];
            const VariantResult result = run_variant(job.seed, job.variant);
            std::lock_guard<std::mutex> lock(mutex);
            const size_t row = job.seed - 1;
            switch (job.variant) {
                case Variant::kFull: table.full[row] = result; break;
                case Variant::kNoEvolution: table.no_evo[row] = result; break;
                case Variant::kNoAttentionNoEvolution: table.base[row] = result; break;
                case Variant::kAlphaS0NoEvolution: table.alpha0[row] = result; break;
            }
        }
    };
    const unsigned threads = std::max(2u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return table;
}

double mean_of(const std::vector<VariantResult>& rows, double VariantResult::* field) {
    double s = 0.0;
    for (const auto& r : rows) s += r.*field;
    return s / rows.size();
}

void criteria_5_6_7(const VariantTable& table) {
    // Criterion 5: oracle ratio over the full model, at most 2 of 10 below 0.90.
    int failing = 0;
    std::string ratios;
    for (const auto& r : table.full) {
        if (r.oracle_ratio < 0.90) ++failing;
        ratios += (ratios.empty() ? "" : " ") + fmt(std::round(r.oracle_ratio * 1000) / 1000);
    }
    // Cross-check the oracle denominator against the CLI oracle fixture.
    const fs::path tmp = fs::temp_directory_path() / "evorl_acceptance_oracle";
    fs::remove_all(tmp);
    double cli_oracle_mean = 0.0;
    bool oracle_cross_check = false;
    if (run_cli("oracle --config " + std::string(EVORL_CONFIG_DIR) + "/bench.toml --out-dir " +
                    (tmp / "run").string(),
                tmp) == 0) {
        const auto parsed =
            nlohmann::json::parse(read_text_file((tmp / "run" / "oracle.json").string()));
        cli_oracle_mean = parsed.at("mean_best_reward").get<double>();
        oracle_cross_check = std::fabs(cli_oracle_mean - table.full.front().oracle_mean) < 1e-9;
    }
    report(5, failing <= 2 && oracle_cross_check,
           "oracle ratio over 10 seeds [" + ratios + "], " + std::to_string(failing) +
               " below 0.90 (allowed 2); cmd_oracle mean " + fmt(cli_oracle_mean) +
               " matches evaluator oracle: " + (oracle_cross_check ? "yes" : "NO"));

    // Criterion 6: ordering of trained variants plus a paired bootstrap on
    // the full-vs-base gap.
    const double mean_full = mean_of(table.full, &VariantResult::mean_reward);
    const double mean_no_evo = mean_of(table.no_evo, &VariantResult::mean_reward);
    const double mean_base = mean_of(table.base, &VariantResult::mean_reward);
    std::vector<double> diffs;
    for (size_t i = 0; i < table.full.size(); ++i)
        diffs.push_back(table.full[i].mean_reward - table.base[i].mean_reward);
    Rng boot_rng(987654321);
    std::vector<double> boot_means;
    for (int b = 0; b < 10000; ++b) {
        double s = 0.0;
        for (size_t k = 0; k < diffs.size(); ++k)
            s += diffs[boot_rng.uniform_int(0, static_cast<int>(diffs.size()) - 1)];
        boot_means.push_back(s / diffs.size());
    }
    std::sort(boot_means.begin(), boot_means.end());
    const double ci_low = boot_means[249];  // 2.5th percentile of 10000
    const bool ordering = mean_full >= mean_no_evo && mean_no_evo >= mean_base;
    report(6, ordering && ci_low > 0.0,
           "ablation ordering: full " + fmt(mean_full) + " >= no-evolution " + fmt(mean_no_evo) +
               " >= no-attention-no-evolution " + fmt(mean_base) +
               "; full-vs-base bootstrap 2.5th percentile " + fmt(ci_low) + " > 0");

    // Criterion 7: the consistency reward lowers within-group lambda variance
    // (the alpha_s = 0 system runs without the r_s-driven refinement, which
    // is itself part of the consistency machinery).
    const double var_with = mean_of(table.full, &VariantResult::within_group_variance);
    const double var_without = mean_of(table.alpha0, &VariantResult::within_group_variance);
    report(7, var_with < var_without,
           "within-neighbor-group lambda variance: alpha_s=1 " + fmt(var_with) +
               " < alpha_s=0 " + fmt(var_without));

    // Trainer invariant rider: smoothed training reward rises over the run.
    int improved = 0;
    for (const auto& r : table.full)
        if (r.late_training_reward > r.early_training_reward) ++improved;
    report(5, improved >= 9,
           "training trend invariant: smoothed reward at episode P exceeds episode 1 for " +
               std::to_string(improved) + "/10 seeds (>= 9)");
}

// ------------------------------------------------------------- 8: figure 1

void criterion_8() {
    const fs::path tmp = fs::temp_directory_path() / "evorl_acceptance_fig1";
    fs::remove_all(tmp);
    const int code = run_cli("figure1 --num-scenes 1000 --seed-start 5000 --out-dir " +
                                 (tmp / "run").string(),
                             tmp);
    bool pass = code == 0;
    double modal_us = 0.0, modal_large = 0.0;
    if (pass) {
        // Parse the band x action CSV and compare modal columns.
        const std::string csv = read_text_file((tmp / "run" / "histogram_by_sizeband.csv").string());
        std::vector<std::vector<double>> rows;
        std::vector<double> actions;
        std::istringstream stream(csv);
        std::string line;
        std::getline(stream, line);
        {
            std::istringstream header(line);
            std::string cell;
            std::getline(header, cell, ',');
            while (std::getline(header, cell, ','))
                actions.push_back(std::stod(cell.substr(cell.find('_') + 1)));
        }
        while (std::getline(stream, line)) {
            std::istringstream row(line);
            std::string cell;
            std::getline(row, cell, ',');
            std::vector<double> counts;
            while (std::getline(row, cell, ',')) counts.push_back(std::stod(cell));
            rows.push_back(counts);
        }
        pass = rows.size() == 4 && actions.size() == 6;
        if (pass) {
            const auto modal = [&](int band) {
                int best = 0;
                for (size_t a = 1; a < rows[band].size(); ++a)
                    if (rows[band][a] > rows[band][best]) best = static_cast<int>(a);
                return actions[best];
            };
            modal_us = modal(0);
            modal_large = modal(3);
            pass = modal_us > modal_large;
        }
    }
    report(8, pass, "figure-1 analog over 1000 zero-noise scenes: ultra-small modal lambda " +
                        fmt(modal_us) + " > large modal lambda " + fmt(modal_large));
}

// ---------------------------------------------------------- 9: determinism

void criterion_9() {
    const fs::path tmp = fs::temp_directory_path() / "evorl_acceptance_det";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    write_text_file((tmp / "tiny.toml").string(), R"(
[scene]
objects_min = 2
objects_max = 4
[features]
dim = 16
[agent]
gate_hidden = 4
dropout = 0.0
momentum = 0.0
[evolution]
population = 4
iterations = 2
[train]
episodes = 2
steps = 4
scenes_per_batch = 2
checkpoint_interval = 2
seed = 3
[eval]
num_scenes = 4
)");
    const std::string cfg_arg = " --config " + (tmp / "tiny.toml").string();

    bool pass = true;
    std::string detail = "byte-identical reruns:";
    auto same_file = [&](const std::string& command, const std::string& relative,
                         const std::string& label) {
        const fs::path a = tmp / (label + "_a");
        const fs::path b = tmp / (label + "_b");
        const bool ok =
            run_cli(command + " --out-dir " + a.string(), tmp) == 0 &&
            run_cli(command + " --out-dir " + b.string(), tmp) == 0 &&
            read_text_file((a / relative).string()) == read_text_file((b / relative).string());
        pass &= ok;
        detail += " " + label + (ok ? " yes" : " NO");
        return a;
    };

    const fs::path train_dir = same_file("train" + cfg_arg, "metrics.csv", "train");
    same_file("oracle" + cfg_arg, "oracle.json", "oracle");
    same_file("figure1" + cfg_arg + " --num-scenes 150 --seed-start 5000",
              "histogram_by_sizeband.csv", "figure1");
    same_file("eval" + cfg_arg + " --checkpoint " +
                  (train_dir / "checkpoints/latest.json").string(),
              "eval_summary.json", "eval");
    report(9, pass, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite (benchmark config: %s/bench.toml)\n", EVORL_CONFIG_DIR);
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    const VariantTable table = run_all_variants(10);
    criteria_5_6_7(table);
    criterion_8();
    criterion_9();
    std::printf("%d criterion check(s) failed\n", g_failures);
    return g_failures;
}
