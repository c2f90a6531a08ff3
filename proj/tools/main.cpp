#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evorl/config.hpp"
#include "evorl/serialize.hpp"
#include "evorl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file (key = value, [dotted] sections)");
    cmd->add_option("--override", args.overrides, "Override a config key, e.g. agent.lr=0.005")
        ->take_all();
    cmd->add_option("--seed", args.seed, "Master seed (overrides train.seed)");
    cmd->add_option("--out-dir", args.out_dir,
                    "Output directory (default: $EVORL_OUT_DIR or ./runs/<cmd>_seed<seed>)");
}

evorl::Config load_config(const CommonArgs& args) {
    evorl::Config cfg = args.config_path.empty() ? evorl::Config{}
                                                 : evorl::Config::from_file(args.config_path);
    for (const std::string& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw evorl::ConfigError("--override expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed) cfg.seed = *args.seed;
    cfg.validate();
    return cfg;
}

fs::path resolve_out_dir(const CommonArgs& args, const std::string& command,
                         std::uint64_t seed) {
    if (!args.out_dir.empty()) return args.out_dir;
    const char* env = std::getenv("EVORL_OUT_DIR");
    const fs::path base = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
    return base / (command + "_seed" + std::to_string(seed));
}

fs::path prepare_run_dir(const CommonArgs& args, const std::string& command,
                         const evorl::Config& cfg) {
    const fs::path dir = resolve_out_dir(args, command, cfg.seed);
    fs::create_directories(dir);
    evorl::write_text_file((dir / "run_config.json").string(), cfg.to_json() + "\n");
    return dir;
}

json summary_row_json(const evorl::EvalSummary& summary, const std::string& tag) {
    json row;
    row["ablation"] = tag;
    row["attention"] = summary.attention_on;
    row["evolution"] = summary.evolution_on;
    row["alpha_s"] = summary.alpha_s;
    row["mean_reward"] = summary.mean_reward;
    row["oracle_mean_reward"] = summary.oracle_mean_reward;
    row["oracle_ratio"] = summary.oracle_ratio;
    row["mean_within_group_variance"] = summary.mean_within_group_variance;
    row["scenes_with_groups"] = summary.scenes_with_groups;
    return row;
}

int cmd_train(const CommonArgs& args, bool trace_evolution, const std::string& resume_path) {
    const evorl::Config cfg = load_config(args);
    const fs::path dir = prepare_run_dir(args, "train", cfg);

    std::ofstream metrics(dir / "metrics.csv", resume_path.empty() ? std::ios::trunc
                                                                   : std::ios::app);
    std::ofstream evolution_trace;
    evorl::TrainSinks sinks;
    sinks.metrics = &metrics;
    if (trace_evolution) {
        evolution_trace.open(dir / "evolution.csv",
                             resume_path.empty() ? std::ios::trunc : std::ios::app);
        sinks.evolution_trace = &evolution_trace;
    }
    sinks.checkpoint_dir = (dir / "checkpoints").string();

    std::optional<evorl::Checkpoint> resume;
    if (!resume_path.empty()) resume = evorl::load_checkpoint(resume_path);

    const evorl::TrainResult result =
        evorl::train(cfg, sinks, resume ? &*resume : nullptr);

    std::cout << "train: " << cfg.episodes << " episodes, " << result.metrics.total_steps
              << " steps, final mean reward "
              << evorl::format_double(result.metrics.episode_mean_reward.empty()
                                          ? 0.0
                                          : result.metrics.episode_mean_reward.back())
              << ", outputs in " << dir.string() << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path, bool no_attention,
             bool no_evolution, std::optional<double> alpha_s,
             const std::string& dump_features_path) {
    const evorl::Config cfg = load_config(args);
    const evorl::Checkpoint ckpt = evorl::load_checkpoint(checkpoint_path);
    if (ckpt.action_set != cfg.action_set)
        throw evorl::ConfigError(
            "eval: checkpoint action set does not match the benchmark config; "
            "re-run with matching actions.set");

    const fs::path dir = prepare_run_dir(args, "eval", cfg);

    // One row per combination of the requested ablation switches, base first.
    struct Toggle {
        std::string name;
        evorl::EvalOptions opts;
    };
    std::vector<Toggle> toggles;
    if (no_attention) {
        evorl::EvalOptions o;
        o.attention_on = false;
        toggles.push_back({"no_attention", o});
    }
    if (no_evolution) {
        evorl::EvalOptions o;
        o.evolution_on = false;
        toggles.push_back({"no_evolution", o});
    }
    if (alpha_s) {
        evorl::EvalOptions o;
        o.alpha_s = *alpha_s;
        toggles.push_back({"alpha_s=" + evorl::format_double(*alpha_s), o});
    }

    evorl::HistoryBuffer archive(cfg.history_capacity);
    for (const auto& h : ckpt.history)
        archive.record_best(h.genes, h.total_reward, h.region_count);

    json rows = json::array();
    const size_t combos = size_t{1} << toggles.size();
    for (size_t mask = 0; mask < combos; ++mask) {
        evorl::EvalOptions opts;
        std::string tag = "base";
        for (size_t t = 0; t < toggles.size(); ++t) {
            if ((mask >> t & 1) == 0) continue;
            const evorl::EvalOptions& o = toggles[t].opts;
            if (o.attention_on) opts.attention_on = o.attention_on;
            if (o.evolution_on) opts.evolution_on = o.evolution_on;
            if (o.alpha_s) opts.alpha_s = o.alpha_s;
            tag = tag == "base" ? toggles[t].name : tag + "+" + toggles[t].name;
        }
        rows.push_back(
            summary_row_json(evorl::evaluate(cfg, ckpt.policy, opts, &archive), tag));
    }

    const evorl::EvalSummary base = evorl::evaluate(cfg, ckpt.policy, {}, &archive);
    json out;
    out["oracle_ratio"] = base.oracle_ratio;
    out["mean_reward"] = base.mean_reward;
    out["oracle_mean_reward"] = base.oracle_mean_reward;
    out["rows"] = rows;
    json per_scene = json::array();
    for (const auto& s : base.scenes) {
        json js;
        js["seed"] = s.scene_seed;
        js["regions"] = s.region_count;
        js["reward"] = s.reward.total;
        js["oracle_reward"] = s.oracle_reward;
        js["oracle_exact"] = s.oracle_exact;
        js["lambdas"] = s.lambdas;
        per_scene.push_back(std::move(js));
    }
    out["scenes"] = std::move(per_scene);
    evorl::write_text_file((dir / "eval_summary.json").string(), out.dump(2) + "\n");

    // Assigned-lambda histogram by region size band.
    std::vector<std::vector<long>> counts(cfg.scene.num_bands(),
                                          std::vector<long>(cfg.action_set.size(), 0));
    for (const auto& s : base.scenes) {
        for (size_t r = 0; r < s.lambdas.size(); ++r) {
            for (size_t a = 0; a < cfg.action_set.size(); ++a) {
                if (s.lambdas[r] == cfg.action_set[a]) {
                    counts[s.region_bands[r]][a] += 1;
                    break;
                }
            }
        }
    }
    evorl::write_text_file((dir / "histogram_by_sizeband.csv").string(),
                           evorl::histogram_to_csv(counts, cfg.action_set));

    if (!dump_features_path.empty()) {
        const evorl::Scene scene = evorl::generate_scene(cfg.scene, cfg.eval_seed_start);
        const auto regions = evorl::make_regions(scene, cfg.regions);
        const evorl::FeatureEncoder encoder(cfg.feature_dim, cfg.scene.categories,
                                            cfg.encoder_seed);
        const evorl::AttentionState state =
            evorl::attention_forward(encoder.encode(regions, scene),
                                     evorl::spatial_affinity(regions),
                                     ckpt.policy.attention, cfg.fusion);
        evorl::write_text_file(dump_features_path,
                               evorl::attention_state_to_json(state) + "\n");
    }

    std::cout << "eval: mean reward " << evorl::format_double(base.mean_reward)
              << ", oracle ratio " << evorl::format_double(base.oracle_ratio) << ", "
              << rows.size() << " row(s) in " << (dir / "eval_summary.json").string() << "\n";
    return 0;
}

int cmd_oracle(const CommonArgs& args) {
    const evorl::Config cfg = load_config(args);
    const fs::path dir = prepare_run_dir(args, "oracle", cfg);
    const evorl::DetectorModel detector = cfg.resolved_detector();

    json scenes = json::array();
    double reward_sum = 0.0;
    for (int i = 0; i < cfg.eval_num_scenes; ++i) {
        const std::uint64_t seed = cfg.eval_seed_start + i;
        const evorl::Scene scene = evorl::generate_scene(cfg.scene, seed);
        const auto regions = evorl::make_regions(scene, cfg.regions);

        evorl::OracleOptions opts;
        opts.mode = cfg.oracle_mode;
        opts.exhaustive_cap = cfg.oracle_cap;
        evorl::OracleResult oracle;
        try {
            oracle = evorl::oracle_scales(regions, cfg.action_set, detector, scene,
                                          cfg.rewards, opts);
        } catch (const evorl::ConfigError& e) {
            throw evorl::ConfigError("oracle: scene seed " + std::to_string(seed) + ": " +
                                     e.what());
        }

        json js;
        js["seed"] = seed;
        js["regions"] = regions.size();
        js["action_indices"] = oracle.action_indices;
        js["lambdas"] = oracle.lambdas;
        js["best_reward"] = oracle.best_reward;
        js["evaluations"] = oracle.evaluations;
        scenes.push_back(std::move(js));
        reward_sum += oracle.best_reward;
    }

    json out;
    out["mean_best_reward"] = reward_sum / cfg.eval_num_scenes;
    out["num_scenes"] = cfg.eval_num_scenes;
    out["scenes"] = std::move(scenes);
    evorl::write_text_file((dir / "oracle.json").string(), out.dump(2) + "\n");

    std::cout << "oracle: " << cfg.eval_num_scenes << " scenes, mean best reward "
              << evorl::format_double(reward_sum / cfg.eval_num_scenes) << ", wrote "
              << (dir / "oracle.json").string() << "\n";
    return 0;
}

int cmd_figure1(const CommonArgs& args, int num_scenes, std::uint64_t seed_start) {
    const evorl::Config cfg = load_config(args);
    const fs::path dir = prepare_run_dir(args, "figure1", cfg);

    const auto counts = evorl::figure1_histogram(cfg, num_scenes, seed_start);
    evorl::write_text_file((dir / "histogram_by_sizeband.csv").string(),
                           evorl::histogram_to_csv(counts, cfg.action_set));

    std::cout << "figure1: " << num_scenes << " single-object scenes, modal lambda per band:";
    for (const auto& row : counts) {
        int best = 0;
        for (size_t a = 1; a < row.size(); ++a)
            if (row[a] > row[best]) best = static_cast<int>(a);
        std::cout << ' ' << evorl::format_double(cfg.action_set[best]);
    }
    std::cout << " -> " << (dir / "histogram_by_sizeband.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-patch scale optimization agent on a synthetic aerial-scene environment"};
    app.require_subcommand(1);

    CommonArgs train_args;
    bool trace_evolution = false;
    std::string resume_path;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the agent");
    add_common(train_cmd, train_args);
    train_cmd->add_flag("--trace-evolution", trace_evolution,
                        "Write per-generation evolution trace to evolution.csv");
    train_cmd->add_option("--resume", resume_path, "Resume from a checkpoint file");

    CommonArgs eval_args;
    std::string checkpoint_path;
    bool no_attention = false;
    bool no_evolution = false;
    std::optional<double> alpha_s;
    std::string dump_features_path;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the benchmark");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON file")->required();
    eval_cmd->add_flag("--no-attention", no_attention, "Add rows with attention ablated (E := X)");
    eval_cmd->add_flag("--no-evolution", no_evolution,
                       "Add rows using the actor assignment directly");
    eval_cmd->add_option("--alpha-s", alpha_s, "Add rows with this scale-consistency weight");
    eval_cmd->add_option("--dump-features", dump_features_path,
                         "Write the first scene's attention state JSON to this path");

    CommonArgs oracle_args;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle", "Brute-force optimal assignments for the benchmark");
    add_common(oracle_cmd, oracle_args);

    CommonArgs fig_args;
    int fig_scenes = 1000;
    std::uint64_t fig_seed_start = 5000;
    CLI::App* fig_cmd =
        app.add_subcommand("figure1", "Optimal-scale histogram by object size band");
    add_common(fig_cmd, fig_args);
    fig_cmd->add_option("--num-scenes", fig_scenes, "Single-object scenes to sweep");
    fig_cmd->add_option("--seed-start", fig_seed_start, "First scene seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(train_args, trace_evolution, resume_path);
        if (eval_cmd->parsed())
            return cmd_eval(eval_args, checkpoint_path, no_attention, no_evolution, alpha_s,
                            dump_features_path);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_args);
        if (fig_cmd->parsed()) return cmd_figure1(fig_args, fig_scenes, fig_seed_start);
    } catch (const evorl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
