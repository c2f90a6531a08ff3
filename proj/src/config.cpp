#include "evorl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace evorl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quotes = !in_quotes;
        else if (line[i] == '#' && !in_quotes) return line.substr(0, i);
    }
    return line;
}

double as_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

long as_long(const std::string& key, const std::string& value) {
    const double v = as_double(key, value);
    if (v != std::floor(v))
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    return static_cast<long>(v);
}

bool as_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::string as_string(const std::string& value) {
    std::string v = trim(value);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

std::vector<double> as_double_array(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ConfigError("config: key '" + key + "' expects an array like [1, 2, 3]");
    v = v.substr(1, v.size() - 2);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(as_double(key, item));
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' array is empty");
    return out;
}

}  // namespace

DetectorModel Config::resolved_detector() const {
    DetectorModel model = detector;
    if (model.category_offsets.empty())
        model.category_offsets =
            DetectorModel::default_offsets(scene.categories, detector_offset_spread);
    return model;
}

void Config::validate() const {
    scene.validate();
    resolved_detector().validate();
    rewards.weights.validate();
    if (regions.beta < 1.0) throw ConfigError("regions.beta must be >= 1");
    if (regions.merge_iou <= 0.0 || regions.merge_iou >= 1.0)
        throw ConfigError("regions.merge_iou must be in (0, 1)");
    if (feature_dim < 8) throw ConfigError("features.dim must be >= 8");
    if (action_set.empty()) throw ConfigError("actions.set must not be empty");
    for (double a : action_set)
        if (a <= 0.0) throw ConfigError("actions.set entries must be positive");
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("agent.gamma must be in (0, 1]");
    if (learning_rate <= 0.0) throw ConfigError("agent.lr must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("agent.dropout must be in [0, 1)");
    if (gate_hidden < 1) throw ConfigError("agent.gate_hidden must be >= 1");
    if (entropy_beta < 0.0) throw ConfigError("agent.entropy_beta must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("agent.grad_clip must be >= 0");
    if (population < 2) throw ConfigError("evolution.population must be >= 2");
    if (evo_iterations < 1) throw ConfigError("evolution.iterations must be >= 1");
    if (delta <= 0.0 || delta > 1.0) throw ConfigError("evolution.delta must be in (0, 1]");
    if (p_mut < 0.0 || p_mut > 1.0) throw ConfigError("evolution.p_mut must be in [0, 1]");
    if (history_capacity < 1) throw ConfigError("evolution.history_capacity must be >= 1");
    if (episodes < 1 || steps < 1 || scenes_per_batch < 1)
        throw ConfigError("train.episodes/steps/scenes_per_batch must be >= 1");
    if (checkpoint_interval < 1) throw ConfigError("train.checkpoint_interval must be >= 1");
    if (eval_num_scenes < 1) throw ConfigError("eval.num_scenes must be >= 1");
    consistency_k();  // throws when unresolvable
}

void Config::apply(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "scene.width") scene.width = static_cast<int>(as_long(key, v));
    else if (key == "scene.height") scene.height = static_cast<int>(as_long(key, v));
    else if (key == "scene.categories") scene.categories = static_cast<int>(as_long(key, v));
    else if (key == "scene.objects_min") scene.objects_min = static_cast<int>(as_long(key, v));
    else if (key == "scene.objects_max") scene.objects_max = static_cast<int>(as_long(key, v));
    else if (key == "scene.objects_per_cluster") scene.objects_per_cluster = as_double(key, v);
    else if (key == "scene.cluster_spread") scene.cluster_spread = as_double(key, v);
    else if (key == "scene.size_jitter") scene.size_jitter = as_double(key, v);
    else if (key == "scene.category_size_jitter") scene.category_size_jitter = as_double(key, v);
    else if (key == "scene.margin") scene.margin = as_double(key, v);
    else if (key == "scene.band_edges") scene.band_edges = as_double_array(key, v);
    else if (key == "scene.band_weights") scene.band_weights = as_double_array(key, v);
    else if (key == "detector.optimal_px") detector.optimal_px = as_double(key, v);
    else if (key == "detector.sigma_loc") detector.sigma_loc = as_double(key, v);
    else if (key == "detector.sigma_cls") detector.sigma_cls = as_double(key, v);
    else if (key == "detector.max_scale") detector.max_scale = as_double(key, v);
    else if (key == "detector.artifact_slope") detector.artifact_slope = as_double(key, v);
    else if (key == "detector.noise_sd") detector.noise_sd = as_double(key, v);
    else if (key == "detector.category_offsets") detector.category_offsets = as_double_array(key, v);
    else if (key == "detector.offset_spread") detector_offset_spread = as_double(key, v);
    else if (key == "regions.beta") regions.beta = as_double(key, v);
    else if (key == "regions.merge_iou") regions.merge_iou = as_double(key, v);
    else if (key == "features.dim") feature_dim = static_cast<int>(as_long(key, v));
    else if (key == "features.encoder_seed") encoder_seed = static_cast<std::uint64_t>(as_long(key, v));
    else if (key == "features.fusion") {
        const std::string s = as_string(v);
        if (s == "hadamard") fusion = AttentionFusion::kHadamard;
        else if (s == "matmul") fusion = AttentionFusion::kMatmul;
        else throw ConfigError("features.fusion must be 'hadamard' or 'matmul'");
    } else if (key == "features.attention") attention_on = as_bool(key, v);
    else if (key == "rewards.alpha_l") rewards.weights.alpha_l = as_double(key, v);
    else if (key == "rewards.alpha_c") rewards.weights.alpha_c = as_double(key, v);
    else if (key == "rewards.alpha_s") rewards.weights.alpha_s = as_double(key, v);
    else if (key == "rewards.consistency_k") rewards.consistency_k = as_double(key, v);
    else if (key == "rewards.neighbor_radius") rewards.neighbor_radius = as_double(key, v);
    else if (key == "rewards.neighbor_k_max") rewards.neighbor_k_max = static_cast<int>(as_long(key, v));
    else if (key == "actions.set") action_set = as_double_array(key, v);
    else if (key == "agent.mode") {
        const std::string s = as_string(v);
        if (s == "reinforce") agent_mode = AgentMode::kReinforce;
        else if (s == "ppo_clip") agent_mode = AgentMode::kPpoClip;
        else throw ConfigError("agent.mode must be 'reinforce' or 'ppo_clip'");
    } else if (key == "agent.gamma") gamma = as_double(key, v);
    else if (key == "agent.lr") learning_rate = as_double(key, v);
    else if (key == "agent.momentum") momentum = as_double(key, v);
    else if (key == "agent.weight_decay") weight_decay = as_double(key, v);
    else if (key == "agent.dropout") dropout = as_double(key, v);
    else if (key == "agent.gate_hidden") gate_hidden = static_cast<int>(as_long(key, v));
    else if (key == "agent.clip_ratio") clip_ratio = as_double(key, v);
    else if (key == "agent.entropy_beta") entropy_beta = as_double(key, v);
    else if (key == "agent.grad_clip") grad_clip = as_double(key, v);
    else if (key == "agent.ppo_epochs") ppo_epochs = static_cast<int>(as_long(key, v));
    else if (key == "evolution.enabled") evolution_on = as_bool(key, v);
    else if (key == "evolution.population") population = static_cast<int>(as_long(key, v));
    else if (key == "evolution.iterations") evo_iterations = static_cast<int>(as_long(key, v));
    else if (key == "evolution.delta") delta = as_double(key, v);
    else if (key == "evolution.p_mut") p_mut = as_double(key, v);
    else if (key == "evolution.history_capacity") history_capacity = static_cast<int>(as_long(key, v));
    else if (key == "train.episodes") episodes = static_cast<int>(as_long(key, v));
    else if (key == "train.steps") steps = static_cast<int>(as_long(key, v));
    else if (key == "train.scenes_per_batch") scenes_per_batch = static_cast<int>(as_long(key, v));
    else if (key == "train.checkpoint_interval") checkpoint_interval = static_cast<int>(as_long(key, v));
    else if (key == "train.seed") seed = static_cast<std::uint64_t>(as_long(key, v));
    else if (key == "eval.seed_start") eval_seed_start = static_cast<std::uint64_t>(as_long(key, v));
    else if (key == "eval.num_scenes") eval_num_scenes = static_cast<int>(as_long(key, v));
    else if (key == "oracle.mode") {
        const std::string s = as_string(v);
        if (s == "exhaustive") oracle_mode = OracleMode::kExhaustive;
        else if (s == "coordinate") oracle_mode = OracleMode::kCoordinateAscent;
        else throw ConfigError("oracle.mode must be 'exhaustive' or 'coordinate'");
    } else if (key == "oracle.cap") oracle_cap = static_cast<std::uint64_t>(as_long(key, v));
    else throw ConfigError("config: unknown key '" + key + "'");
}

std::string Config::to_json() const {
    nlohmann::json j;
    j["scene"]["width"] = scene.width;
    j["scene"]["height"] = scene.height;
    j["scene"]["categories"] = scene.categories;
    j["scene"]["objects_min"] = scene.objects_min;
    j["scene"]["objects_max"] = scene.objects_max;
    j["scene"]["objects_per_cluster"] = scene.objects_per_cluster;
    j["scene"]["cluster_spread"] = scene.cluster_spread;
    j["scene"]["size_jitter"] = scene.size_jitter;
    j["scene"]["category_size_jitter"] = scene.category_size_jitter;
    j["scene"]["margin"] = scene.margin;
    j["scene"]["band_edges"] = scene.band_edges;
    j["scene"]["band_weights"] = scene.band_weights;
    const DetectorModel model = resolved_detector();
    j["detector"]["optimal_px"] = model.optimal_px;
    j["detector"]["sigma_loc"] = model.sigma_loc;
    j["detector"]["sigma_cls"] = model.sigma_cls;
    j["detector"]["max_scale"] = model.max_scale;
    j["detector"]["artifact_slope"] = model.artifact_slope;
    j["detector"]["noise_sd"] = model.noise_sd;
    j["detector"]["category_offsets"] = model.category_offsets;
    j["regions"]["beta"] = regions.beta;
    j["regions"]["merge_iou"] = regions.merge_iou;
    j["features"]["dim"] = feature_dim;
    j["features"]["encoder_seed"] = encoder_seed;
    j["features"]["fusion"] = fusion == AttentionFusion::kHadamard ? "hadamard" : "matmul";
    j["features"]["attention"] = attention_on;
    j["rewards"]["alpha_l"] = rewards.weights.alpha_l;
    j["rewards"]["alpha_c"] = rewards.weights.alpha_c;
    j["rewards"]["alpha_s"] = rewards.weights.alpha_s;
    j["rewards"]["consistency_k"] = consistency_k();
    j["rewards"]["neighbor_radius"] = rewards.neighbor_radius;
    j["rewards"]["neighbor_k_max"] = rewards.neighbor_k_max;
    j["actions"]["set"] = action_set;
    j["agent"]["mode"] = agent_mode == AgentMode::kReinforce ? "reinforce" : "ppo_clip";
    j["agent"]["gamma"] = gamma;
    j["agent"]["lr"] = learning_rate;
    j["agent"]["momentum"] = momentum;
    j["agent"]["weight_decay"] = weight_decay;
    j["agent"]["dropout"] = dropout;
    j["agent"]["gate_hidden"] = gate_hidden;
    j["agent"]["clip_ratio"] = clip_ratio;
    j["agent"]["entropy_beta"] = entropy_beta;
    j["agent"]["grad_clip"] = grad_clip;
    j["agent"]["ppo_epochs"] = ppo_epochs;
    j["evolution"]["enabled"] = evolution_on;
    j["evolution"]["population"] = population;
    j["evolution"]["iterations"] = evo_iterations;
    j["evolution"]["delta"] = delta;
    j["evolution"]["p_mut"] = p_mut;
    j["evolution"]["history_capacity"] = history_capacity;
    j["train"]["episodes"] = episodes;
    j["train"]["steps"] = steps;
    j["train"]["scenes_per_batch"] = scenes_per_batch;
    j["train"]["checkpoint_interval"] = checkpoint_interval;
    j["train"]["seed"] = seed;
    j["eval"]["seed_start"] = eval_seed_start;
    j["eval"]["num_scenes"] = eval_num_scenes;
    j["oracle"]["mode"] = oracle_mode == OracleMode::kExhaustive ? "exhaustive" : "coordinate";
    j["oracle"]["cap"] = oracle_cap;
    return j.dump(2);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        try {
            cfg.apply(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str(), path);
}

}  // namespace evorl
