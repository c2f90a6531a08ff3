#include "evorl/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace evorl {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

json box_to_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

Box box_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
            j.at(3).get<double>()};
}

json tensor_to_json_obj(const Tensor2& t) {
    json j;
    j["rows"] = t.rows;
    j["cols"] = t.cols;
    j["data"] = t.data;
    return j;
}

Tensor2 tensor_from_json_obj(const json& j) {
    return Tensor2::from_values(j.at("rows").get<int>(), j.at("cols").get<int>(),
                                j.at("data").get<std::vector<double>>());
}

json region_to_json_obj(const ClusterRegion& r) {
    json j;
    j["id"] = r.id;
    j["bbox"] = box_to_json(r.bbox);
    j["members"] = r.members;
    j["center"] = json::array({r.cx, r.cy});
    j["dominant_category"] = r.dominant_category;
    j["mean_px_size"] = r.mean_px_size;
    return j;
}

ClusterRegion region_from_json_obj(const json& j) {
    ClusterRegion r;
    r.id = j.at("id").get<int>();
    r.bbox = box_from_json(j.at("bbox"));
    r.members = j.at("members").get<std::vector<int>>();
    r.cx = j.at("center").at(0).get<double>();
    r.cy = j.at("center").at(1).get<double>();
    r.dominant_category = j.at("dominant_category").get<int>();
    r.mean_px_size = j.at("mean_px_size").get<double>();
    return r;
}

json params_to_json(const std::vector<const Tensor2*>& params) {
    json arr = json::array();
    for (const Tensor2* t : params) arr.push_back(tensor_to_json_obj(*t));
    return arr;
}

void params_from_json(const json& arr, const std::vector<Tensor2*>& params) {
    if (arr.size() != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) *params[i] = tensor_from_json_obj(arr[i]);
}

json velocity_to_json(const std::vector<Tensor2>& v) {
    json arr = json::array();
    for (const Tensor2& t : v) arr.push_back(tensor_to_json_obj(t));
    return arr;
}

std::vector<Tensor2> velocity_from_json(const json& arr) {
    std::vector<Tensor2> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(tensor_from_json_obj(j));
    return out;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
    json j;
    j["width"] = scene.width;
    j["height"] = scene.height;
    j["seed"] = scene.seed;
    json objs = json::array();
    for (const auto& o : scene.objects) {
        json jo;
        jo["id"] = o.id;
        jo["category"] = o.category;
        jo["bbox"] = box_to_json(o.bbox);
        jo["px_size"] = o.px_size;
        objs.push_back(std::move(jo));
    }
    j["objects"] = std::move(objs);
    return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
    const json j = json::parse(text);
    Scene scene;
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    scene.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jo : j.at("objects")) {
        SceneObject o;
        o.id = jo.at("id").get<int>();
        o.category = jo.at("category").get<int>();
        o.bbox = box_from_json(jo.at("bbox"));
        o.px_size = jo.at("px_size").get<double>();
        scene.objects.push_back(o);
    }
    return scene;
}

std::string regions_to_json(const std::vector<ClusterRegion>& regions) {
    json arr = json::array();
    for (const auto& r : regions) arr.push_back(region_to_json_obj(r));
    return arr.dump(2);
}

std::vector<ClusterRegion> regions_from_json(const std::string& text) {
    const json arr = json::parse(text);
    std::vector<ClusterRegion> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(region_from_json_obj(j));
    return out;
}

std::string tensor_to_json(const Tensor2& t) { return tensor_to_json_obj(t).dump(); }

Tensor2 tensor_from_json(const std::string& text) {
    return tensor_from_json_obj(json::parse(text));
}

std::string attention_state_to_json(const AttentionState& state) {
    json j;
    j["x"] = tensor_to_json_obj(state.x);
    j["s"] = tensor_to_json_obj(state.s);
    j["q"] = tensor_to_json_obj(state.q);
    j["k"] = tensor_to_json_obj(state.k);
    j["v"] = tensor_to_json_obj(state.v);
    j["sem"] = tensor_to_json_obj(state.sem);
    j["weights"] = tensor_to_json_obj(state.weights);
    j["output"] = tensor_to_json_obj(state.output);
    return j.dump(2);
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format"] = "evorl-checkpoint-v1";
    j["episode"] = ckpt.episode;
    j["update_count"] = ckpt.update_count;
    j["master_seed"] = ckpt.master_seed;
    j["action_set"] = ckpt.action_set;
    j["policy_param_names"] = {"att_wq", "att_wk", "att_wv", "gate_w1", "gate_b1",
                               "gate_w2", "gate_b2", "head_w", "head_b"};
    j["policy"] = params_to_json(ckpt.policy.param_list());
    j["critic_param_names"] = {"gate_w1", "gate_b1", "gate_w2", "gate_b2", "head_w", "head_b"};
    j["critic"] = params_to_json(ckpt.critic.param_list());
    j["actor_velocity"] = velocity_to_json(ckpt.actor_velocity);
    j["critic_velocity"] = velocity_to_json(ckpt.critic_velocity);
    json hist = json::array();
    for (const auto& h : ckpt.history) {
        json jh;
        jh["genes"] = h.genes;
        jh["total_reward"] = h.total_reward;
        jh["region_count"] = h.region_count;
        hist.push_back(std::move(jh));
    }
    j["history"] = std::move(hist);
    j["config"] = json::parse(ckpt.config_json.empty() ? "{}" : ckpt.config_json);
    return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("format", "") != std::string("evorl-checkpoint-v1"))
        throw std::runtime_error("checkpoint: unknown format tag");
    Checkpoint ckpt;
    ckpt.episode = j.at("episode").get<int>();
    ckpt.update_count = j.at("update_count").get<long>();
    ckpt.master_seed = j.at("master_seed").get<std::uint64_t>();
    ckpt.action_set = j.at("action_set").get<std::vector<double>>();
    params_from_json(j.at("policy"), ckpt.policy.param_list());
    params_from_json(j.at("critic"), ckpt.critic.param_list());
    ckpt.actor_velocity = velocity_from_json(j.at("actor_velocity"));
    ckpt.critic_velocity = velocity_from_json(j.at("critic_velocity"));
    for (const auto& jh : j.at("history")) {
        HistoryEntry h;
        h.genes = jh.at("genes").get<std::vector<int>>();
        h.total_reward = jh.at("total_reward").get<double>();
        h.region_count = jh.at("region_count").get<int>();
        ckpt.history.push_back(std::move(h));
    }
    ckpt.config_json = j.at("config").dump(2);
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_text_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    out << content;
}

}  // namespace evorl
