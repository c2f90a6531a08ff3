#pragma once

#include <string>

#include "evorl/agent.hpp"
#include "evorl/evolution.hpp"
#include "evorl/scene.hpp"
#include "evorl/tensor.hpp"

namespace evorl {

/// Shortest decimal that round-trips the exact double (to_chars).
std::string format_double(double v);

// JSON fixtures. Doubles are emitted with round-trip precision, so decode
// reproduces values exactly.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
std::string regions_to_json(const std::vector<ClusterRegion>& regions);
std::vector<ClusterRegion> regions_from_json(const std::string& text);

std::string tensor_to_json(const Tensor2& t);
Tensor2 tensor_from_json(const std::string& text);

/// Debug dump of a full attention pipeline state (--dump-features).
std::string attention_state_to_json(const AttentionState& state);

/// Everything needed for a bit-identical resume: parameters, optimizer
/// velocities, the history archive, and the run position (all run RNG
/// streams are derived from master_seed + episode/step counters).
struct Checkpoint {
    int episode = 0;          // episodes completed
    long update_count = 0;    // actor/critic updates applied (lr schedule position)
    std::uint64_t master_seed = 0;
    std::vector<double> action_set;
    PolicyParams policy;
    CriticParams critic;
    std::vector<Tensor2> actor_velocity;
    std::vector<Tensor2> critic_velocity;
    std::vector<HistoryEntry> history;
    std::string config_json;  // resolved config echo
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace evorl
