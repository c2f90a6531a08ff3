#pragma once

#include <string>
#include <vector>

#include "evorl/autodiff.hpp"
#include "evorl/features.hpp"
#include "evorl/nets.hpp"
#include "evorl/rng.hpp"
#include "evorl/tensor.hpp"

namespace evorl {

enum class AgentMode { kReinforce, kPpoClip };

struct AgentOptions {
    AgentMode mode = AgentMode::kReinforce;
    bool attention_on = true;
    AttentionFusion fusion = AttentionFusion::kHadamard;
    double clip_ratio = 0.2;
    int ppo_epochs = 4;
    // Entropy regularization weight added to the policy objective. 0 keeps
    // the plain policy-gradient update; positive values hold the sampling
    // distribution open during long runs.
    double entropy_beta = 0.0;
    // Global gradient-norm cap applied before the optimizer step; 0 disables.
    double grad_clip = 0.0;
};

/// Actor: attention projections + squeeze-excitation gate + linear head to
/// per-region action logits. The attention parameters are trained through
/// the policy objective.
struct PolicyParams {
    AttentionParams attention;
    GatedBlockParams gate;
    Tensor2 head_w, head_b;

    static PolicyParams init(int dim, int gate_hidden, int num_actions, Rng& rng);
    std::vector<Tensor2*> param_list();
    std::vector<const Tensor2*> param_list() const;
    size_t param_count() const;
};

/// Critic: same gated block structure with a scalar head over the
/// mean-pooled attended features.
struct CriticParams {
    GatedBlockParams gate;
    Tensor2 head_w, head_b;

    static CriticParams init(int dim, int gate_hidden, Rng& rng);
    std::vector<Tensor2*> param_list();
    std::vector<const Tensor2*> param_list() const;
    size_t param_count() const;
};

struct PolicyForward {
    Graph::Id attended = -1;  // E (or X when attention is off)
    Graph::Id logits = -1;
    Graph::Id logp = -1;
    std::vector<Graph::Id> params;  // leaf ids in param_list order
};

PolicyForward policy_forward(Graph& g, const PolicyParams& p, const Tensor2& x,
                             const Tensor2& s, const AgentOptions& options,
                             const Tensor2* dropout_mask = nullptr);

struct CriticForward {
    Graph::Id value = -1;  // 1x1
    std::vector<Graph::Id> params;
};

CriticForward critic_forward(Graph& g, const CriticParams& p, const Tensor2& pooled,
                             const Tensor2* dropout_mask = nullptr);

struct ActionSample {
    std::vector<int> actions;
    std::vector<double> logp_chosen;
};

/// One categorical draw per row of the log-probability matrix.
ActionSample sample_actions(const Tensor2& logp, Rng& rng);
/// Deterministic evaluation mode; ties resolve to the smallest index.
ActionSample argmax_actions(const Tensor2& logp);

/// A(s,a) = R + gamma * V(s') - V(s).
double advantage(double reward, double value, double next_value, double gamma);

struct TrajectoryStep {
    Tensor2 features;             // X, N x d
    Tensor2 affinity;             // S, N x N
    Tensor2 pooled;               // mean-pooled attended features, 1 x d (critic input)
    Tensor2 dropout_mask;         // policy gate mask, empty when dropout is off
    Tensor2 critic_dropout_mask;  // critic gate mask, 1 x d
    std::vector<int> actions;
    std::vector<double> logp_chosen;  // at sampling time (ppo_clip ratios)
    double reward = 0.0;
    double value = 0.0;       // V(s^t)
    double next_value = 0.0;  // V(s^{t+1}); 0 at the terminal step
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    double gamma = 0.99;

    std::vector<double> advantages() const;
    /// G_t = sum_{i=t}^T gamma^{i-t} R_i.
    std::vector<double> discounted_returns() const;
};

/// Momentum SGD with L2 weight decay folded into the gradient
/// (v = mu*v + g + wd*theta; theta -= lr*v).
class SgdMomentum {
public:
    SgdMomentum(double momentum = 0.9, double weight_decay = 0.0005)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<Tensor2*>& params, const std::vector<Tensor2>& grads, double lr);

    const std::vector<Tensor2>& velocities() const { return velocity_; }
    void set_velocities(std::vector<Tensor2> v) { velocity_ = std::move(v); }
    double momentum() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }

private:
    double momentum_;
    double weight_decay_;
    std::vector<Tensor2> velocity_;
};

/// Cosine decay from base_lr to 0 over total_steps updates.
struct CosineSchedule {
    double base_lr = 0.01;
    long total_steps = 1;

    double lr(long step) const;
};

struct UpdateStats {
    double objective = 0.0;
    double grad_norm = 0.0;
};

/// Policy-gradient ascent on sum_t logpi(a^t|s^t) * A^t (default), or the
/// clipped PPO surrogate when options.mode is kPpoClip.
UpdateStats actor_update(const Trajectory& traj, PolicyParams& params, SgdMomentum& opt,
                         double lr, const AgentOptions& options);

/// Gradient descent on sum_t (V(s^t) - G^t)^2.
UpdateStats critic_update(const Trajectory& traj, CriticParams& params, SgdMomentum& opt,
                          double lr, double grad_clip = 0.0);

/// Gradient accumulation helpers shared by the updates and the gradient
/// tests: sum of d(loss)/d(param) over per-step graphs.
std::vector<Tensor2> actor_loss_gradients(const Trajectory& traj, const PolicyParams& params,
                                          const AgentOptions& options, double* loss_out);
std::vector<Tensor2> critic_loss_gradients(const Trajectory& traj, const CriticParams& params,
                                           double* loss_out);

}  // namespace evorl
