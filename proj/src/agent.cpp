#include "evorl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evorl {

PolicyParams PolicyParams::init(int dim, int gate_hidden, int num_actions, Rng& rng) {
    PolicyParams p;
    p.attention = AttentionParams::init(dim, rng);
    p.gate = GatedBlockParams::init(dim, gate_hidden, rng);
    // Small head so the initial policy is close to uniform.
    p.head_w = Tensor2::randn(dim, num_actions, 0.01, rng);
    p.head_b = Tensor2(1, num_actions);
    return p;
}

std::vector<Tensor2*> PolicyParams::param_list() {
    return {&attention.wq, &attention.wk, &attention.wv, &gate.w1, &gate.b1,
            &gate.w2,      &gate.b2,      &head_w,       &head_b};
}

std::vector<const Tensor2*> PolicyParams::param_list() const {
    return {&attention.wq, &attention.wk, &attention.wv, &gate.w1, &gate.b1,
            &gate.w2,      &gate.b2,      &head_w,       &head_b};
}

size_t PolicyParams::param_count() const {
    size_t n = 0;
    for (const Tensor2* t : param_list()) n += t->size();
    return n;
}

CriticParams CriticParams::init(int dim, int gate_hidden, Rng& rng) {
    CriticParams p;
    p.gate = GatedBlockParams::init(dim, gate_hidden, rng);
    p.head_w = Tensor2::randn(dim, 1, 0.01, rng);
    p.head_b = Tensor2(1, 1);
    return p;
}

std::vector<Tensor2*> CriticParams::param_list() {
    return {&gate.w1, &gate.b1, &gate.w2, &gate.b2, &head_w, &head_b};
}

std::vector<const Tensor2*> CriticParams::param_list() const {
    return {&gate.w1, &gate.b1, &gate.w2, &gate.b2, &head_w, &head_b};
}

size_t CriticParams::param_count() const {
    size_t n = 0;
    for (const Tensor2* t : param_list()) n += t->size();
    return n;
}

PolicyForward policy_forward(Graph& g, const PolicyParams& p, const Tensor2& x,
                             const Tensor2& s, const AgentOptions& options,
                             const Tensor2* dropout_mask) {
    PolicyForward out;
    const Graph::Id wq = g.leaf(p.attention.wq);
    const Graph::Id wk = g.leaf(p.attention.wk);
    const Graph::Id wv = g.leaf(p.attention.wv);
    const GatedBlockIds gate = register_gated_block(g, p.gate);
    const Graph::Id head_w = g.leaf(p.head_w);
    const Graph::Id head_b = g.leaf(p.head_b);
    out.params = {wq, wk, wv, gate.w1, gate.b1, gate.w2, gate.b2, head_w, head_b};

    const Graph::Id xid = g.constant(x);
    if (options.attention_on) {
        const Graph::Id q = g.matmul(xid, wq);
        const Graph::Id k = g.matmul(xid, wk);
        const Graph::Id v = g.matmul(xid, wv);
        const Graph::Id sem = g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(x.cols));
        const Graph::Id sid = g.constant(s);
        const Graph::Id fused = options.fusion == AttentionFusion::kHadamard
                                    ? g.hadamard(sem, sid)
                                    : g.matmul(sem, sid);
        out.attended = g.matmul(g.softmax_rows(fused), v);
    } else {
        out.attended = xid;
    }

    const Graph::Id gated = gated_block_forward(g, out.attended, gate, dropout_mask);
    out.logits = g.add_rowvec(g.matmul(gated, head_w), head_b);
    out.logp = g.log_softmax_rows(out.logits);
    return out;
}

CriticForward critic_forward(Graph& g, const CriticParams& p, const Tensor2& pooled,
                             const Tensor2* dropout_mask) {
    CriticForward out;
    const GatedBlockIds gate = register_gated_block(g, p.gate);
    const Graph::Id head_w = g.leaf(p.head_w);
    const Graph::Id head_b = g.leaf(p.head_b);
    out.params = {gate.w1, gate.b1, gate.w2, gate.b2, head_w, head_b};

    const Graph::Id input = g.constant(pooled);
    const Graph::Id gated = gated_block_forward(g, input, gate, dropout_mask);
    out.value = g.add_rowvec(g.matmul(gated, head_w), head_b);
    return out;
}

ActionSample sample_actions(const Tensor2& logp, Rng& rng) {
    ActionSample out;
    out.actions.reserve(logp.rows);
    out.logp_chosen.reserve(logp.rows);
    for (int i = 0; i < logp.rows; ++i) {
        double u = rng.uniform();
        int pick = logp.cols - 1;
        for (int j = 0; j < logp.cols; ++j) {
            u -= std::exp(logp.at(i, j));
            if (u < 0.0) {
                pick = j;
                break;
            }
        }
        out.actions.push_back(pick);
        out.logp_chosen.push_back(logp.at(i, pick));
    }
    return out;
}

ActionSample argmax_actions(const Tensor2& logp) {
    ActionSample out;
    out.actions.reserve(logp.rows);
    out.logp_chosen.reserve(logp.rows);
    for (int i = 0; i < logp.rows; ++i) {
        int pick = 0;
        for (int j = 1; j < logp.cols; ++j)
            if (logp.at(i, j) > logp.at(i, pick)) pick = j;
        out.actions.push_back(pick);
        out.logp_chosen.push_back(logp.at(i, pick));
    }
    return out;
}

double advantage(double reward, double value, double next_value, double gamma) {
    if (gamma <= 0.0 || gamma > 1.0)
        throw std::invalid_argument("advantage: gamma must be in (0, 1]");
    return reward + gamma * next_value - value;
}

std::vector<double> Trajectory::advantages() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(advantage(s.reward, s.value, s.next_value, gamma));
    return out;
}

std::vector<double> Trajectory::discounted_returns() const {
    std::vector<double> out(steps.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(steps.size()) - 1; t >= 0; --t) {
        acc = steps[t].reward + gamma * acc;
        out[t] = acc;
    }
    return out;
}

void SgdMomentum::step(const std::vector<Tensor2*>& params, const std::vector<Tensor2>& grads,
                       double lr) {
    if (params.size() != grads.size())
        throw std::invalid_argument("SgdMomentum::step: params/grads size mismatch");
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const Tensor2* p : params) velocity_.emplace_back(p->rows, p->cols);
    }
    if (velocity_.size() != params.size())
        throw std::invalid_argument("SgdMomentum::step: optimizer state size mismatch");

    for (size_t k = 0; k < params.size(); ++k) {
        Tensor2& theta = *params[k];
        Tensor2& v = velocity_[k];
        const Tensor2& g = grads[k];
        if (!theta.same_shape(g) || !theta.same_shape(v))
            throw std::invalid_argument("SgdMomentum::step: shape mismatch");
        for (size_t i = 0; i < theta.data.size(); ++i) {
            v.data[i] = momentum_ * v.data[i] + g.data[i] + weight_decay_ * theta.data[i];
            theta.data[i] -= lr * v.data[i];
        }
    }
}

double CosineSchedule::lr(long step) const {
    const long s = std::clamp(step, 0L, total_steps);
    return 0.5 * base_lr *
           (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(s) / total_steps));
}

namespace {

double accumulate_grads(Graph& g, Graph::Id loss, const std::vector<Graph::Id>& param_ids,
                        std::vector<Tensor2>& acc) {
    g.backward(loss);
    for (size_t k = 0; k < param_ids.size(); ++k) {
        const Tensor2& grad = g.grad(param_ids[k]);
        if (acc[k].size() == 0) acc[k] = grad;
        else acc[k] = add(acc[k], grad);
    }
    return g.value(loss).at(0, 0);
}

std::vector<Tensor2> zero_like(const std::vector<const Tensor2*>& params) {
    std::vector<Tensor2> out;
    out.reserve(params.size());
    for (const Tensor2* p : params) out.emplace_back(p->rows, p->cols);
    return out;
}

double grad_norm(const std::vector<Tensor2>& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

void clip_grads(std::vector<Tensor2>& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = grad_norm(grads);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& g : grads)
        for (double& v : g.data) v *= scale;
}

// Clipped-surrogate advantages: zero-mean unit-variance across the batch,
// skipped for degenerate batches.
std::vector<double> normalized_advantages(const Trajectory& traj) {
    std::vector<double> adv = traj.advantages();
    if (adv.size() < 2) return adv;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= adv.size();
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= adv.size();
    const double sd = std::sqrt(var);
    if (sd <= 1e-12) return adv;
    for (double& a : adv) a = (a - mean) / sd;
    return adv;
}

}  // namespace

std::vector<Tensor2> actor_loss_gradients(const Trajectory& traj, const PolicyParams& params,
                                          const AgentOptions& options, double* loss_out) {
    std::vector<Tensor2> acc = zero_like(params.param_list());
    const std::vector<double> adv = options.mode == AgentMode::kPpoClip
                                        ? normalized_advantages(traj)
                                        : traj.advantages();
    double total_loss = 0.0;

    for (size_t t = 0; t < traj.steps.size(); ++t) {
        const TrajectoryStep& step = traj.steps[t];
        Graph g;
        const Tensor2* mask = step.dropout_mask.size() > 0 ? &step.dropout_mask : nullptr;
        const PolicyForward f = policy_forward(g, params, step.features, step.affinity,
                                               options, mask);
        Graph::Id loss;
        if (options.mode == AgentMode::kReinforce) {
            // Eq.-style objective: A^t * sum_i log pi(a_i | s^t), negated for
            // the descent-form optimizer.
            Tensor2 weights(step.features.rows, g.value(f.logp).cols);
            for (int i = 0; i < weights.rows; ++i) weights.at(i, step.actions[i]) = adv[t];
            loss = g.scale(g.sum_all(g.hadamard(f.logp, g.constant(weights))), -1.0);
        } else {
            // Joint-action probability ratio against the sampling-time policy.
            Tensor2 onehot(step.features.rows, g.value(f.logp).cols);
            double old_sum = 0.0;
            for (int i = 0; i < onehot.rows; ++i) {
                onehot.at(i, step.actions[i]) = 1.0;
                old_sum += step.logp_chosen[i];
            }
            const Graph::Id picked = g.sum_all(g.hadamard(f.logp, g.constant(onehot)));
            const Graph::Id ratio = g.exp_elem(g.sub(picked, g.constant(Tensor2(1, 1, old_sum))));
            // Standard surrogate convention: mean over the batch.
            const double a = adv[t] / static_cast<double>(traj.steps.size());
            Graph::Id surrogate;
            if (a >= 0.0) {
                // min(r, 1+eps) * A
                const Graph::Id clipped =
                    g.min_elem(ratio, g.constant(Tensor2(1, 1, 1.0 + options.clip_ratio)));
                surrogate = g.scale(clipped, a);
            } else {
                // max(r, 1-eps) * A via max(x, c) = -min(-x, -c)
                const Graph::Id neg_clip = g.min_elem(
                    g.scale(ratio, -1.0), g.constant(Tensor2(1, 1, -(1.0 - options.clip_ratio))));
                surrogate = g.scale(neg_clip, -a);
            }
            loss = g.scale(surrogate, -1.0);
        }
        if (options.entropy_beta > 0.0) {
            // Negative entropy: sum_i sum_a p_ia log p_ia, weighted by beta
            // (mean-scaled alongside the surrogate in batched mode).
            const double beta = options.mode == AgentMode::kPpoClip
                                    ? options.entropy_beta / traj.steps.size()
                                    : options.entropy_beta;
            const Graph::Id neg_entropy =
                g.sum_all(g.hadamard(g.exp_elem(f.logp), f.logp));
            loss = g.add(loss, g.scale(neg_entropy, beta));
        }
        total_loss += accumulate_grads(g, loss, f.params, acc);
    }
    if (loss_out != nullptr) *loss_out = total_loss;
    return acc;
}

std::vector<Tensor2> critic_loss_gradients(const Trajectory& traj, const CriticParams& params,
                                           double* loss_out) {
    std::vector<Tensor2> acc = zero_like(params.param_list());
    const std::vector<double> returns = traj.discounted_returns();
    double total_loss = 0.0;

    for (size_t t = 0; t < traj.steps.size(); ++t) {
        const TrajectoryStep& step = traj.steps[t];
        Graph g;
        const Tensor2* mask =
            step.critic_dropout_mask.size() > 0 ? &step.critic_dropout_mask : nullptr;
        const CriticForward f = critic_forward(g, params, step.pooled, mask);
        const Graph::Id diff = g.sub(f.value, g.constant(Tensor2(1, 1, returns[t])));
        const Graph::Id loss = g.sum_all(g.hadamard(diff, diff));
        total_loss += accumulate_grads(g, loss, f.params, acc);
    }
    if (loss_out != nullptr) *loss_out = total_loss;
    return acc;
}

UpdateStats actor_update(const Trajectory& traj, PolicyParams& params, SgdMomentum& opt,
                         double lr, const AgentOptions& options) {
    UpdateStats stats;
    try {
        const int epochs = options.mode == AgentMode::kPpoClip ? options.ppo_epochs : 1;
        for (int e = 0; e < epochs; ++e) {
            double loss = 0.0;
            std::vector<Tensor2> grads = actor_loss_gradients(traj, params, options, &loss);
            stats.objective = -loss;
            stats.grad_norm = grad_norm(grads);
            clip_grads(grads, options.grad_clip);
            opt.step(params.param_list(), grads, lr);
        }
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("actor_update aborted: ") + e.what());
    }
    return stats;
}

UpdateStats critic_update(const Trajectory& traj, CriticParams& params, SgdMomentum& opt,
                          double lr, double grad_clip) {
    UpdateStats stats;
    try {
        double loss = 0.0;
        std::vector<Tensor2> grads = critic_loss_gradients(traj, params, &loss);
        stats.objective = loss;
        stats.grad_norm = grad_norm(grads);
        clip_grads(grads, grad_clip);
        opt.step(params.param_list(), grads, lr);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("critic_update aborted: ") + e.what());
    }
    return stats;
}

}  // namespace evorl
