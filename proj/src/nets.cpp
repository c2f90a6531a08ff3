#include "evorl/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace evorl {

GatedBlockParams GatedBlockParams::init(int dim, int hidden, Rng& rng) {
    if (dim < 1 || hidden < 1)
        throw std::invalid_argument("GatedBlockParams::init: dims must be positive");
    GatedBlockParams p;
    p.w1 = Tensor2::randn(dim, hidden, 1.0 / std::sqrt(dim), rng);
    p.b1 = Tensor2(1, hidden);
    p.w2 = Tensor2::randn(hidden, dim, 1.0 / std::sqrt(hidden), rng);
    p.b2 = Tensor2(1, dim);
    return p;
}

size_t GatedBlockParams::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

GatedBlockIds register_gated_block(Graph& g, const GatedBlockParams& p) {
    return {g.leaf(p.w1), g.leaf(p.b1), g.leaf(p.w2), g.leaf(p.b2)};
}

Graph::Id gated_block_forward(Graph& g, Graph::Id x, const GatedBlockIds& ids,
                              const Tensor2* dropout_mask) {
    Graph::Id h = g.relu(g.add_rowvec(g.matmul(x, ids.w1), ids.b1));
    Graph::Id gates = g.sigmoid(g.add_rowvec(g.matmul(h, ids.w2), ids.b2));
    Graph::Id out = g.hadamard(x, gates);
    if (dropout_mask != nullptr) out = g.hadamard(out, g.constant(*dropout_mask));
    return out;
}

Tensor2 make_dropout_mask(int rows, int cols, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("make_dropout_mask: p must be in [0, 1)");
    Tensor2 m(rows, cols, 1.0);
    if (p == 0.0) return m;
    const double keep = 1.0 - p;
    for (auto& v : m.data) v = rng.uniform() < p ? 0.0 : 1.0 / keep;
    return m;
}

}  // namespace evorl
