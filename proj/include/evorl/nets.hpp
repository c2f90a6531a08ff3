#pragma once

#include <vector>

#include "evorl/autodiff.hpp"
#include "evorl/rng.hpp"
#include "evorl/tensor.hpp"

namespace evorl {

/// Squeeze-and-excitation style block: a two-layer gate MLP produces
/// per-channel sigmoid gates that multiply the input row-wise.
struct GatedBlockParams {
    Tensor2 w1, b1;  // d x h, 1 x h
    Tensor2 w2, b2;  // h x d, 1 x d

    static GatedBlockParams init(int dim, int hidden, Rng& rng);
    size_t param_count() const;
};

struct GatedBlockIds {
    Graph::Id w1, b1, w2, b2;
};

GatedBlockIds register_gated_block(Graph& g, const GatedBlockParams& p);

/// Forward through the gate. `dropout_mask` (same shape as x), when non-null,
/// is applied to the gated output; masks are pre-scaled by 1/keep_prob.
Graph::Id gated_block_forward(Graph& g, Graph::Id x, const GatedBlockIds& ids,
                              const Tensor2* dropout_mask = nullptr);

/// Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p).
Tensor2 make_dropout_mask(int rows, int cols, double p, Rng& rng);

}  // namespace evorl
