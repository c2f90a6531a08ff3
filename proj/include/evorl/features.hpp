#pragma once

#include <cstdint>
#include <vector>

#include "evorl/scene.hpp"
#include "evorl/tensor.hpp"

namespace evorl {

enum class AttentionFusion { kHadamard, kMatmul };

/// Deterministic surrogate patch encoder: normalized region attributes
/// (position, extent, log size, member count, category profile) pushed
/// through a fixed seeded random projection to dimension d.
class FeatureEncoder {
public:
    FeatureEncoder(int dim, int categories, std::uint64_t seed = 9001);

    int dim() const { return dim_; }

    std::vector<double> region_attributes(const ClusterRegion& region, const Scene& scene) const;
    std::vector<double> encode_patch(const ClusterRegion& region, const Scene& scene) const;
    /// Rows are encode_patch of each region.
    Tensor2 encode(const std::vector<ClusterRegion>& regions, const Scene& scene) const;

private:
    int dim_;
    int categories_;
    Tensor2 projection_;  // attr_len x dim
};

/// S_ij = 1 / max(center distance, 1 px); symmetric, strictly positive.
Tensor2 spatial_affinity(const std::vector<ClusterRegion>& regions);

struct AttentionParams {
    Tensor2 wq, wk, wv;  // d x d, no bias

    static AttentionParams init(int dim, Rng& rng);
    size_t param_count() const { return wq.size() + wk.size() + wv.size(); }
};

struct QkvMatrices {
    Tensor2 q, k, v;
};

QkvMatrices project_qkv(const Tensor2& x, const AttentionParams& params);

/// Q*K^T / sqrt(d).
Tensor2 semantic_attention(const Tensor2& q, const Tensor2& k);

/// E = row_softmax(sem . S) * V where "." is elementwise (default) or matrix
/// product, per the fusion switch. `weights_out`, when non-null, receives the
/// row-stochastic attention weights.
Tensor2 aggregate_attention(const Tensor2& sem, const Tensor2& s, const Tensor2& v,
                            AttentionFusion fusion = AttentionFusion::kHadamard,
                            Tensor2* weights_out = nullptr);

struct AttentionState {
    Tensor2 x, s, q, k, v, sem, weights, output;
};

/// Full Eq.-style pipeline X -> (Q,K,V) -> fused affinity -> E.
AttentionState attention_forward(const Tensor2& x, const Tensor2& s,
                                 const AttentionParams& params,
                                 AttentionFusion fusion = AttentionFusion::kHadamard);

}  // namespace evorl
