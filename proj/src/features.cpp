#include "evorl/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evorl {

FeatureEncoder::FeatureEncoder(int dim, int categories, std::uint64_t seed)
    : dim_(dim), categories_(categories) {
    if (dim < 8) throw ConfigError("features: dim must be >= 8");
    if (categories < 1) throw ConfigError("features: categories must be >= 1");
    const int attr_len = 6 + categories;
    Rng rng(mix_seed(seed, 0xfea7ULL));
    projection_ = Tensor2::randn(attr_len, dim, 1.0 / std::sqrt(attr_len), rng);
}

std::vector<double> FeatureEncoder::region_attributes(const ClusterRegion& region,
                                                      const Scene& scene) const {
    std::vector<double> attrs;
    attrs.reserve(6 + categories_);
    attrs.push_back(region.cx / scene.width);
    attrs.push_back(region.cy / scene.height);
    attrs.push_back(region.bbox.w / scene.width);
    attrs.push_back(region.bbox.h / scene.height);
    attrs.push_back(std::log2(std::max(region.mean_px_size, 1.0)) / 3.0);
    attrs.push_back(std::min<double>(region.members.size(), 16.0) / 8.0);
    // Category profile over members (normalized histogram).
    std::vector<double> profile(categories_, 0.0);
    for (int id : region.members) {
        const SceneObject& obj = object_by_id(scene, id);
        if (obj.category >= 0 && obj.category < categories_)
            profile[obj.category] += 1.0;
    }
    if (!region.members.empty())
        for (auto& p : profile) p /= static_cast<double>(region.members.size());
    attrs.insert(attrs.end(), profile.begin(), profile.end());
    return attrs;
}

std::vector<double> FeatureEncoder::encode_patch(const ClusterRegion& region,
                                                 const Scene& scene) const {
    const std::vector<double> attrs = region_attributes(region, scene);
    std::vector<double> out(dim_, 0.0);
    for (size_t a = 0; a < attrs.size(); ++a) {
        if (attrs[a] == 0.0) continue;
        for (int j = 0; j < dim_; ++j)
            out[j] += attrs[a] * projection_.at(static_cast<int>(a), j);
    }
    for (double v : out)
        if (!std::isfinite(v)) throw std::runtime_error("encode_patch: non-finite feature");
    return out;
}

Tensor2 FeatureEncoder::encode(const std::vector<ClusterRegion>& regions,
                               const Scene& scene) const {
    Tensor2 x(static_cast<int>(regions.size()), dim_);
    for (size_t i = 0; i < regions.size(); ++i) {
        const std::vector<double> f = encode_patch(regions[i], scene);
        for (int j = 0; j < dim_; ++j) x.at(static_cast<int>(i), j) = f[j];
    }
    return x;
}

Tensor2 spatial_affinity(const std::vector<ClusterRegion>& regions) {
    constexpr double kMinDistance = 1.0;  // px; also defines S_ii = 1
    const int n = static_cast<int>(regions.size());
    if (n < 1) throw std::invalid_argument("spatial_affinity: need at least one region");
    Tensor2 s(n, n);
    for (int i = 0; i < n; ++i) {
        s.at(i, i) = 1.0 / kMinDistance;
        for (int j = i + 1; j < n; ++j) {
            const double dx = regions[i].cx - regions[j].cx;
            const double dy = regions[i].cy - regions[j].cy;
            const double dist = std::max(std::sqrt(dx * dx + dy * dy), kMinDistance);
            s.at(i, j) = 1.0 / dist;
            s.at(j, i) = s.at(i, j);
        }
    }
    return s;
}

AttentionParams AttentionParams::init(int dim, Rng& rng) {
    AttentionParams p;
    const double sd = 1.0 / std::sqrt(dim);
    p.wq = Tensor2::randn(dim, dim, sd, rng);
    p.wk = Tensor2::randn(dim, dim, sd, rng);
    p.wv = Tensor2::randn(dim, dim, sd, rng);
    return p;
}

QkvMatrices project_qkv(const Tensor2& x, const AttentionParams& params) {
    if (params.wq.rows != x.cols)
        throw std::invalid_argument("project_qkv: parameter/feature dim mismatch");
    return {matmul(x, params.wq), matmul(x, params.wk), matmul(x, params.wv)};
}

Tensor2 semantic_attention(const Tensor2& q, const Tensor2& k) {
    if (q.cols != k.cols) throw std::invalid_argument("semantic_attention: dim mismatch");
    return scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols)));
}

Tensor2 aggregate_attention(const Tensor2& sem, const Tensor2& s, const Tensor2& v,
                            AttentionFusion fusion, Tensor2* weights_out) {
    const Tensor2 fused =
        fusion == AttentionFusion::kHadamard ? hadamard(sem, s) : matmul(sem, s);
    const Tensor2 weights = softmax_rows(fused);
    if (weights_out != nullptr) *weights_out = weights;
    return matmul(weights, v);
}

AttentionState attention_forward(const Tensor2& x, const Tensor2& s,
                                 const AttentionParams& params, AttentionFusion fusion) {
    AttentionState state;
    state.x = x;
    state.s = s;
    QkvMatrices qkv = project_qkv(x, params);
    state.q = std::move(qkv.q);
    state.k = std::move(qkv.k);
    state.v = std::move(qkv.v);
    state.sem = semantic_attention(state.q, state.k);
    state.output = aggregate_attention(state.sem, s, state.v, fusion, &state.weights);
    return state;
}

}  // namespace evorl
