#pragma once

#include <functional>
#include <vector>

#include "evorl/tensor.hpp"

namespace evorl {

/// Reverse-mode tape over the tensor ops used by the attention, policy and
/// critic networks. Forward values are computed eagerly as nodes are added;
/// backward() fills d(loss)/d(node) for every node, including leaves, so one
/// mechanism serves parameter gradients and input Jacobians alike.
///
/// A Graph is single-use per forward pass: build, backward once, read grads.
class Graph {
public:
    using Id = int;

    /// Non-differentiable node; its gradient is tracked but usually ignored.
    Id constant(Tensor2 v);
    /// Differentiable leaf (parameter or input).
    Id leaf(Tensor2 v);

    Id matmul(Id a, Id b);
    Id matmul_nt(Id a, Id b);  // a * b^T
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id add_rowvec(Id a, Id row);
    Id hadamard(Id a, Id b);
    Id scale(Id a, double s);
    Id softmax_rows(Id a);
    Id log_softmax_rows(Id a);
    Id sigmoid(Id a);
    Id relu(Id a);
    Id exp_elem(Id a);
    Id min_elem(Id a, Id b);
    Id mean_rows(Id a);
    Id sum_all(Id a);  // 1x1

    const Tensor2& value(Id id) const { return nodes_[check(id)].val; }

    /// Reverse sweep from a 1x1 loss node. Throws if the graph is empty, the
    /// node is not scalar, or any accumulated gradient is non-finite.
    void backward(Id loss);

    /// Gradient of the last backward()'s loss w.r.t. this node.
    const Tensor2& grad(Id id) const;

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf, kConst, kMatmul, kMatmulNT, kAdd, kSub, kAddRowvec, kHadamard,
        kScale, kSoftmaxRows, kLogSoftmaxRows, kSigmoid, kRelu, kExp, kMinElem,
        kMeanRows, kSumAll,
    };

    struct Node {
        Op op;
        Id a = -1;
        Id b = -1;
        double s = 0.0;
        Tensor2 val;
        Tensor2 grad;
    };

    Id push(Node n);
    Id check(Id id) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace evorl
