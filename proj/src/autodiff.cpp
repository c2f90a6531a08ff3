#include "evorl/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace evorl {

Graph::Id Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
}

Graph::Id Graph::check(Id id) const {
    if (id < 0 || id >= static_cast<Id>(nodes_.size()))
        throw std::invalid_argument("Graph: invalid node id");
    return id;
}

Graph::Id Graph::constant(Tensor2 v) { return push({Op::kConst, -1, -1, 0.0, std::move(v), {}}); }
Graph::Id Graph::leaf(Tensor2 v) { return push({Op::kLeaf, -1, -1, 0.0, std::move(v), {}}); }

Graph::Id Graph::matmul(Id a, Id b) {
    return push({Op::kMatmul, check(a), check(b), 0.0, evorl::matmul(value(a), value(b)), {}});
}
Graph::Id Graph::matmul_nt(Id a, Id b) {
    return push({Op::kMatmulNT, check(a), check(b), 0.0, evorl::matmul_nt(value(a), value(b)), {}});
}
Graph::Id Graph::add(Id a, Id b) {
    return push({Op::kAdd, check(a), check(b), 0.0, evorl::add(value(a), value(b)), {}});
}
Graph::Id Graph::sub(Id a, Id b) {
    return push({Op::kSub, check(a), check(b), 0.0, evorl::sub(value(a), value(b)), {}});
}
Graph::Id Graph::add_rowvec(Id a, Id row) {
    return push({Op::kAddRowvec, check(a), check(row), 0.0, evorl::add_rowvec(value(a), value(row)), {}});
}
Graph::Id Graph::hadamard(Id a, Id b) {
    return push({Op::kHadamard, check(a), check(b), 0.0, evorl::hadamard(value(a), value(b)), {}});
}
Graph::Id Graph::scale(Id a, double s) {
    return push({Op::kScale, check(a), -1, s, evorl::scale(value(a), s), {}});
}
Graph::Id Graph::softmax_rows(Id a) {
    return push({Op::kSoftmaxRows, check(a), -1, 0.0, evorl::softmax_rows(value(a)), {}});
}
Graph::Id Graph::log_softmax_rows(Id a) {
    return push({Op::kLogSoftmaxRows, check(a), -1, 0.0, evorl::log_softmax_rows(value(a)), {}});
}
Graph::Id Graph::sigmoid(Id a) {
    return push({Op::kSigmoid, check(a), -1, 0.0, evorl::sigmoid(value(a)), {}});
}
Graph::Id Graph::relu(Id a) {
    return push({Op::kRelu, check(a), -1, 0.0, evorl::relu(value(a)), {}});
}
Graph::Id Graph::exp_elem(Id a) {
    return push({Op::kExp, check(a), -1, 0.0, evorl::exp_elem(value(a)), {}});
}
Graph::Id Graph::min_elem(Id a, Id b) {
    return push({Op::kMinElem, check(a), check(b), 0.0, evorl::min_elem(value(a), value(b)), {}});
}
Graph::Id Graph::mean_rows(Id a) {
    return push({Op::kMeanRows, check(a), -1, 0.0, evorl::mean_rows(value(a)), {}});
}
Graph::Id Graph::sum_all(Id a) {
    Tensor2 v(1, 1);
    v.at(0, 0) = evorl::sum_all(value(check(a)));
    return push({Op::kSumAll, a, -1, 0.0, std::move(v), {}});
}

const Tensor2& Graph::grad(Id id) const {
    if (!backward_done_) throw std::logic_error("Graph::grad: backward() has not run");
    return nodes_[check(id)].grad;
}

void Graph::backward(Id loss) {
    if (nodes_.empty()) throw std::logic_error("Graph::backward: empty graph");
    check(loss);
    const Tensor2& lv = nodes_[loss].val;
    if (lv.rows != 1 || lv.cols != 1)
        throw std::invalid_argument("Graph::backward: loss must be 1x1");

    for (auto& n : nodes_) n.grad = Tensor2(n.val.rows, n.val.cols);
    nodes_[loss].grad.at(0, 0) = 1.0;

    for (Id id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        const Tensor2& g = n.grad;
        switch (n.op) {
            case Op::kLeaf:
            case Op::kConst:
                break;
            case Op::kMatmul: {
                // c = a*b: da += g*b^T, db += a^T*g
                Node& na = nodes_[n.a];
                Node& nb = nodes_[n.b];
                na.grad = evorl::add(na.grad, evorl::matmul_nt(g, nb.val));
                nb.grad = evorl::add(nb.grad, evorl::matmul(evorl::transpose(na.val), g));
                break;
            }
            case Op::kMatmulNT: {
                // c = a*b^T: da += g*b, db += g^T*a
                Node& na = nodes_[n.a];
                Node& nb = nodes_[n.b];
                na.grad = evorl::add(na.grad, evorl::matmul(g, nb.val));
                nb.grad = evorl::add(nb.grad, evorl::matmul(evorl::transpose(g), na.val));
                break;
            }
            case Op::kAdd:
                nodes_[n.a].grad = evorl::add(nodes_[n.a].grad, g);
                nodes_[n.b].grad = evorl::add(nodes_[n.b].grad, g);
                break;
            case Op::kSub:
                nodes_[n.a].grad = evorl::add(nodes_[n.a].grad, g);
                nodes_[n.b].grad = evorl::sub(nodes_[n.b].grad, g);
                break;
            case Op::kAddRowvec: {
                nodes_[n.a].grad = evorl::add(nodes_[n.a].grad, g);
                Tensor2& rg = nodes_[n.b].grad;
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) rg.at(0, j) += g.at(i, j);
                break;
            }
            case Op::kHadamard:
                nodes_[n.a].grad = evorl::add(nodes_[n.a].grad, evorl::hadamard(g, nodes_[n.b].val));
                nodes_[n.b].grad = evorl::add(nodes_[n.b].grad, evorl::hadamard(g, nodes_[n.a].val));
                break;
            case Op::kScale:
                nodes_[n.a].grad = evorl::add(nodes_[n.a].grad, evorl::scale(g, n.s));
                break;
            case Op::kSoftmaxRows: {
                // dx_ij = y_ij * (g_ij - sum_k g_ik y_ik)
                Tensor2& ag = nodes_[n.a].grad;
                const Tensor2& y = n.val;
                for (int i = 0; i < y.rows; ++i) {
                    double dot = 0.0;
                    for (int k = 0; k < y.cols; ++k) dot += g.at(i, k) * y.at(i, k);
                    for (int j = 0; j < y.cols; ++j)
                        ag.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                }
                break;
            }
            case Op::kLogSoftmaxRows: {
                // dx_ij = g_ij - softmax(x)_ij * sum_k g_ik
                Tensor2& ag = nodes_[n.a].grad;
                const Tensor2& y = n.val;
                for (int i = 0; i < y.rows; ++i) {
                    double rowsum = 0.0;
                    for (int k = 0; k < y.cols; ++k) rowsum += g.at(i, k);
                    for (int j = 0; j < y.cols; ++j)
                        ag.at(i, j) += g.at(i, j) - std::exp(y.at(i, j)) * rowsum;
                }
                break;
            }
            case Op::kSigmoid: {
                Tensor2& ag = nodes_[n.a].grad;
                const Tensor2& y = n.val;
                for (size_t i = 0; i < y.data.size(); ++i)
                    ag.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
                break;
            }
            case Op::kRelu: {
                Tensor2& ag = nodes_[n.a].grad;
                const Tensor2& x = nodes_[n.a].val;
                for (size_t i = 0; i < x.data.size(); ++i)
                    if (x.data[i] > 0.0) ag.data[i] += g.data[i];
                break;
            }
            case Op::kExp: {
                Tensor2& ag = nodes_[n.a].grad;
                const Tensor2& y = n.val;
                for (size_t i = 0; i < y.data.size(); ++i) ag.data[i] += g.data[i] * y.data[i];
                break;
            }
            case Op::kMinElem: {
                // Route to the smaller input; ties go to the first argument.
                Tensor2& ag = nodes_[n.a].grad;
                Tensor2& bg = nodes_[n.b].grad;
                const Tensor2& av = nodes_[n.a].val;
                const Tensor2& bv = nodes_[n.b].val;
                for (size_t i = 0; i < av.data.size(); ++i) {
                    if (av.data[i] <= bv.data[i]) ag.data[i] += g.data[i];
                    else bg.data[i] += g.data[i];
                }
                break;
            }
            case Op::kMeanRows: {
                Tensor2& ag = nodes_[n.a].grad;
                const double inv = 1.0 / nodes_[n.a].val.rows;
                for (int i = 0; i < ag.rows; ++i)
                    for (int j = 0; j < ag.cols; ++j) ag.at(i, j) += g.at(0, j) * inv;
                break;
            }
            case Op::kSumAll: {
                Tensor2& ag = nodes_[n.a].grad;
                const double gv = g.at(0, 0);
                for (auto& v : ag.data) v += gv;
                break;
            }
        }
    }

    for (const auto& n : nodes_) check_finite(n.grad, "Graph::backward");
    backward_done_ = true;
}

}  // namespace evorl
