#pragma once

// Naive reference implementations used as independent oracles by the test
// suites. Deliberately written as plain triple loops with no shared code
// with the library kernels.

#include <cmath>
#include <vector>

#include "evorl/tensor.hpp"

namespace test_oracles {

inline evorl::Tensor2 naive_matmul(const evorl::Tensor2& a, const evorl::Tensor2& b) {
    evorl::Tensor2 c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

inline evorl::Tensor2 naive_transpose(const evorl::Tensor2& a) {
    evorl::Tensor2 c(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
    return c;
}

inline evorl::Tensor2 naive_softmax_rows(const evorl::Tensor2& a) {
    evorl::Tensor2 c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j)
            if (a.at(i, j) > mx) mx = a.at(i, j);
        double denom = 0.0;
        for (int j = 0; j < a.cols; ++j) denom += std::exp(a.at(i, j) - mx);
        for (int j = 0; j < a.cols; ++j) c.at(i, j) = std::exp(a.at(i, j) - mx) / denom;
    }
    return c;
}

// Full attention pipeline reference: E = softmax(QK^T/sqrt(d) . S) V.
inline evorl::Tensor2 naive_attention(const evorl::Tensor2& x, const evorl::Tensor2& s,
                                      const evorl::Tensor2& wq, const evorl::Tensor2& wk,
                                      const evorl::Tensor2& wv, bool hadamard_fusion = true) {
    const evorl::Tensor2 q = naive_matmul(x, wq);
    const evorl::Tensor2 k = naive_matmul(x, wk);
    const evorl::Tensor2 v = naive_matmul(x, wv);
    evorl::Tensor2 sem = naive_matmul(q, naive_transpose(k));
    const double inv = 1.0 / std::sqrt(static_cast<double>(x.cols));
    for (auto& e : sem.data) e *= inv;
    evorl::Tensor2 fused(sem.rows, sem.cols);
    if (hadamard_fusion) {
        for (size_t i = 0; i < fused.data.size(); ++i) fused.data[i] = sem.data[i] * s.data[i];
    } else {
        fused = naive_matmul(sem, s);
    }
    return naive_matmul(naive_softmax_rows(fused), v);
}

inline double max_abs_diff(const evorl::Tensor2& a, const evorl::Tensor2& b) {
    double mx = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        mx = std::max(mx, std::fabs(a.data[i] - b.data[i]));
    return mx;
}

}  // namespace test_oracles
