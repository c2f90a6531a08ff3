#pragma once

#include <string>
#include <vector>

#include "evorl/rng.hpp"

namespace evorl {

/// Dense row-major matrix of doubles. The only tensor type in the repo:
/// every shape that occurs is two-dimensional (vectors are 1xC or Nx1).
struct Tensor2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    static Tensor2 from_values(int r, int c, std::vector<double> values);
    static Tensor2 identity(int n);
    static Tensor2 randn(int r, int c, double sd, Rng& rng);

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    size_t size() const { return data.size(); }
};

// All ops validate shapes (std::invalid_argument) and reject non-finite
// results (std::runtime_error), per the numerics contract.

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);  // a * b^T
Tensor2 transpose(const Tensor2& a);
Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double s);
Tensor2 add_rowvec(const Tensor2& a, const Tensor2& row);  // row is 1xC
Tensor2 softmax_rows(const Tensor2& a);
Tensor2 log_softmax_rows(const Tensor2& a);
Tensor2 sigmoid(const Tensor2& a);
Tensor2 relu(const Tensor2& a);
Tensor2 exp_elem(const Tensor2& a);
Tensor2 min_elem(const Tensor2& a, const Tensor2& b);
Tensor2 mean_rows(const Tensor2& a);  // 1xC column means
double sum_all(const Tensor2& a);

void check_finite(const Tensor2& t, const std::string& where);

}  // namespace evorl
