#include "evorl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evorl {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor2& a, const Tensor2& b) {
    throw std::invalid_argument(op + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols) + ")");
}

}  // namespace

Tensor2 Tensor2::from_values(int r, int c, std::vector<double> values) {
    if (static_cast<size_t>(r) * c != values.size())
        throw std::invalid_argument("Tensor2::from_values: element count mismatch");
    Tensor2 t;
    t.rows = r;
    t.cols = c;
    t.data = std::move(values);
    return t;
}

Tensor2 Tensor2::identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor2 Tensor2::randn(int r, int c, double sd, Rng& rng) {
    Tensor2 t(r, c);
    for (auto& v : t.data) v = rng.normal(0.0, sd);
    return t;
}

void check_finite(const Tensor2& t, const std::string& where) {
    for (double v : t.data) {
        if (!std::isfinite(v))
            throw std::runtime_error(where + ": non-finite value in result");
    }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows) shape_error("matmul", a, b);
    Tensor2 c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    }
    check_finite(c, "matmul");
    return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols) shape_error("matmul_nt", a, b);
    Tensor2 c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
            c.at(i, j) = s;
        }
    }
    check_finite(c, "matmul_nt");
    return c;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 c(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
    return c;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) shape_error("add", a, b);
    Tensor2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    check_finite(c, "add");
    return c;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) shape_error("sub", a, b);
    Tensor2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    check_finite(c, "sub");
    return c;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) shape_error("hadamard", a, b);
    Tensor2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    check_finite(c, "hadamard");
    return c;
}

Tensor2 scale(const Tensor2& a, double s) {
    Tensor2 c = a;
    for (auto& v : c.data) v *= s;
    check_finite(c, "scale");
    return c;
}

Tensor2 add_rowvec(const Tensor2& a, const Tensor2& row) {
    if (row.rows != 1 || row.cols != a.cols) shape_error("add_rowvec", a, row);
    Tensor2 c = a;
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j) c.at(i, j) += row.at(0, j);
    check_finite(c, "add_rowvec");
    return c;
}

Tensor2 softmax_rows(const Tensor2& a) {
    Tensor2 c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j) mx = std::max(mx, a.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            const double e = std::exp(a.at(i, j) - mx);
            c.at(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < a.cols; ++j) c.at(i, j) /= denom;
    }
    check_finite(c, "softmax_rows");
    return c;
}

Tensor2 log_softmax_rows(const Tensor2& a) {
    Tensor2 c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j) mx = std::max(mx, a.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < a.cols; ++j) denom += std::exp(a.at(i, j) - mx);
        const double log_denom = mx + std::log(denom);
        for (int j = 0; j < a.cols; ++j) c.at(i, j) = a.at(i, j) - log_denom;
    }
    check_finite(c, "log_softmax_rows");
    return c;
}

Tensor2 sigmoid(const Tensor2& a) {
    Tensor2 c = a;
    for (auto& v : c.data) v = 1.0 / (1.0 + std::exp(-v));
    check_finite(c, "sigmoid");
    return c;
}

Tensor2 relu(const Tensor2& a) {
    Tensor2 c = a;
    for (auto& v : c.data) v = v > 0.0 ? v : 0.0;
    return c;
}

Tensor2 exp_elem(const Tensor2& a) {
    Tensor2 c = a;
    for (auto& v : c.data) v = std::exp(v);
    check_finite(c, "exp_elem");
    return c;
}

Tensor2 min_elem(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) shape_error("min_elem", a, b);
    Tensor2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] = std::min(a.data[i], b.data[i]);
    return c;
}

Tensor2 mean_rows(const Tensor2& a) {
    Tensor2 c(1, a.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) c.at(0, j) += a.at(i, j);
    for (auto& v : c.data) v /= a.rows;
    check_finite(c, "mean_rows");
    return c;
}

double sum_all(const Tensor2& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    if (!std::isfinite(s)) throw std::runtime_error("sum_all: non-finite value in result");
    return s;
}

}  // namespace evorl
