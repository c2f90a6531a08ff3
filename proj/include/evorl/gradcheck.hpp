#pragma once

#include <functional>
#include <string>
#include <vector>

#include "evorl/tensor.hpp"

namespace evorl {

struct FdReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst_param;  // "param_index:entry_index"
};

/// Central finite-difference check of analytic gradients.
///
/// `f` re-evaluates the scalar loss from the current contents of `params`
/// (entries are perturbed in place by +-h and restored). `analytic` holds
/// one gradient tensor per parameter, shape-matched. The relative error for
/// an entry uses max(1, |g_a|, |g_n|) as denominator so that near-zero
/// gradients are compared absolutely.
FdReport finite_diff_check(const std::function<double()>& f,
                           const std::vector<Tensor2*>& params,
                           const std::vector<Tensor2>& analytic,
                           double h = 1e-5);

}  // namespace evorl
