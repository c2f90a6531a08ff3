#include "evorl/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace evorl {

FdReport finite_diff_check(const std::function<double()>& f,
                           const std::vector<Tensor2*>& params,
                           const std::vector<Tensor2>& analytic,
                           double h) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: params/analytic size mismatch");

    FdReport report;
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor2& t = *params[p];
        if (!t.same_shape(analytic[p]))
            throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
        for (size_t i = 0; i < t.data.size(); ++i) {
            const double saved = t.data[i];
            t.data[i] = saved + h;
            const double fp = f();
            t.data[i] = saved - h;
            const double fm = f();
            t.data[i] = saved;

            const double gn = (fp - fm) / (2.0 * h);
            const double ga = analytic[p].data[i];
            const double abs_err = std::fabs(ga - gn);
            const double rel_err = abs_err / std::max({1.0, std::fabs(ga), std::fabs(gn)});
            if (rel_err > report.max_rel_err) {
                report.max_rel_err = rel_err;
                report.worst_param = std::to_string(p) + ":" + std::to_string(i);
            }
            report.max_abs_err = std::max(report.max_abs_err, abs_err);
        }
    }
    return report;
}

}  // namespace evorl
