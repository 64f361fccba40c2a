#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace nrs {

// Central-difference verification of an analytic gradient. The scalar
// function and its gradient are both evaluated on a flat parameter vector;
// returns max over parameters of |analytic - central| / max(1, |central|).
inline double grad_check(const std::function<double(std::span<const double>)> &f,
                         const std::function<std::vector<double>(std::span<const double>)> &grad,
                         std::span<const double> params, double eps = 1e-5) {
    if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<double> p(params.begin(), params.end());
    const std::vector<double> analytic = grad(p);
    if (analytic.size() != p.size())
        throw std::invalid_argument("grad_check: gradient size mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + eps;
        const double fp = f(p);
        p[i] = saved - eps;
        const double fm = f(p);
        p[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("grad_check: non-finite function value");
        const double central = (fp - fm) / (2 * eps);
        const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace nrs
