#pragma once

#include "rvs/common.hpp"

namespace rvs {

struct NelderMeadOptions {
    int max_iters = 2000;
    double tol = 1e-6;  // converged when the simplex value spread falls below tol*(1+|best|)
};

struct NelderMeadResult {
    Vector x;
    double value = 0.0;
    int iters = 0;
    bool converged = false;
};

/// Derivative-free simplex minimization. `steps` sets the initial simplex
/// edge per coordinate (defaults to 0.5).
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opt, const Vector* steps = nullptr);

}  // namespace rvs
