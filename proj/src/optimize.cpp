#include "rvs/optimize.hpp"

#include <algorithm>
#include <numeric>

namespace rvs {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opt, const Vector* steps) {
    const int d = static_cast<int>(x0.size());
    const double refl = 1.0, expa = 2.0, contr = 0.5, shrink = 0.5;

    std::vector<Vector> xs(d + 1, x0);
    for (int i = 0; i < d; ++i) xs[i + 1](i) += steps ? (*steps)(i) : 0.5;
    std::vector<double> fs(d + 1);
    for (int i = 0; i <= d; ++i) fs[i] = f(xs[i]);

    std::vector<int> order(d + 1);
    NelderMeadResult res;
    int iter = 0;
    for (; iter < opt.max_iters; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = order[0], worst = order[d], second = order[d - 1];

        if (fs[worst] - fs[best] <= opt.tol * (1.0 + std::abs(fs[best]))) {
            res.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(d);
        for (int i = 0; i <= d; ++i)
            if (i != worst) centroid += xs[i];
        centroid /= d;

        const Vector xr = centroid + refl * (centroid - xs[worst]);
        const double fr = f(xr);
        if (fr < fs[best]) {
            const Vector xe = centroid + expa * (xr - centroid);
            const double fe = f(xe);
            if (fe < fr) { xs[worst] = xe; fs[worst] = fe; }
            else { xs[worst] = xr; fs[worst] = fr; }
        } else if (fr < fs[second]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            Vector xc;
            if (outside) xc = centroid + contr * (xr - centroid);
            else xc = centroid - contr * (centroid - xs[worst]);
            const double fc = f(xc);
            if (fc < std::min(fr, fs[worst])) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                for (int i = 0; i <= d; ++i) {
                    if (i == best) continue;
                    xs[i] = xs[best] + shrink * (xs[i] - xs[best]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }

    const auto it = std::min_element(fs.begin(), fs.end());
    res.x = xs[static_cast<std::size_t>(it - fs.begin())];
    res.value = *it;
    res.iters = iter;
    return res;
}

}  // namespace rvs
