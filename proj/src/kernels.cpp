#include "rvs/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace rvs {

double dc_eval(int t, int s, const DcParams& p) {
    return p.c * p.c * std::exp(-p.alpha * (t + s)) * std::exp(-p.beta * std::abs(t - s));
}

DcEigenpair dc_eigenpair(int i, const DcParams& p, EigenfunctionSign sign) {
    if (i < 1) throw Error("dc_eigenpair: index must be >= 1");
    const double k = (i - 0.5) * M_PI;
    const double eps = 1.0 / (k * k);
    const double alpha = p.alpha, beta = p.beta;
    const double expo = (sign == EigenfunctionSign::AsPrinted) ? (-alpha + beta) : (-alpha - beta);
    auto psi = [k, expo, beta](int t) {
        const double x = k * std::exp(-2.0 * beta * t);
        // Fuse the growing envelope with sin(x) ~ x to avoid overflow * underflow.
        if (x < 1e-8)
            return std::sqrt(2.0) * k * std::exp((expo - 2.0 * beta) * t);
        return std::sqrt(2.0) * std::exp(expo * t) * std::sin(x);
    };
    return {eps, psi};
}

double zeta_eval(int t, const ZetaSpec& z, const DcParams& k1) {
    if (t < 0) return 0.0;
    if (z.variant == ZetaSpec::Variant::ExpDecay)
        return k1.c * std::exp(-(k1.alpha + k1.beta) * t);
    double acc = 0.0;
    for (int i = 1; i <= z.l; ++i) {
        const auto [eps, psi] = dc_eigenpair(i, k1, z.sign);
        acc += eps * psi(t);
    }
    return k1.c * std::sqrt(2.0) * acc;
}

Matrix dc_gram(const DcParams& p, int n) {
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) g(i, j) = g(j, i) = dc_eval(i, j, p);
    return g;
}

Vector zeta_samples(const ZetaSpec& z, const DcParams& k1, int n) {
    Vector v(n);
    for (int t = 0; t < n; ++t) v(t) = zeta_eval(t, z, k1);
    return v;
}

namespace {

double wiener_product(std::span<const int> shorter, std::span<const int> longer,
                      const ScalarKernel& k1, const ScalarFun& zeta) {
    double acc = 1.0;
    const std::size_t p = shorter.size();
    for (std::size_t i = 0; i < p; ++i) {
        acc *= causal_eval(k1, shorter[i], longer[i]);
        if (acc == 0.0) return 0.0;
    }
    for (std::size_t i = p; i < longer.size(); ++i) {
        acc *= causal_eval(zeta, longer[i]);
        if (acc == 0.0) return 0.0;
    }
    return acc;
}

}  // namespace

double wiener_kernel_eval(std::span<const int> t, std::span<const int> s,
                          double a_p, double a_q,
                          const ScalarKernel& k1, const ScalarFun& zeta) {
    if (t.empty() || s.empty()) throw Error("wiener_kernel_eval: orders must be >= 1");
    const double prod = (t.size() <= s.size()) ? wiener_product(t, s, k1, zeta)
                                               : wiener_product(s, t, k1, zeta);
    return a_p * a_q * prod;
}

double wiener_kernel_eval(std::span<const int> t, std::span<const int> s,
                          double a_p, double a_q,
                          const DcParams& k1, const ZetaSpec& z) {
    ScalarKernel kf = [&k1](int a, int b) { return dc_eval(a, b, k1); };
    ScalarFun zf = [&z, &k1](int a) { return zeta_eval(a, z, k1); };
    return wiener_kernel_eval(t, s, a_p, a_q, kf, zf);
}

namespace {

/// Wiener product at lags shifted by (x1, x2), with kappa1/zeta confined to
/// the window [0, n).
double shifted_wiener_product(std::span<const int> shorter, std::span<const int> longer,
                              int xs, int xl, const ScalarKernel& k1, const ScalarFun& zeta,
                              int n) {
    double acc = 1.0;
    const std::size_t p = shorter.size();
    for (std::size_t i = 0; i < p; ++i) {
        const int a = shorter[i] - xs, b = longer[i] - xl;
        if (a < 0 || a >= n || b < 0 || b >= n) return 0.0;
        acc *= k1(a, b);
    }
    for (std::size_t i = p; i < longer.size(); ++i) {
        const int b = longer[i] - xl;
        if (b < 0 || b >= n) return 0.0;
        acc *= zeta(b);
    }
    return acc;
}

}  // namespace

double wh_kernel_eval(std::span<const int> t, std::span<const int> s,
                      double a_p, double a_q,
                      const ScalarKernel& k1, const ScalarKernel& k2,
                      const ScalarFun& zeta, int n) {
    if (n < 1) throw Error("wh_kernel_eval: n must be >= 1");
    const bool t_short = t.size() <= s.size();
    const auto shorter = t_short ? t : s;
    const auto longer = t_short ? s : t;
    double acc = 0.0;
    for (int x1 = 0; x1 < n; ++x1) {
        for (int x2 = 0; x2 < n; ++x2) {
            const double k2v = k2(x1, x2);
            if (k2v == 0.0) continue;
            const int xs = t_short ? x1 : x2;
            const int xl = t_short ? x2 : x1;
            const double w = shifted_wiener_product(shorter, longer, xs, xl, k1, zeta, n);
            if (w != 0.0) acc += k2v * w;
        }
    }
    return a_p * a_q * acc;
}

double wh_kernel_eval(std::span<const int> t, std::span<const int> s,
                      double a_p, double a_q,
                      const DcParams& k1, const std::optional<DcParams>& k2,
                      const ZetaSpec& z, int n) {
    ScalarKernel kf = [&k1](int a, int b) { return dc_eval(a, b, k1); };
    ScalarFun zf = [&z, &k1](int a) { return zeta_eval(a, z, k1); };
    if (!k2) return wiener_kernel_eval(t, s, a_p, a_q, kf, zf);
    ScalarKernel k2f = [&k2](int a, int b) { return dc_eval(a, b, *k2); };
    return wh_kernel_eval(t, s, a_p, a_q, kf, k2f, zf, n);
}

double kernel_eval(std::span<const int> t, std::span<const int> s, const KernelHyper& h) {
    const double ap = h.a(static_cast<int>(t.size()) - 1);
    const double aq = h.a(static_cast<int>(s.size()) - 1);
    return wh_kernel_eval(t, s, ap, aq, h.k1, h.k2, h.zeta, h.n);
}

long dense_kernel_size(int L, int M) {
    long total = 0, block = 1;
    for (int m = 1; m <= M; ++m) {
        if (block > 100000 / L) throw SizeExceeded("dense kernel matrix beyond guard L^M <= 1e5");
        block *= L;
        total += block;
    }
    if (block > 100000) throw SizeExceeded("dense kernel matrix beyond guard L^M <= 1e5");
    return total;
}

Matrix dense_kernel_matrix(const KernelHyper& h) {
    h.validate();
    const int L = h.lag_span();
    const long total = dense_kernel_size(L, h.M);

    std::vector<long> block_start(h.M + 1, 0);
    long off = 0, sz = 1;
    for (int m = 1; m <= h.M; ++m) {
        block_start[m] = off;
        sz *= L;
        off += sz;
    }

    Matrix P = Matrix::Zero(total, total);
    for (int p = 1; p <= h.M; ++p) {
        for (int q = p; q <= h.M; ++q) {
            MultiIndex ti(p, L);
            long i = 0;
            do {
                MultiIndex si(q, L);
                long j = 0;
                do {
                    const double v = kernel_eval(ti.idx, si.idx, h);
                    P(block_start[p] + i, block_start[q] + j) = v;
                    if (p != q) P(block_start[q] + j, block_start[p] + i) = v;
                    ++j;
                } while (si.next());
                ++i;
            } while (ti.next());
        }
    }
    return P;
}

bool min_eig_check(const Matrix& sym, double tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const auto& ev = es.eigenvalues();
    const double spectral = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    return ev(0) >= -tol * (1.0 + spectral);
}

}  // namespace rvs
