#include "rvs/kernels.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace rvs;
using rvs::testing::random_hyper;

TEST_CASE("dc kernel scalar values") {
    CHECK(dc_eval(0, 0, {2.0, 0.5, 0.3}) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(dc_eval(1, 0, {1.0, 1e-300, std::log(2.0)}) == doctest::Approx(0.5).epsilon(1e-12));
    // exp(-0.1*(2+1) - 0.2*|2-1|) = exp(-0.5)
    CHECK(dc_eval(2, 1, {1.0, 0.1, 0.2}) ==
          doctest::Approx(0.60653065971263342).epsilon(1e-14));
    CHECK(dc_eval(3, 7, {1.2, 0.2, 0.4}) == dc_eval(7, 3, {1.2, 0.2, 0.4}));
}

TEST_CASE("causal extension zeroes negative lags") {
    ScalarKernel k = [](int t, int s) { return dc_eval(t, s, {1.0, 1.0, 1.0}); };
    ScalarFun z = [](int t) { return std::exp(-0.3 * t); };
    CHECK(causal_eval(k, -1, 3) == 0.0);
    CHECK(causal_eval(z, -2) == 0.0);
    CHECK(causal_eval(k, 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("dc eigenpairs") {
    const DcParams p{1.0, 0.3, 0.2};
    CHECK(dc_eigenpair(1, p).eigenvalue == doctest::Approx(0.40528473456935109).epsilon(1e-14));
    CHECK(dc_eigenpair(2, p).eigenvalue ==
          doctest::Approx(0.045031637174372341).epsilon(1e-12));

    SUBCASE("series bound 2 sum eps_i stays below one up to l = 500") {
        double acc = 0.0;
        for (int i = 1; i <= 500; ++i) {
            acc += 2.0 * dc_eigenpair(i, p).eigenvalue;
            CHECK(acc < 1.0);
        }
        CHECK(acc > 0.99);  // the bound is tight
    }
}

TEST_CASE("mercer reconstruction selects the printed eigenfunction exponent") {
    const DcParams p{1.0, 0.3, 0.15};
    const int n = 8;

    auto sup_error = [&](int L, EigenfunctionSign sign) {
        double worst = 0.0;
        std::vector<DcEigenpair> pairs;
        for (int i = 1; i <= L; ++i) pairs.push_back(dc_eigenpair(i, p, sign));
        for (int t = 0; t < n; ++t)
            for (int s = 0; s < n; ++s) {
                double acc = 0.0;
                for (const auto& ep : pairs)
                    acc += ep.eigenvalue * ep.eigenfunction(t) * ep.eigenfunction(s);
                worst = std::max(worst, std::abs(acc - dc_eval(t, s, p)));
            }
        return worst;
    };

    double prev = sup_error(1, EigenfunctionSign::AsPrinted);
    for (int L : {2, 5, 10, 20, 50, 100, 200, 400}) {
        const double cur = sup_error(L, EigenfunctionSign::AsPrinted);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
    CHECK(prev < 1e-2);
    // The flipped convention does not reconstruct the kernel.
    CHECK(sup_error(400, EigenfunctionSign::Flipped) > 0.05);
}

TEST_CASE("zeta variants") {
    const DcParams k1{1.0, 0.4, std::log(2.0) - 0.4};  // alpha+beta = ln 2
    ZetaSpec z;
    z.variant = ZetaSpec::Variant::ExpDecay;
    CHECK(zeta_eval(0, z, k1) == doctest::Approx(1.0));
    CHECK(zeta_eval(3, z, k1) == doctest::Approx(0.125).epsilon(1e-12));

    SUBCASE("single-basis variant matches the eigenpair formula") {
        ZetaSpec ob;
        ob.variant = ZetaSpec::Variant::OrthoBasis;
        ob.l = 1;
        const DcParams p{1.0, 0.3, 0.2};
        const auto [eps1, psi1] = dc_eigenpair(1, p);
        for (int t : {0, 1, 4, 9})
            CHECK(zeta_eval(t, ob, p) ==
                  doctest::Approx(std::sqrt(2.0) * eps1 * psi1(t)).epsilon(1e-12));
    }
}

TEST_CASE("wiener kernel product form") {
    const DcParams k1{1.0, 0.2, 0.3};
    ZetaSpec z;

    SUBCASE("order (1,1) collapses to a1^2 kappa1") {
        const int t[] = {2}, s[] = {5};
        CHECK(wiener_kernel_eval(t, s, 0.7, 0.7, k1, z) ==
              doctest::Approx(0.49 * dc_eval(2, 5, k1)).epsilon(1e-13));
    }
    SUBCASE("unit values at zero lags") {
        const DcParams unit{1.0, 1e-12, 0.0};
        const int t[] = {0}, s[] = {0, 0};
        CHECK(wiener_kernel_eval(t, s, 1.0, 1.0, unit, z) == doctest::Approx(1.0));
    }
    SUBCASE("(2,3) matches the term-by-term product") {
        Rng rng(11);
        for (int rep = 0; rep < 10; ++rep) {
            const int t[] = {rng.uniform_int(0, 6), rng.uniform_int(0, 6)};
            const int s[] = {rng.uniform_int(0, 6), rng.uniform_int(0, 6), rng.uniform_int(0, 6)};
            const double expect = 0.5 * 0.25 * dc_eval(t[0], s[0], k1) * dc_eval(t[1], s[1], k1) *
                                  zeta_eval(s[2], z, k1);
            CHECK(wiener_kernel_eval(t, s, 0.5, 0.25, k1, z) ==
                  doctest::Approx(expect).epsilon(1e-13));
        }
    }
    SUBCASE("argument-swap symmetry") {
        Rng rng(12);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<int> t(2), s(3);
            for (auto& v : t) v = rng.uniform_int(-1, 5);
            for (auto& v : s) v = rng.uniform_int(-1, 5);
            CHECK(wiener_kernel_eval(t, s, 0.4, -0.8, k1, z) ==
                  doctest::Approx(wiener_kernel_eval(s, t, -0.8, 0.4, k1, z)).epsilon(1e-13));
        }
    }
}

TEST_CASE("two-block kernel reduces and matches brute force") {
    const DcParams k1{1.0, 0.25, 0.1}, k2{1.0, 0.4, 0.2};
    ZetaSpec z;

    SUBCASE("unit-pulse second block reduces to the single-block form") {
        ScalarKernel delta = [](int a, int b) { return (a == 0 && b == 0) ? 1.0 : 0.0; };
        ScalarKernel k1f = [&](int a, int b) { return dc_eval(a, b, k1); };
        ScalarFun zf = [&](int t) { return zeta_eval(t, z, k1); };
        Rng rng(3);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<int> t(2), s(1);
            for (auto& v : t) v = rng.uniform_int(0, 3);
            for (auto& v : s) v = rng.uniform_int(0, 3);
            CHECK(wh_kernel_eval(t, s, 1.1, -0.3, k1f, delta, zf, 4) ==
                  doctest::Approx(wiener_kernel_eval(t, s, 1.1, -0.3, k1, z)).epsilon(1e-13));
        }
    }
    SUBCASE("n = 1 window keeps a single shift") {
        const int t[] = {0}, s[] = {0};
        CHECK(wh_kernel_eval(t, s, 1.0, 1.0, k1, std::optional<DcParams>(k2), z, 1) ==
              doctest::Approx(dc_eval(0, 0, k2) * dc_eval(0, 0, k1)).epsilon(1e-13));
    }
    SUBCASE("order (1,1) matches an independent double sum") {
        const int n = 3;
        Rng rng(4);
        for (int rep = 0; rep < 20; ++rep) {
            const int t0 = rng.uniform_int(0, 2 * n - 2), s0 = rng.uniform_int(0, 2 * n - 2);
            double expect = 0.0;
            for (int x1 = 0; x1 < n; ++x1)
                for (int x2 = 0; x2 < n; ++x2) {
                    const int a = t0 - x1, b = s0 - x2;
                    if (a < 0 || a >= n || b < 0 || b >= n) continue;
                    expect += dc_eval(x1, x2, k2) * dc_eval(a, b, k1);
                }
            const int t[] = {t0}, s[] = {s0};
            CHECK(wh_kernel_eval(t, s, 1.0, 1.0, k1, std::optional<DcParams>(k2), z, n) ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("optimal-kernel factorization sanity") {
    // With kappa1 and kappa2 the outer products of the true responses and
    // zeta the response itself, the structured kernel must equal the exact
    // coefficient product h_p(t) h_q(s).
    Rng rng(7);
    const int n = 4;
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> g1(n), g2(n);
        for (auto& v : g1) v = rng.normal();
        for (auto& v : g2) v = rng.normal();
        Vector a(3);
        for (int i = 0; i < 3; ++i) a(i) = rng.uniform(-1.5, 1.5);

        ScalarKernel k1f = [&](int t, int s) {
            return (t < n && s < n) ? g1[t] * g1[s] : 0.0;
        };
        ScalarKernel k2f = [&](int t, int s) {
            return (t < n && s < n) ? g2[t] * g2[s] : 0.0;
        };
        ScalarFun zf = [&](int t) { return t < n ? g1[t] : 0.0; };

        auto h_true = [&](std::span<const int> idx) {
            const int m = static_cast<int>(idx.size());
            double acc = 0.0;
            for (int tau = 0; tau < n; ++tau) {
                double prod = g2[tau];
                for (int k = 0; k < m; ++k) {
                    const int lag = idx[k] - tau;
                    prod *= (lag >= 0 && lag < n) ? g1[lag] : 0.0;
                }
                acc += prod;
            }
            return a(m - 1) * acc;
        };

        for (int p = 1; p <= 3; ++p)
            for (int q = 1; q <= 3; ++q) {
                std::vector<int> t(p), s(q);
                for (auto& v : t) v = rng.uniform_int(0, 2 * n - 2);
                for (auto& v : s) v = rng.uniform_int(0, 2 * n - 2);
                const double expect = h_true(t) * h_true(s);
                const double got = wh_kernel_eval(t, s, a(p - 1), a(q - 1), k1f, k2f, zf, n);
                CHECK(got == doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

TEST_CASE("dense kernel matrix") {
    SUBCASE("first order collapses to the scaled Gram matrix") {
        KernelHyper h;
        h.M = 1;
        h.n = 5;
        h.a = Vector::Constant(1, 0.8);
        h.k1 = DcParams{1.0, 0.3, 0.2};
        h.sigma2 = 1.0;
        const Matrix P = dense_kernel_matrix(h);
        const Matrix K1 = dc_gram(h.k1, 5);
        CHECK(rvs::testing::rel_err_max(P, 0.64 * K1) < 1e-14);
    }
    SUBCASE("second order block layout against hand loops") {
        KernelHyper h;
        h.M = 2;
        h.n = 2;
        h.a = Vector(2);
        h.a << 0.9, -0.5;
        h.k1 = DcParams{1.0, 0.2, 0.4};
        h.sigma2 = 1.0;
        const Matrix P = dense_kernel_matrix(h);
        REQUIRE(P.rows() == 6);
        const ZetaSpec z;
        // Block (1,2), entry t = 1, (s1,s2) = (1,0): row-major column 1*2+0.
        const double expect =
            h.a(0) * h.a(1) * dc_eval(1, 1, h.k1) * zeta_eval(0, z, h.k1);
        CHECK(P(1, 2 + 2) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(rvs::testing::rel_err_max(P, P.transpose()) < 1e-14);
    }
    SUBCASE("zero coefficients give the zero matrix") {
        KernelHyper h;
        h.M = 2;
        h.n = 2;
        h.a = Vector::Zero(2);
        h.k1 = DcParams{1.0, 0.2, 0.4};
        h.sigma2 = 1.0;
        CHECK(dense_kernel_matrix(h).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("size guard") {
        KernelHyper h;
        h.M = 6;
        h.n = 10;
        h.a = Vector::Ones(6);
        h.sigma2 = 1.0;
        CHECK_THROWS_AS((void)dense_kernel_matrix(h), SizeExceeded);
    }
}

TEST_CASE("minimum-eigenvalue check") {
    CHECK(min_eig_check(Matrix::Identity(4, 4), 1e-10));
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -1.0;
    CHECK_FALSE(min_eig_check(d, 1e-10));
}

TEST_CASE("positive semidefiniteness of the structured prior") {
    Rng rng(42);
    int checked = 0;
    for (int rep = 0; rep < 25; ++rep) {
        const int M = rng.uniform_int(1, 3);
        const int n = rng.uniform_int(2, 4);
        const bool with_k2 = rng.coin();
        const auto variant = rng.coin() ? ZetaSpec::Variant::ExpDecay
                                        : ZetaSpec::Variant::OrthoBasis;
        KernelHyper h = random_hyper(rng, M, n, with_k2, variant, rng.uniform_int(1, 6));
        if (std::pow(h.lag_span(), M) > 1e4) continue;
        CHECK(min_eig_check(dense_kernel_matrix(h), 1e-8));
        ++checked;
    }
    CHECK(checked >= 15);
}

TEST_CASE("sufficient condition: kappa1 - zeta zeta^T stays PSD") {
    Rng rng(43);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 50;
        DcParams k1{1.0, std::exp(rng.uniform(std::log(1e-2), std::log(1.5))),
                    rng.uniform(0.0, 1.5)};
        for (auto variant : {ZetaSpec::Variant::ExpDecay, ZetaSpec::Variant::OrthoBasis}) {
            ZetaSpec z;
            z.variant = variant;
            z.l = rng.uniform_int(1, 12);
            const Vector zv = zeta_samples(z, k1, n);
            const Matrix diff = dc_gram(k1, n) - zv * zv.transpose();
            CHECK(min_eig_check(diff, 1e-8));
        }
    }
}
