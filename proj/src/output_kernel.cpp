#include "rvs/output_kernel.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>

namespace rvs {

RegressorMatrix build_regressor(std::span<const double> u, int n, InitPolicy policy) {
    if (n < 1) throw Error("build_regressor: memory length must be >= 1");
    const long L = static_cast<long>(u.size());
    RegressorMatrix out;
    out.policy = policy;
    out.memory = n;
    if (policy == InitPolicy::TrimToKnown) {
        if (L < n) throw InsufficientData("build_regressor: series shorter than memory length");
        out.t_offset = n;
        out.psi.resize(L - n + 1, n);
        for (long j = 0; j < out.psi.rows(); ++j) {
            const long t = n - 1 + j;
            for (int b = 0; b < n; ++b) out.psi(j, b) = u[t - b];
        }
    } else {
        out.t_offset = 1;
        out.psi.resize(L, n);
        for (long t = 0; t < L; ++t)
            for (int b = 0; b < n; ++b) out.psi(t, b) = (t - b >= 0) ? u[t - b] : 0.0;
    }
    return out;
}

Matrix dense_phi(const RegressorMatrix& psi, int M) {
    const int n = psi.memory;
    const long total = dense_kernel_size(n, M);
    const long N = psi.rows();
    Matrix phi(N, total);
    long col = 0;
    for (int m = 1; m <= M; ++m) {
        MultiIndex mi(m, n);
        do {
            for (long r = 0; r < N; ++r) {
                double v = 1.0;
                for (int k = 0; k < m; ++k) v *= psi.psi(r, mi.idx[k]);
                phi(r, col) = v;
            }
            ++col;
        } while (mi.next());
    }
    return phi;
}

Matrix qw_from_parts(const Matrix& X, const Vector& psi_rows, const Vector& psi_cols,
                     const Vector& a) {
    const int M = static_cast<int>(a.size());
    if (M < 1) throw Error("qw_from_parts: need at least one coefficient");

    // eta_m = sum_{l>=m} a_l psi^{o(l-m)}, built by downward recursion.
    std::vector<Vector> eta_r(M + 1), eta_c(M + 1);
    eta_r[M] = Vector::Constant(X.rows(), a(M - 1));
    eta_c[M] = Vector::Constant(X.cols(), a(M - 1));
    for (int m = M - 1; m >= 1; --m) {
        eta_r[m] = Vector::Constant(X.rows(), a(m - 1)) + psi_rows.cwiseProduct(eta_r[m + 1]);
        eta_c[m] = Vector::Constant(X.cols(), a(m - 1)) + psi_cols.cwiseProduct(eta_c[m + 1]);
    }

    // Group terms by min(p,q) = m: the m-th contribution is
    // X^{om} o (a_m eta_m(t) + a_m eta_m(s) - a_m^2).
    Matrix Q = Matrix::Zero(X.rows(), X.cols());
    Matrix Pm = X;
    for (int m = 1; m <= M; ++m) {
        const double am = a(m - 1);
        Q.array() += Pm.array().colwise() * (am * eta_r[m]).array();
        Q.array() += Pm.array().rowwise() * (am * eta_c[m]).transpose().array();
        Q.array() -= (am * am) * Pm.array();
        if (m < M) Pm.array() *= X.array();
    }
    return Q;
}

Matrix qw_pq_term(const Matrix& X, const Vector& psi_rows, const Vector& psi_cols,
                  const Vector& a, int p, int q) {
    const int m = std::min(p, q);
    Matrix T = X;
    for (int k = 1; k < m; ++k) T.array() *= X.array();
    if (p > m) {
        Vector w = psi_rows.array().pow(p - m);
        T.array().colwise() *= w.array();
    }
    if (q > m) {
        Vector w = psi_cols.array().pow(q - m);
        T.array().rowwise() *= w.transpose().array();
    }
    return a(p - 1) * a(q - 1) * T;
}

Matrix build_qw(const RegressorMatrix& psi, const Matrix& K1, const Vector& zeta_vec,
                const Vector& a) {
    if (K1.rows() != psi.memory || zeta_vec.size() != psi.memory)
        throw Error("build_qw: Gram/zeta dimensions must match regressor memory");
    const Matrix X = psi.psi * K1 * psi.psi.transpose();
    const Vector pv = psi.psi * zeta_vec;
    return qw_from_parts(X, pv, pv, a);
}

namespace {

/// Smallest 5-smooth integer >= x (kissfft stays fast for {2,3,5} radices).
long next_fast_len(long x) {
    if (x <= 1) return 1;
    for (long candidate = x;; ++candidate) {
        long r = candidate;
        while (r % 2 == 0) r /= 2;
        while (r % 3 == 0) r /= 3;
        while (r % 5 == 0) r /= 5;
        if (r == 1) return candidate;
    }
}

using CMatrix = Eigen::MatrixXcd;

void fft2_inplace(CMatrix& m, bool inverse) {
    Eigen::FFT<double> fft;
    Eigen::VectorXcd buf(m.rows()), out(m.rows());
    for (long c = 0; c < m.cols(); ++c) {
        buf = m.col(c);
        if (inverse) fft.inv(out, buf); else fft.fwd(out, buf);
        m.col(c) = out;
    }
    Eigen::VectorXcd rbuf(m.cols()), rout(m.cols());
    for (long r = 0; r < m.rows(); ++r) {
        rbuf = m.row(r).transpose();
        if (inverse) fft.inv(rout, rbuf); else fft.fwd(rout, rbuf);
        m.row(r) = rout.transpose();
    }
}

Matrix conv2_direct(const Matrix& A, const Matrix& B) {
    Matrix out = Matrix::Zero(A.rows() + B.rows() - 1, A.cols() + B.cols() - 1);
    for (long i = 0; i < A.rows(); ++i)
        for (long j = 0; j < A.cols(); ++j) {
            const double v = A(i, j);
            if (v != 0.0) out.block(i, j, B.rows(), B.cols()) += v * B;
        }
    return out;
}

Matrix conv2_fft(const Matrix& A, const Matrix& B) {
    const long R = A.rows() + B.rows() - 1;
    const long C = A.cols() + B.cols() - 1;
    const long PR = next_fast_len(R), PC = next_fast_len(C);
    CMatrix fa = CMatrix::Zero(PR, PC), fb = CMatrix::Zero(PR, PC);
    fa.topLeftCorner(A.rows(), A.cols()) = A.cast<std::complex<double>>();
    fb.topLeftCorner(B.rows(), B.cols()) = B.cast<std::complex<double>>();
    fft2_inplace(fa, false);
    fft2_inplace(fb, false);
    fa.array() *= fb.array();
    fb.resize(0, 0);
    fft2_inplace(fa, true);
    return fa.topLeftCorner(R, C).real();
}

}  // namespace

Matrix conv2_full(const Matrix& A, const Matrix& B, ConvRoute route) {
    if (A.size() == 0 || B.size() == 0) throw Error("conv2_full: empty operand");
    if (route == ConvRoute::Auto) {
        // Crossover measured on this workload; direct wins only for small
        // kernel-times-matrix products.
        const double direct_work = static_cast<double>(A.size()) * static_cast<double>(B.size());
        route = direct_work <= 3.4e7 ? ConvRoute::Direct : ConvRoute::Fft;
    }
    return route == ConvRoute::Direct ? conv2_direct(A, B) : conv2_fft(A, B);
}

Matrix conv2_full(const Matrix& A, const Matrix& B) {
    return conv2_full(A, B, ConvRoute::Auto);
}

Matrix conv2_q(const Matrix& K2, const Matrix& qw) {
    return conv2_full(K2, qw).topLeftCorner(qw.rows(), qw.cols());
}

long row_trim(const RegressorMatrix& psi, int lag_span) {
    return psi.policy == InitPolicy::TrimToKnown ? lag_span - psi.memory : 0;
}

Matrix build_cross_q(const RegressorMatrix& psi_test, const RegressorMatrix& psi_train,
                     const Matrix& K1, const std::optional<Matrix>& K2,
                     const Vector& zeta_vec, const Vector& a) {
    if (psi_test.memory != psi_train.memory)
        throw Error("build_cross_q: regressors must share the memory length");
    const Matrix Xc = psi_test.psi * K1 * psi_train.psi.transpose();
    const Vector pt = psi_test.psi * zeta_vec;
    const Vector ps = psi_train.psi * zeta_vec;
    Matrix qwc = qw_from_parts(Xc, pt, ps, a);
    if (!K2) return qwc;

    const int n = psi_test.memory;
    const int span = 2 * n - 1;
    const Matrix c = conv2_full(*K2, qwc).topLeftCorner(qwc.rows(), qwc.cols());
    const long ro = row_trim(psi_test, span), co = row_trim(psi_train, span);
    if (c.rows() <= ro || c.cols() <= co)
        throw InsufficientData("build_cross_q: not enough rows for the two-block lag span");
    return c.block(ro, co, c.rows() - ro, c.cols() - co);
}

OutputKernel build_output_kernel(const RegressorMatrix& psi, const KernelHyper& h) {
    if (psi.memory != h.n) throw Error("build_output_kernel: regressor memory != hyper n");
    const Matrix K1 = dc_gram(h.k1, h.n);
    const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
    Matrix qw = build_qw(psi, K1, zv, h.a);
    if (!h.k2) return {std::move(qw), 0};

    const Matrix K2 = dc_gram(*h.k2, h.n);
    const Matrix c = conv2_q(K2, qw);
    const long off = row_trim(psi, h.lag_span());
    if (c.rows() <= off)
        throw InsufficientData("build_output_kernel: not enough rows for the two-block lag span");
    return {c.block(off, off, c.rows() - off, c.cols() - off), off};
}

}  // namespace rvs
