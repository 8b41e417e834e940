#pragma once

#include "rvs/kernels.hpp"

#include <span>

namespace rvs {

enum class InitPolicy { PreWindowZero, TrimToKnown };

/// Toeplitz lagged-input matrix: row j holds [u(t), u(t-1), ..., u(t-n+1)]
/// for t = first_time() + j. PreWindowZero fabricates zeros for pre-record
/// lags; TrimToKnown keeps only rows whose lags are all in-record.
struct RegressorMatrix {
    Matrix psi;
    InitPolicy policy = InitPolicy::TrimToKnown;
    int memory = 1;
    long t_offset = 1;  // 1-based ordinal of the first retained output sample

    long rows() const { return psi.rows(); }
    long first_time() const { return t_offset - 1; }  // 0-based sample index of row 0
};

RegressorMatrix build_regressor(std::span<const double> u, int n, InitPolicy policy);

/// Monomial regressor: block m holds all degree-m monomials of the lagged
/// inputs, multi-indices row-major. Oracle-sized only (memory^M <= 1e5).
Matrix dense_phi(const RegressorMatrix& psi, int M);

/// Output Gram matrix of the Wiener-form kernel:
///   Qw(t,s) = sum_{p,q} a_p a_q X(t,s)^{min(p,q)} psi(t)^{(p-q)+} psi(s)^{(q-p)+}
/// with X = Psi K1 Psi^T and psi = Psi zeta, accumulated through Hadamard
/// powers of X; the rank-one column factor is never materialized.
Matrix build_qw(const RegressorMatrix& psi, const Matrix& K1, const Vector& zeta_vec,
                const Vector& a);

/// Same accumulation for a cross block X = Psi_test K1 Psi_train^T with
/// per-side psi vectors.
Matrix qw_from_parts(const Matrix& X, const Vector& psi_rows, const Vector& psi_cols,
                     const Vector& a);

/// Single (p,q) contribution a_p a_q X^{min} o psi-power scalings (test support).
Matrix qw_pq_term(const Matrix& X, const Vector& psi_rows, const Vector& psi_cols,
                  const Vector& a, int p, int q);

/// Full 2-D convolution of A (small kernel) against B, cropped to B's shape
/// with (0,0) alignment: out(k,l) = sum_{i,j} A(i,j) B(k-i, l-j).
Matrix conv2_q(const Matrix& K2, const Matrix& qw);

/// Uncropped 2-D convolution, shape (A.rows+B.rows-1) x (A.cols+B.cols-1).
Matrix conv2_full(const Matrix& A, const Matrix& B);

/// Force a particular convolution route (equality testing / benchmarks).
enum class ConvRoute { Auto, Direct, Fft };
Matrix conv2_full(const Matrix& A, const Matrix& B, ConvRoute route);

/// Cross output-kernel block between test and train regressors, including
/// the kappa2 convolution and the lag-span alignment implied by each side's
/// init policy. Row i maps to test output time psi_test.first_time() +
/// row_trim(psi_test) + i, and likewise for columns on the train side.
Matrix build_cross_q(const RegressorMatrix& psi_test, const RegressorMatrix& psi_train,
                     const Matrix& K1, const std::optional<Matrix>& K2,
                     const Vector& zeta_vec, const Vector& a);

/// Rows dropped from a regressor's Q so entries align with the model lag
/// span: (lag_span - memory) under TrimToKnown, zero under PreWindowZero.
long row_trim(const RegressorMatrix& psi, int lag_span);

/// Train-side output kernel for a hyperparameter set: builds K1, zeta, Qw,
/// applies the kappa2 convolution when present, and slices to output rows.
struct OutputKernel {
    Matrix q;
    long row_offset;  // rows dropped from the regressor's row range
};
OutputKernel build_output_kernel(const RegressorMatrix& psi, const KernelHyper& h);

}  // namespace rvs
