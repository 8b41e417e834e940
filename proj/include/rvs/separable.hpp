#pragma once

#include "rvs/kernels.hpp"
#include "rvs/output_kernel.hpp"

#include <Eigen/LU>

#include <functional>
#include <span>

namespace rvs {

/// Input signal admitting u(t-b) = sum_i pi_i(t) rho_i(b).
struct SeparableInputDesc {
    enum class Family { Exponential, DampedSinusoid, PolyTimesExp, Custom };
    Family family = Family::Custom;
    int r = 0;
    std::vector<std::function<double(double)>> pi_funcs;   // over time index t
    std::vector<std::function<double(double)>> rho_funcs;  // over lag b
    std::function<double(double)> sample;                  // u(t), defined for all t
};

/// Family parameters for separate_input. For Custom, supply the functions.
struct InputFamilySpec {
    SeparableInputDesc::Family family = SeparableInputDesc::Family::Exponential;
    double amplitude = 1.0;
    double lambda = 0.0;             // exponential decay rate
    double omega = 0.0;              // DampedSinusoid angular frequency
    double phase = 0.0;              // DampedSinusoid phase
    std::vector<double> poly;        // PolyTimesExp coefficients c_0..c_d
    SeparableInputDesc custom;       // used when family == Custom
};

/// Builds the descriptor with the family's minimal rank and verifies the
/// separation identity over the full grid t in [0, N), b in [0, n).
SeparableInputDesc separate_input(const InputFamilySpec& spec, long N, int n);

/// Checks u(t-b) = sum pi_i(t) rho_i(b) over the given grid; throws
/// SeparationCheckFailed beyond tol (relative to the grid's magnitude).
void verify_separation(const SeparableInputDesc& desc, long t_first, long t_count, int n,
                       double tol = 1e-12);

/// Low-rank factors of X = Psi K1 Psi^T: U samples pi at the regressor's row
/// times, H samples rho at lags 0..n-1, V = U (H^T K1 H).
struct BaseGenerators {
    Matrix U, V, H;
};
BaseGenerators base_generators(const SeparableInputDesc& desc, const Matrix& K1,
                               long first_time, long count);
/// Same with the K1 product done through the semiseparable recursion.
BaseGenerators base_generators(const SeparableInputDesc& desc, const DcParams& k1, int n,
                               long first_time, long count);

/// Compositions of m into r nonnegative parts, descending lexicographic
/// (pinned enumeration order of generator columns).
std::vector<std::vector<int>> compositions(int m, int r);

/// Generators of the m-th Hadamard power of UV^T via the multinomial
/// expansion; the multinomial coefficient is carried on the U side only.
std::pair<Matrix, Matrix> hadamard_power_generators(const Matrix& U, const Matrix& V, int m);

/// Separability rank of the output kernel matrix: with off-diagonal blocks
/// gamma_M + 2 sum_{m<M} gamma_m, diagonal-only sum_{m<=M} gamma_m, where
/// gamma_m = (r+m-1)! / ((r-1)! m!).
long separability_rank(int M, int r, bool with_offdiag);
long compositions_count(int m, int r);

/// Low-rank factorization Q = U_bar V_bar^T of the output kernel matrix.
struct GeneratorPair {
    Matrix U_bar, V_bar;
    long gamma = 0;
};

/// One side of the Q generators. coeff_side carries the multinomial
/// coefficients, the a_M^2 scaling and the minus signs; the other side
/// carries none. Column order: for m = 1..M-1 the eta_m block then the
/// -(psi o eta_{m+1}) block, then the order-M block (diagonal-only variant:
/// one a_m^2-scaled block per m).
Matrix generator_columns(const Matrix& B, const Vector& psi_vec, const Vector& a,
                         bool offdiag, bool coeff_side);

/// Assembles Q's generators from the base factors (unit-pulse second block
/// regime). offdiag false restricts to the block-diagonal kernel.
GeneratorPair assemble_q_generators(const Matrix& U, const Matrix& V, const Vector& psi_vec,
                                    const Vector& a, bool offdiag = true);

/// Extended-p semiseparable kernel: kappa(t,s) = sum mu_i(t) nu_i(s) for
/// t >= s, arguments swapped below the diagonal.
struct SemiseparableKernelDesc {
    int p = 1;
    std::vector<std::function<double(int)>> mu_funcs, nu_funcs;
    std::optional<DcParams> dc;  // set: use the overflow-safe DC recursion
};
SemiseparableKernelDesc semiseparable_dc(const DcParams& p);

/// K * H in O(n p r) via forward/backward cumulative sums.
Matrix semiseparable_apply(const SemiseparableKernelDesc& desc, const Matrix& H);

/// Factorization of (U_bar V_bar^T + sigma2 I) through the gamma x gamma
/// core sigma2 I + V_bar^T U_bar (matrix inversion / determinant lemmas).
class FastFactor {
public:
    FastFactor(GeneratorPair gen, double sigma2);

    Vector solve(const Vector& y) const;   // (Q + sigma2 I)^{-1} y
    double logdet() const;                 // log det(Q + sigma2 I)
    double quad(const Vector& y) const;    // y^T (Q + sigma2 I)^{-1} y
    const GeneratorPair& generators() const { return gen_; }
    double sigma2() const { return sigma2_; }

private:
    GeneratorPair gen_;
    double sigma2_;
    Eigen::PartialPivLU<Matrix> lu_;  // of the gamma x gamma core
    double core_logabsdet_ = 0.0;
};

/// EB cost y^T (Q + s2 I)^{-1} y + log det(Q + s2 I) through the lemmas.
double eb_cost_fast(const GeneratorPair& gen, const Vector& y_centered, double sigma2);

/// h0 + u_bar V_bar^T (Q + s2 I)^{-1} y_centered for test-side generator rows.
Vector predict_fast(const Matrix& u_bar_test, const FastFactor& factor,
                    const Vector& y_centered, double h0);
Vector predict_fast(const Matrix& u_bar_test, const GeneratorPair& gen,
                    const Vector& y_centered, double sigma2, double h0);

}  // namespace rvs
