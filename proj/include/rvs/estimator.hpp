#pragma once

#include "rvs/output_kernel.hpp"
#include "rvs/separable.hpp"

#include <memory>
#include <optional>
#include <string>

namespace rvs {

enum class FitPath { Dense, FastSeparable };

/// Which member of the structured kernel family to fit.
struct KernelVariantSpec {
    bool offdiag = true;                                         // off-diagonal map blocks
    ZetaSpec::Variant zeta = ZetaSpec::Variant::ExpDecay;        // off-diagonal coupling shape
    bool k2_delta = false;                                       // unit-pulse second block
    int l = 100;                                                 // basis count for OrthoBasis

    /// Names: dc-bd | dc-decay | dc-ob, with a -w suffix for the unit-pulse
    /// (single linear block) regime.
    static KernelVariantSpec from_name(const std::string& name);
    std::string name() const;
};

struct OptimSettings {
    int restarts = 5;
    int max_iters = 2000;
    double tol_cost = 1e-6;
    double alpha_lo = 1e-4, alpha_hi = 2.0;
    double beta_hi = 2.0;
    double a_max = 1e3;
    double sigma2_floor_rel = 1e-8;  // times var(Y)
};

struct FitConfig {
    FitPath path = FitPath::Dense;
    KernelVariantSpec variant;
    int M = 2;
    int n = 20;
    OptimSettings opt;
    InitPolicy init_policy = InitPolicy::TrimToKnown;
    std::uint64_t seed = 0;
    int workers = 1;  // concurrent restarts
};

struct TrainingData {
    Vector u, y;                                   // shared sample clock
    std::optional<SeparableInputDesc> input_desc;  // required for the fast path
    long t0 = 0;                                   // descriptor time of u[0]
};

/// Polynomial with an identified argument range: outside [lo, hi] the
/// boundary value is held (polynomial extrapolation beyond the data that
/// produced the fit is meaningless).
struct Polynomial {
    Vector coeffs;  // c_0..c_d
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double operator()(double x) const {
        const double xc = std::clamp(x, lo, hi);
        double v = 0.0;
        for (long k = coeffs.size() - 1; k >= 0; --k) v = v * xc + coeffs(k);
        return v;
    }
};

class FittedModel {
public:
    KernelHyper hyper;
    double cost = 0.0;
    FitConfig cfg;
    bool used_fast = false;  // fast path may fall back to dense when gamma > N

    // Training cache: alpha = (Q + s2 I)^{-1} (Y - h0 1) plus whatever the
    // chosen path needs for prediction.
    RegressorMatrix psi_train;
    Vector y_out;           // outputs aligned with Q's rows
    Vector alpha;
    Vector fast_gvec;       // V_bar^T alpha (fast path)
    long row_offset = 0;
    long t0_train = 0;
    std::optional<SeparableInputDesc> input_desc;

    double recompute_cost(const TrainingData& data) const;
};

/// Reusable evaluation context: regressor, descriptor samples and output
/// slices are built once; each cost() call pays only the per-hyperparameter
/// work. Falls back to the dense route when the separability rank exceeds
/// the number of output rows.
class EbEvaluator {
public:
    EbEvaluator(const TrainingData& data, const FitConfig& cfg);
    ~EbEvaluator();
    EbEvaluator(EbEvaluator&&) noexcept;
    EbEvaluator& operator=(EbEvaluator&&) noexcept;

    double cost(const KernelHyper& h) const;  // throws NonFinite / SingularCore
    bool uses_fast() const;
    long output_rows() const;
    double output_variance() const;
    /// Mean diagonal of Psi K1 Psi^T at the given first-block parameters
    /// (sets the scale of the order-m contributions).
    double x_diag_mean(const DcParams& k1) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    friend FittedModel finalize_model(const TrainingData&, const FitConfig&,
                                      const KernelHyper&);
};

/// EB cost at the given hyperparameters with the constant offset profiled
/// out as a GLS mean. Throws NonFinite on a non-finite cost and propagates
/// SingularCore from the fast route.
double eb_objective(const KernelHyper& h, const TrainingData& data, FitPath path,
                    InitPolicy policy = InitPolicy::TrimToKnown);

FittedModel fit(const TrainingData& data, const FitConfig& cfg);

/// Builds a model at fixed hyperparameters (no optimization): one objective
/// evaluation fills the prediction caches and profiles h0.
FittedModel finalize_model(const TrainingData& data, const FitConfig& cfg,
                           const KernelHyper& h);

struct Prediction {
    Vector y;
    long first_index;  // index into u_test of the first predicted sample
};

/// Predicts outputs for a fresh input record. For the fast path, t0_test is
/// the descriptor time of u_test[0].
Prediction predict(const FittedModel& model, std::span<const double> u_test, long t0_test = 0);

/// Posterior-mean coefficient array of the given order (m <= 2), flattened
/// in the pinned row-major multi-index order over lag_span() lags.
struct VolterraMapEstimate {
    int order = 1;
    int lag_span = 1;
    Vector coeffs;
    Matrix as_matrix() const;  // order-2 view
};
VolterraMapEstimate extract_map(const FittedModel& model, int m);

struct WienerDecomposition {
    Vector g_hat;       // length-n impulse response of the linear block
    Polynomial nl_hat;  // static nonlinearity estimate
    int anchor_index;   // lag used to fix the scale
};

/// Splits a fitted unit-pulse (Wiener-regime) model into a linear block and
/// a static polynomial, given the known first nonzero impulse-response
/// value. When its lag is also known (it usually is, as part of the same
/// prior knowledge), pass it as anchor_index; otherwise the first estimated
/// coefficient above 1e-3 of the peak is used, which can misanchor on
/// responses whose leading samples are zero.
WienerDecomposition decompose_wiener(const FittedModel& model, double g_anchor,
                                     int anchor_index = -1);

}  // namespace rvs
