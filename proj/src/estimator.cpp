#include "rvs/estimator.hpp"

#include "rvs/optimize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace rvs {

KernelVariantSpec KernelVariantSpec::from_name(const std::string& name) {
    KernelVariantSpec v;
    std::string base = name;
    if (base.size() > 2 && base.compare(base.size() - 2, 2, "-w") == 0) {
        v.k2_delta = true;
        base = base.substr(0, base.size() - 2);
    }
    if (base == "dc-bd") {
        v.offdiag = false;
    } else if (base == "dc-decay") {
        v.offdiag = true;
        v.zeta = ZetaSpec::Variant::ExpDecay;
    } else if (base == "dc-ob") {
        v.offdiag = true;
        v.zeta = ZetaSpec::Variant::OrthoBasis;
    } else {
        throw ConfigError("unknown kernel variant: " + name);
    }
    return v;
}

std::string KernelVariantSpec::name() const {
    std::string base = !offdiag ? "dc-bd"
                      : zeta == ZetaSpec::Variant::ExpDecay ? "dc-decay"
                                                            : "dc-ob";
    return k2_delta ? base + "-w" : base;
}

namespace {

constexpr double kBigCost = 1e100;
constexpr double kBetaShift = 1e-6;

ZetaSpec zeta_spec_of(const KernelVariantSpec& v) {
    ZetaSpec z;
    z.variant = v.zeta;
    z.l = v.l;
    return z;
}

struct EvalResult {
    double cost = 0.0;
    double h0 = 0.0;
    Vector alpha;   // (Q + s2 I)^{-1} (y - h0 1)
    Vector gvec;    // V_bar^T alpha (fast route only)
    long row_offset = 0;
};

Vector slice_outputs(const Vector& y, const RegressorMatrix& psi, long row_offset, long count) {
    const long base = psi.first_time() + row_offset;
    if (base + count > y.size())
        throw InsufficientData("output series shorter than the regressor row range");
    return y.segment(base, count);
}

/// Off-diagonal variants use the full column recipe; the block-diagonal one
/// keeps only the a_m^2-scaled Hadamard-power terms.
Matrix qw_variant(const Matrix& X, const Vector& psi_rows, const Vector& psi_cols,
                  const Vector& a, bool offdiag) {
    if (offdiag) return qw_from_parts(X, psi_rows, psi_cols, a);
    Matrix q = Matrix::Zero(X.rows(), X.cols());
    Matrix Pm = X;
    const int M = static_cast<int>(a.size());
    for (int m = 1; m <= M; ++m) {
        q += (a(m - 1) * a(m - 1)) * Pm;
        if (m < M) Pm.array() *= X.array();
    }
    return q;
}

}  // namespace

struct EbEvaluator::Impl {
    FitConfig cfg;
    bool fast = false;

    RegressorMatrix psi;
    Vector y_rows;  // outputs aligned with psi rows
    Matrix U, H;    // fast route factors
    double var_y = 0.0;
    long out_rows = 0;

    EvalResult evaluate(const KernelHyper& h) const {
        return fast ? evaluate_fast(h) : evaluate_dense(h);
    }

    Matrix qw(const KernelHyper& h) const {
        const Matrix K1 = dc_gram(h.k1, h.n);
        const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
        const Matrix X = psi.psi * K1 * psi.psi.transpose();
        const Vector pv = psi.psi * zv;
        return qw_variant(X, pv, pv, h.a, cfg.variant.offdiag);
    }

    EvalResult evaluate_dense(const KernelHyper& h) const {
        Matrix q = qw(h);
        long off = 0;
        if (h.k2) {
            const Matrix K2 = dc_gram(*h.k2, h.n);
            q = conv2_q(K2, q);
            off = row_trim(psi, h.lag_span());
            if (q.rows() <= off)
                throw InsufficientData("not enough rows for the two-block lag span");
            q = q.block(off, off, q.rows() - off, q.cols() - off).eval();
        }
        const long N = q.rows();
        const Vector y = y_rows.segment(off, N);

        q.diagonal().array() += h.sigma2;
        Eigen::LLT<Eigen::Ref<Matrix>> llt(q);
        if (llt.info() != Eigen::Success)
            throw NonFinite("covariance factorization failed");

        const Vector s1 = llt.solve(y);
        const Vector s0 = llt.solve(Vector::Ones(N));
        const double denom = s0.sum();
        if (!(denom > 0.0)) throw NonFinite("degenerate GLS mean denominator");
        const double h0 = s1.sum() / denom;

        double logdet = 0.0;
        for (long i = 0; i < N; ++i) logdet += std::log(llt.matrixLLT()(i, i));
        logdet *= 2.0;

        EvalResult r;
        r.cost = y.dot(s1) - h0 * s1.sum() + logdet;
        if (!std::isfinite(r.cost)) throw NonFinite("EB cost is not finite");
        r.h0 = h0;
        r.alpha = s1 - h0 * s0;
        r.row_offset = off;
        return r;
    }

    GeneratorPair generators(const KernelHyper& h) const {
        const Matrix K1H = semiseparable_apply(semiseparable_dc(h.k1), H);
        const Matrix V = U * (H.transpose() * K1H);
        const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
        const Vector pv = psi.psi * zv;
        return assemble_q_generators(U, V, pv, h.a, cfg.variant.offdiag);
    }

    EvalResult evaluate_fast(const KernelHyper& h) const {
        FastFactor fac(generators(h), h.sigma2);
        const long N = y_rows.size();
        const Vector s1 = fac.solve(y_rows);
        const Vector s0 = fac.solve(Vector::Ones(N));
        const double denom = s0.sum();
        if (!(denom > 0.0)) throw NonFinite("degenerate GLS mean denominator");
        const double h0 = s1.sum() / denom;

        EvalResult r;
        r.cost = y_rows.dot(s1) - h0 * s1.sum() + fac.logdet();
        if (!std::isfinite(r.cost)) throw NonFinite("EB cost is not finite");
        r.h0 = h0;
        r.alpha = s1 - h0 * s0;
        r.gvec = fac.generators().V_bar.transpose() * r.alpha;
        r.row_offset = 0;
        return r;
    }
};

EbEvaluator::EbEvaluator(const TrainingData& data, const FitConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
    if (data.u.size() != data.y.size() || data.u.size() == 0)
        throw Error("EbEvaluator: input/output series must be nonempty and equally long");
    impl_->cfg = cfg;
    impl_->psi = build_regressor(std::span<const double>(data.u.data(), data.u.size()), cfg.n,
                                 cfg.init_policy);

    bool fast = cfg.path == FitPath::FastSeparable;
    if (fast) {
        if (!cfg.variant.k2_delta)
            throw ConfigError("fast path applies to -w kernel variants only");
        if (!data.input_desc)
            throw ConfigError("fast path requires a separable input descriptor");
        if (cfg.init_policy != InitPolicy::TrimToKnown)
            throw ConfigError("fast path requires TrimToKnown (the separation identity "
                              "does not hold for fabricated zeros)");
        // gamma > N: the low-rank route has no advantage; take the dense one.
        if (separability_rank(cfg.M, data.input_desc->r, cfg.variant.offdiag) >
            impl_->psi.rows())
            fast = false;
    }
    impl_->fast = fast;

    impl_->y_rows = slice_outputs(data.y, impl_->psi, 0, impl_->psi.rows());
    const double mean = impl_->y_rows.mean();
    impl_->var_y = (impl_->y_rows.array() - mean).square().mean();
    impl_->out_rows = impl_->psi.rows() -
                      (cfg.variant.k2_delta ? 0 : row_trim(impl_->psi, 2 * cfg.n - 1));

    if (fast) {
        const auto& desc = *data.input_desc;
        const long count = impl_->psi.rows();
        const long first = data.t0 + impl_->psi.first_time();
        impl_->U.resize(count, desc.r);
        for (long j = 0; j < count; ++j)
            for (int i = 0; i < desc.r; ++i)
                impl_->U(j, i) = desc.pi_funcs[i](static_cast<double>(first + j));
        impl_->H.resize(cfg.n, desc.r);
        for (int b = 0; b < cfg.n; ++b)
            for (int i = 0; i < desc.r; ++i)
                impl_->H(b, i) = desc.rho_funcs[i](static_cast<double>(b));
    }
}

EbEvaluator::~EbEvaluator() = default;
EbEvaluator::EbEvaluator(EbEvaluator&&) noexcept = default;
EbEvaluator& EbEvaluator::operator=(EbEvaluator&&) noexcept = default;

double EbEvaluator::cost(const KernelHyper& h) const { return impl_->evaluate(h).cost; }
bool EbEvaluator::uses_fast() const { return impl_->fast; }
long EbEvaluator::output_rows() const { return impl_->out_rows; }
double EbEvaluator::output_variance() const { return impl_->var_y; }

double EbEvaluator::x_diag_mean(const DcParams& k1) const {
    const Matrix K1 = dc_gram(k1, impl_->cfg.n);
    const Matrix& P = impl_->psi.psi;
    return (P * K1).cwiseProduct(P).rowwise().sum().mean();
}

double eb_objective(const KernelHyper& h, const TrainingData& data, FitPath path,
                    InitPolicy policy) {
    h.validate();
    FitConfig cfg;
    cfg.path = path;
    cfg.variant.k2_delta = !h.k2;
    cfg.variant.offdiag = true;
    cfg.variant.zeta = h.zeta.variant;
    cfg.variant.l = h.zeta.l;
    cfg.M = h.M;
    cfg.n = h.n;
    cfg.init_policy = policy;
    EbEvaluator ev(data, cfg);
    return ev.cost(h);
}

namespace {

/// Packed optimizer coordinates: [log|a_1|..log|a_M|, log alpha1,
/// log(beta1+eps), (log alpha2, log(beta2+eps) when the second block is
/// modeled), log s2]. Coefficient magnitudes move multiplicatively (the
/// Hadamard powers span many decades); their signs are fixed per restart.
struct Packing {
    int M;
    bool has_k2;
    KernelVariantSpec variant;
    int n;
    double var_y;
    OptimSettings opt;

    int dim() const { return M + 2 + (has_k2 ? 2 : 0) + 1; }

    Vector lower() const {
        Vector lo(dim());
        for (int i = 0; i < M; ++i) lo(i) = std::log(1e-8);
        lo(M) = std::log(opt.alpha_lo);
        lo(M + 1) = std::log(kBetaShift);
        int k = M + 2;
        if (has_k2) {
            lo(k) = std::log(opt.alpha_lo);
            lo(k + 1) = std::log(kBetaShift);
            k += 2;
        }
        lo(k) = std::log(std::max(1e-300, opt.sigma2_floor_rel * var_y));
        return lo;
    }

    Vector upper() const {
        Vector hi(dim());
        for (int i = 0; i < M; ++i) hi(i) = std::log(opt.a_max);
        hi(M) = std::log(opt.alpha_hi);
        hi(M + 1) = std::log(opt.beta_hi + kBetaShift);
        int k = M + 2;
        if (has_k2) {
            hi(k) = std::log(opt.alpha_hi);
            hi(k + 1) = std::log(opt.beta_hi + kBetaShift);
            k += 2;
        }
        hi(k) = std::log(std::max(1e6 * var_y, 1.0));
        return hi;
    }

    KernelHyper unpack(const Vector& x, const Vector& signs) const {
        KernelHyper h;
        h.M = M;
        h.n = n;
        h.a = Vector(M);
        for (int i = 0; i < M; ++i) h.a(i) = signs(i) * std::exp(x(i));
        h.k1.c = 1.0;
        h.k1.alpha = std::exp(x(M));
        h.k1.beta = std::max(0.0, std::exp(x(M + 1)) - kBetaShift);
        int k = M + 2;
        if (has_k2) {
            DcParams k2;
            k2.c = 1.0;
            k2.alpha = std::exp(x(k));
            k2.beta = std::max(0.0, std::exp(x(k + 1)) - kBetaShift);
            h.k2 = k2;
            k += 2;
        }
        h.sigma2 = std::exp(x(k));
        h.zeta = zeta_spec_of(variant);
        return h;
    }

    Vector a_log0;  // balance-aware coefficient magnitudes, log scale

    std::pair<Vector, Vector> init(std::uint64_t seed, int restart) const {
        Rng rng(seed, static_cast<std::uint64_t>(restart) + 1);
        Vector x(dim());
        Vector signs = Vector::Ones(M);
        for (int i = 0; i < M; ++i) {
            x(i) = a_log0(i) + (restart > 0 ? rng.normal() : 0.0);
            if (restart > 0 && rng.coin()) signs(i) = -1.0;
        }
        double alpha0 = std::log(10.0) / n;  // one decade over the memory span
        double beta0 = alpha0;
        double s2 = 0.1 * std::max(var_y, 1e-12);
        if (restart > 0) {
            alpha0 *= std::exp(rng.normal());
            beta0 *= std::exp(rng.normal());
            s2 *= std::exp(rng.normal());
        }
        x(M) = std::log(alpha0);
        x(M + 1) = std::log(beta0 + kBetaShift);
        int k = M + 2;
        if (has_k2) {
            x(k) = std::log(restart > 0 ? alpha0 * std::exp(rng.normal()) : alpha0);
            x(k + 1) =
                std::log((restart > 0 ? beta0 * std::exp(rng.normal()) : beta0) + kBetaShift);
            k += 2;
        }
        x(k) = std::log(s2);
        const Vector lo = lower(), hi = upper();
        return {x.cwiseMax(lo).cwiseMin(hi), signs};
    }
};

}  // namespace

FittedModel fit(const TrainingData& data, const FitConfig& cfg) {
    if (cfg.opt.restarts < 1) throw ConfigError("fit: restarts must be >= 1");

    EbEvaluator ev(data, cfg);

    Packing pack;
    pack.M = cfg.M;
    pack.has_k2 = !cfg.variant.k2_delta;
    pack.variant = cfg.variant;
    pack.n = cfg.n;
    pack.var_y = ev.output_variance();
    pack.opt = cfg.opt;

    // Start the coefficient magnitudes where each order contributes about
    // the output variance: a_m^2 xbar^m ~ var_y. Without this, the Hadamard
    // powers leave the high orders many decades off scale.
    {
        const double alpha0 = std::log(10.0) / cfg.n;
        const double xbar = std::max(ev.x_diag_mean(DcParams{1.0, alpha0, alpha0}), 1e-12);
        const double vy = std::max(ev.output_variance(), 1e-12);
        pack.a_log0 = Vector(cfg.M);
        for (int m = 1; m <= cfg.M; ++m)
            pack.a_log0(m - 1) = 0.5 * (std::log(vy) - m * std::log(xbar));
    }

    const Vector lo = pack.lower(), hi = pack.upper();
    auto objective = [&](const Vector& x, const Vector& signs) -> double {
        const Vector xc = x.cwiseMax(lo).cwiseMin(hi);
        const double penalty = 1e3 * (x - xc).squaredNorm();
        try {
            return ev.cost(pack.unpack(xc, signs)) + penalty;
        } catch (const NonFinite&) {
            return kBigCost;
        } catch (const SingularCore&) {
            return kBigCost;
        }
    };

    NelderMeadOptions nm;
    nm.max_iters = cfg.opt.max_iters;
    nm.tol = cfg.opt.tol_cost;

    struct RestartOutcome {
        Vector x, signs;
        double value = kBigCost;
        bool ok = false;
    };
    std::vector<RestartOutcome> outcomes(cfg.opt.restarts);
    parallel_for(static_cast<std::size_t>(cfg.opt.restarts), cfg.workers, [&](std::size_t r) {
        const auto [x0, signs] = pack.init(cfg.seed, static_cast<int>(r));
        auto f = [&](const Vector& x) { return objective(x, signs); };
        if (f(x0) >= kBigCost) return;
        const auto res = nelder_mead(f, x0, nm);
        outcomes[r].x = res.x;
        outcomes[r].signs = signs;
        outcomes[r].value = res.value;
        outcomes[r].ok = true;
    });

    int best = -1;
    for (int r = 0; r < cfg.opt.restarts; ++r) {
        if (!outcomes[r].ok) continue;
        if (best < 0 || outcomes[r].value < outcomes[best].value) best = r;
    }
    if (best < 0) throw AllRestartsFailed("every restart failed at initialization");

    const KernelHyper h_best =
        pack.unpack(outcomes[best].x.cwiseMax(lo).cwiseMin(hi), outcomes[best].signs);
    return finalize_model(data, cfg, h_best);
}

FittedModel finalize_model(const TrainingData& data, const FitConfig& cfg,
                           const KernelHyper& h) {
    EbEvaluator ev(data, cfg);
    FittedModel model;
    model.cfg = cfg;
    model.used_fast = ev.uses_fast();
    model.hyper = h;

    const EvalResult fin = ev.impl_->evaluate(h);
    model.cost = fin.cost;
    model.hyper.h0 = fin.h0;
    model.alpha = fin.alpha;
    model.fast_gvec = fin.gvec;
    model.row_offset = fin.row_offset;
    model.psi_train = ev.impl_->psi;
    model.y_out = ev.impl_->y_rows.segment(fin.row_offset,
                                           ev.impl_->y_rows.size() - fin.row_offset);
    model.t0_train = data.t0;
    if (model.used_fast) model.input_desc = data.input_desc;
    return model;
}

double FittedModel::recompute_cost(const TrainingData& data) const {
    FitConfig c = cfg;
    c.path = used_fast ? FitPath::FastSeparable : FitPath::Dense;
    EbEvaluator ev(data, c);
    return ev.cost(hyper);
}

Prediction predict(const FittedModel& model, std::span<const double> u_test, long t0_test) {
    const KernelHyper& h = model.hyper;
    RegressorMatrix psi_te = build_regressor(u_test, h.n, model.cfg.init_policy);

    Prediction out;
    if (model.used_fast) {
        const auto& desc = *model.input_desc;
        const long count = psi_te.rows();
        const long first = t0_test + psi_te.first_time();
        Matrix U_te(count, desc.r);
        for (long j = 0; j < count; ++j)
            for (int i = 0; i < desc.r; ++i)
                U_te(j, i) = desc.pi_funcs[i](static_cast<double>(first + j));
        const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
        const Vector psi_vec = psi_te.psi * zv;
        const Matrix u_bar =
            generator_columns(U_te, psi_vec, h.a, model.cfg.variant.offdiag, true);
        out.y = (u_bar * model.fast_gvec).array() + h.h0;
        out.first_index = psi_te.first_time();
        return out;
    }

    const Matrix K1 = dc_gram(h.k1, h.n);
    const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
    const Matrix Xc = psi_te.psi * K1 * model.psi_train.psi.transpose();
    const Vector pt = psi_te.psi * zv;
    const Vector ps = model.psi_train.psi * zv;
    Matrix qc = qw_variant(Xc, pt, ps, h.a, model.cfg.variant.offdiag);
    if (h.k2) {
        const Matrix K2 = dc_gram(*h.k2, h.n);
        const int span = h.lag_span();
        const Matrix c = conv2_full(K2, qc).topLeftCorner(qc.rows(), qc.cols());
        const long ro = row_trim(psi_te, span), co = row_trim(model.psi_train, span);
        if (c.rows() <= ro || c.cols() <= co)
            throw InsufficientData("predict: test record shorter than the lag span");
        qc = c.block(ro, co, c.rows() - ro, c.cols() - co).eval();
    }
    out.y = (qc * model.alpha).array() + h.h0;
    out.first_index = psi_te.first_time() + row_trim(psi_te, h.lag_span());
    return out;
}

namespace {

/// eta_m over the regressor rows, eta_m = sum_{l >= m} a_l psi^{o(l-m)}.
std::vector<Vector> eta_stack(const Vector& psi_vec, const Vector& a) {
    const int M = static_cast<int>(a.size());
    std::vector<Vector> eta(M + 1);
    eta[M] = Vector::Constant(psi_vec.size(), a(M - 1));
    for (int m = M - 1; m >= 1; --m)
        eta[m] = Vector::Constant(psi_vec.size(), a(m - 1)) + psi_vec.cwiseProduct(eta[m + 1]);
    return eta;
}

}  // namespace

Matrix VolterraMapEstimate::as_matrix() const {
    if (order != 2) throw Error("as_matrix: order-2 maps only");
    Matrix m(lag_span, lag_span);
    for (int i = 0; i < lag_span; ++i)
        for (int j = 0; j < lag_span; ++j) m(i, j) = coeffs(i * lag_span + j);
    return m;
}

VolterraMapEstimate extract_map(const FittedModel& model, int m) {
    if (m < 1 || m > 2) throw Error("extract_map: m must be 1 or 2");
    const KernelHyper& h = model.hyper;
    if (m > h.M) throw Error("extract_map: order exceeds the model's nonlinearity order");
    const int L = h.lag_span();
    double sz = 1.0;
    for (int k = 0; k < m; ++k) sz *= L;
    if (sz > 1e5) throw SizeExceeded("extract_map: L^m beyond the materialization guard");

    const RegressorMatrix& psi = model.psi_train;
    const Matrix K1 = dc_gram(h.k1, h.n);
    const Vector zv = zeta_samples(h.zeta, h.k1, h.n);
    const Matrix W = K1 * psi.psi.transpose();  // w(t,s) = sum_sig k1(t,sig) u(s-sig)
    const Vector psi_vec = psi.psi * zv;
    const long off = model.row_offset;
    const long n_out = model.alpha.size();
    const Vector& alpha = model.alpha;

    // The block-diagonal kernel has no cross-order coupling: eta collapses
    // to the constant a_m.
    const bool offdiag = model.cfg.variant.offdiag;
    std::vector<Vector> eta;
    if (offdiag) {
        eta = eta_stack(psi_vec, h.a);
    } else {
        eta.assign(h.M + 1, Vector());
        for (int k = 1; k <= h.M; ++k) eta[k] = Vector::Constant(psi_vec.size(), h.a(k - 1));
    }

    VolterraMapEstimate est;
    est.order = m;
    est.lag_span = L;

    if (m == 1) {
        const Vector col_scale = h.a(0) * eta[1];
        Matrix Ew = W;
        Ew.array().rowwise() *= col_scale.transpose().array();
        if (!h.k2) {
            est.coeffs = Ew.middleCols(off, n_out) * alpha;
            return est;
        }
        const Matrix K2 = dc_gram(*h.k2, h.n);
        const Matrix C = conv2_full(K2, Ew);  // (2n-1) x (N_psi + n - 1)
        // Column l of C holds output time first_time + l; output row i sits
        // at column off + i.
        est.coeffs = C.block(0, off, L, n_out) * alpha;
        return est;
    }

    const double a2 = h.a(1), a1 = h.a(0);
    Matrix theta = Matrix::Zero(L, L);
    auto accumulate_g = [&](const Vector& weights, int shift) {
        // G = a2 W diag(w o eta2) W^T (+ the (2,1) coupling when modeled),
        // embedded at (shift, shift).
        const Vector we = weights.cwiseProduct(eta[2]);
        Matrix G = a2 * (W * we.asDiagonal() * W.transpose());
        if (offdiag) G.noalias() += (a2 * a1) * (W * weights) * zv.transpose();
        theta.block(shift, shift, h.n, h.n) += G;
    };

    if (!h.k2) {
        Vector w = Vector::Zero(psi.rows());
        w.segment(off, n_out) = alpha;
        accumulate_g(w, 0);
    } else {
        const Matrix K2 = dc_gram(*h.k2, h.n);
        for (int x1 = 0; x1 < h.n; ++x1) {
            Vector w = Vector::Zero(psi.rows());
            for (int x2 = 0; x2 < h.n; ++x2) {
                const double k2v = K2(x1, x2);
                if (k2v == 0.0) continue;
                // alpha index i sits at psi row off + i; the kappa2 shift by
                // x2 moves it to row off + i - x2.
                for (long i = 0; i < n_out; ++i) {
                    const long j = off + i - x2;
                    if (j >= 0 && j < psi.rows()) w(j) += k2v * alpha(i);
                }
            }
            accumulate_g(w, x1);
        }
    }

    est.coeffs.resize(L * L);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) est.coeffs(i * L + j) = theta(i, j);
    return est;
}

WienerDecomposition decompose_wiener(const FittedModel& model, double g_anchor,
                                     int anchor_index) {
    const KernelHyper& h = model.hyper;
    if (h.k2)
        throw ConfigError("decompose_wiener: model must use the unit-pulse second block");

    const VolterraMapEstimate h1 = extract_map(model, 1);
    const double peak = h1.coeffs.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) throw DegenerateFirstOrder("first-order map is identically zero");
    int t0 = anchor_index;
    if (t0 < 0) {
        for (int t = 0; t < h1.lag_span; ++t)
            if (std::abs(h1.coeffs(t)) > 1e-3 * peak) { t0 = t; break; }
    } else if (t0 >= h1.lag_span || !(std::abs(h1.coeffs(t0)) > 0.0)) {
        throw DegenerateFirstOrder("estimated coefficient at the anchor lag is zero");
    }
    if (t0 < 0) throw DegenerateFirstOrder("no first-order coefficient above threshold");

    WienerDecomposition out;
    out.anchor_index = t0;
    out.g_hat = h1.coeffs * (g_anchor / h1.coeffs(t0));

    // Static nonlinearity: least-squares polynomial of the training outputs
    // against powers of the reconstructed intermediate signal. The fit is
    // identified only on the sampled range, so evaluation holds the boundary
    // value outside it.
    const Vector x = model.psi_train.psi * out.g_hat;
    const long N = x.size();
    Matrix vand(N, h.M + 1);
    for (long r = 0; r < N; ++r) {
        double p = 1.0;
        for (int k = 0; k <= h.M; ++k) {
            vand(r, k) = p;
            p *= x(r);
        }
    }
    out.nl_hat.coeffs = vand.colPivHouseholderQr().solve(model.y_out);
    out.nl_hat.lo = x.minCoeff();
    out.nl_hat.hi = x.maxCoeff();
    return out;
}

}  // namespace rvs
