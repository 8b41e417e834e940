#include "rvs/simulator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rvs {

namespace {

constexpr int kIrCap = 4096;
constexpr double kIrTail = 1e-10;

std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    // prod (1 - r q^{-1}), coefficients in q^{-1}; conjugate-closed roots
    // give a real polynomial up to round-off.
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

}  // namespace

LtiSystem LtiSystem::identity() { return LtiSystem(); }

LtiSystem LtiSystem::fir(std::vector<double> taps) {
    if (taps.empty()) throw Error("LtiSystem::fir: empty tap list");
    LtiSystem s;
    s.num_ = std::move(taps);
    s.den_ = {1.0};
    s.ir_ = s.num_;
    return s;
}

LtiSystem LtiSystem::from_tf(std::vector<double> num, std::vector<double> den) {
    if (den.empty() || den[0] == 0.0) throw Error("LtiSystem::from_tf: den[0] must be nonzero");
    LtiSystem s;
    if (den[0] != 1.0) {
        for (auto& v : num) v /= den[0];
        for (auto& v : den) v /= den[0];
    }
    s.num_ = std::move(num);
    s.den_ = std::move(den);
    s.rebuild_ir();
    return s;
}

void LtiSystem::rebuild_ir() {
    const long ln = static_cast<long>(num_.size()), ld = static_cast<long>(den_.size());
    if (ld == 1) {
        ir_ = num_;
        return;
    }
    std::vector<double> g(kIrCap, 0.0);
    for (long t = 0; t < kIrCap; ++t) {
        double v = (t < ln) ? num_[t] : 0.0;
        for (long k = 1; k < ld && k <= t; ++k) v -= den_[k] * g[t - k];
        g[t] = v;
    }
    double peak = 0.0;
    for (double v : g) peak = std::max(peak, std::abs(v));
    long last = 0;
    for (long t = 0; t < kIrCap; ++t)
        if (std::abs(g[t]) >= kIrTail * std::max(1.0, peak)) last = t;
    g.resize(last + 1);
    ir_ = std::move(g);
}

Vector LtiSystem::filter(std::span<const double> u) const {
    const long L = static_cast<long>(u.size());
    const long G = static_cast<long>(ir_.size());
    Vector y = Vector::Zero(L);
    for (long t = 0; t < L; ++t) {
        double acc = 0.0;
        const long kmax = std::min(G - 1, t);
        for (long k = 0; k <= kmax; ++k) acc += ir_[k] * u[t - k];
        y(t) = acc;
    }
    return y;
}

std::vector<std::complex<double>> LtiSystem::poles() const {
    if (!pole_cache_.empty() || den_.size() == 1) return pole_cache_;
    const long d = static_cast<long>(den_.size()) - 1;
    Matrix comp = Matrix::Zero(d, d);
    for (long i = 0; i < d; ++i) comp(0, i) = -den_[i + 1];
    for (long i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Matrix> es(comp, false);
    pole_cache_.resize(d);
    for (long i = 0; i < d; ++i) pole_cache_[i] = es.eigenvalues()(i);
    return pole_cache_;
}

double LtiSystem::max_pole_modulus() const {
    double m = 0.0;
    for (const auto& p : poles()) m = std::max(m, std::abs(p));
    return m;
}

void LtiSystem::normalize_energy(double sign) {
    double e = 0.0;
    for (double v : ir_) e += v * v;
    if (e == 0.0) throw Error("LtiSystem: zero-energy impulse response");
    const double scale = sign / std::sqrt(e);
    for (auto& v : num_) v *= scale;
    // Recompute the cache from the scaled coefficients so a system read back
    // from its transfer function reproduces it exactly.
    rebuild_ir();
}

LtiSystem random_stable_lti(int order, double mod_lo, double mod_hi,
                            const std::optional<OverdampedSpec>& overdamped, Rng& rng) {
    if (order < 1) throw Error("random_stable_lti: order must be >= 1");
    if (!(mod_lo >= 0.0 && mod_hi < 1.0 && mod_lo <= mod_hi))
        throw Error("random_stable_lti: modulus range must sit inside [0, 1)");

    std::vector<std::complex<double>> poles;
    int remaining = order;
    if (overdamped) {
        for (int i = 0; i < overdamped->count; ++i)
            poles.emplace_back(rng.uniform(overdamped->lo, overdamped->hi), 0.0);
        remaining -= overdamped->count;
        if (remaining < 0) throw Error("random_stable_lti: overdamped count exceeds order");
    }
    if (remaining % 2 == 1) {
        poles.emplace_back(rng.uniform(mod_lo, mod_hi), 0.0);
        remaining -= 1;
    }
    for (int i = 0; i < remaining / 2; ++i) {
        const double m = rng.uniform(mod_lo, mod_hi);
        const double ang = rng.uniform(0.0, M_PI);
        poles.emplace_back(m * std::cos(ang), m * std::sin(ang));
        poles.emplace_back(m * std::cos(ang), -m * std::sin(ang));
    }

    std::vector<std::complex<double>> zeros;
    int zn = order - 1;
    if (zn % 2 == 1) {
        zeros.emplace_back(rng.uniform(mod_lo, mod_hi), 0.0);
        zn -= 1;
    }
    for (int i = 0; i < zn / 2; ++i) {
        const double m = rng.uniform(mod_lo, mod_hi);
        const double ang = rng.uniform(0.0, M_PI);
        zeros.emplace_back(m * std::cos(ang), m * std::sin(ang));
        zeros.emplace_back(m * std::cos(ang), -m * std::sin(ang));
    }

    LtiSystem s = LtiSystem::from_tf(poly_from_roots(zeros), poly_from_roots(poles));
    s.pole_cache_ = poles;
    s.normalize_energy(rng.coin() ? 1.0 : -1.0);
    return s;
}

double NlSpec::eval(double x) const {
    if (kind == Kind::Saturation) {
        if (x >= 0.5) return 1.0;
        if (x < -0.5) return -1.0;
        return 2.0 * x;
    }
    double v = 0.0;
    for (long k = coeffs.size() - 1; k >= 0; --k) v = v * x + coeffs(k);
    return v;
}

double WhSystem::h0() const {
    if (nl.kind != NlSpec::Kind::Polynomial) throw NonPolynomial("h0 needs a polynomial block");
    double s = 0.0;
    for (double v : g2.impulse_response()) s += v;
    return nl.coeffs(0) * s;
}

Vector simulate_wh(const WhSystem& sys, std::span<const double> u) {
    const Vector x = sys.g1.filter(u);
    Vector z(x.size());
    for (long i = 0; i < x.size(); ++i) z(i) = sys.nl.eval(x(i));
    return sys.g2.filter(std::span<const double>(z.data(), z.size()));
}

std::vector<Vector> true_volterra_maps(const WhSystem& sys, int n, int M) {
    if (sys.nl.kind != NlSpec::Kind::Polynomial)
        throw NonPolynomial("true_volterra_maps: static block must be polynomial");
    double sz = 1.0;
    for (int k = 0; k < M; ++k) sz *= n;
    if (sz > 1e5) throw SizeExceeded("true_volterra_maps: n^M beyond the guard");

    const auto& g1 = sys.g1.impulse_response();
    const auto& g2 = sys.g2.impulse_response();
    const long L1 = static_cast<long>(g1.size());

    std::vector<Vector> maps;
    for (int m = 1; m <= M; ++m) {
        const double am = m < sys.nl.coeffs.size() ? sys.nl.coeffs(m) : 0.0;
        MultiIndex mi(m, n);
        Vector h(mi.count());
        long pos = 0;
        do {
            double acc = 0.0;
            for (long tau = 0; tau < static_cast<long>(g2.size()); ++tau) {
                double prod = g2[tau];
                for (int k = 0; k < m && prod != 0.0; ++k) {
                    const long lag = mi.idx[k] - tau;
                    prod *= (lag >= 0 && lag < L1) ? g1[lag] : 0.0;
                }
                acc += prod;
            }
            h(pos++) = am * acc;
        } while (mi.next());
        maps.push_back(std::move(h));
    }
    return maps;
}

std::optional<SeparableInputDesc> InputSpec::separable(long N, int n) const {
    if (kind != Kind::DecayingCosine) return std::nullopt;
    InputFamilySpec f;
    f.family = SeparableInputDesc::Family::DampedSinusoid;
    f.lambda = lambda;
    f.omega = omega;
    f.phase = phase;
    return separate_input(f, N, n);
}

Vector generate_input(const InputSpec& spec, long n_total, Rng& rng, const LtiSystem* shaping) {
    Vector u(n_total);
    switch (spec.kind) {
        case InputSpec::Kind::WhiteGaussian:
            for (long t = 0; t < n_total; ++t) u(t) = rng.normal();
            break;
        case InputSpec::Kind::Multisine: {
            const int K = spec.n_sines;
            Vector omegas(K), phases(K);
            for (int k = 0; k < K; ++k) {
                omegas(k) = M_PI * (spec.band_lo + (spec.band_hi - spec.band_lo) *
                                                       (k + 1.0) / static_cast<double>(K));
                phases(k) = rng.uniform(0.0, 2.0 * M_PI);
            }
            for (long t = 0; t < n_total; ++t) {
                double acc = 0.0;
                for (int k = 0; k < K; ++k) acc += std::cos(omegas(k) * t + phases(k));
                u(t) = acc;
            }
            if (shaping) u = shaping->filter(std::span<const double>(u.data(), u.size()));
            const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(n_total));
            if (rms > 0.0) u /= rms;
            break;
        }
        case InputSpec::Kind::DecayingCosine:
            for (long t = 0; t < n_total; ++t)
                u(t) = std::exp(-spec.lambda * t) * std::cos(spec.omega * t + spec.phase);
            break;
    }
    if (spec.clip) {
        for (long t = 0; t < n_total; ++t)
            u(t) = std::clamp(u(t), spec.clip->first, spec.clip->second);
    }
    return u;
}

std::pair<Vector, double> add_noise(const Vector& y_clean, double snr_db, Rng& rng) {
    const double mean = y_clean.mean();
    const double var = (y_clean.array() - mean).square().mean();
    if (!(var > 0.0)) throw ZeroSignal("add_noise: clean output has zero variance");
    const double sigma2 = var / std::pow(10.0, snr_db / 10.0);
    Vector y = y_clean;
    const double sd = std::sqrt(sigma2);
    for (long t = 0; t < y.size(); ++t) y(t) += sd * rng.normal();
    return {std::move(y), sigma2};
}

std::string BankSpec::tag() const {
    switch (kind) {
        case BankKind::D1like: return "d1like";
        case BankKind::D2like: return std::string("d2like") + d2_config;
        case BankKind::D3like: return "d3like";
        case BankKind::D4like: return "d4like";
    }
    return "unknown";
}

namespace {

/// Parallel-branch system for the first bank: y = G0 u + G2[(G1 u)(G3 u)],
/// G3 = 1.5 G1, with the printed second-order sections.
struct D1System {
    LtiSystem g1 = LtiSystem::from_tf({0.0, 0.7568}, {1.0, -1.812, 0.8578});
    LtiSystem g2 = LtiSystem::from_tf({0.0, 1.063}, {1.0, -1.706, 0.7491});
    double g0 = 2.0;
    double g3_scale = 1.5;

    Vector simulate(std::span<const double> u) const {
        const Vector x = g1.filter(u);
        Vector prod(x.size());
        for (long i = 0; i < x.size(); ++i) prod(i) = x(i) * (g3_scale * x(i));
        Vector y = g2.filter(std::span<const double>(prod.data(), prod.size()));
        for (long i = 0; i < y.size(); ++i) y(i) += g0 * u[i];
        return y;
    }
};

LtiSystem d3_linear_block() {
    return LtiSystem::from_tf(
        {0.0, -0.467, 1.12, -0.925, 0.308, -0.0364, 0.00110},
        {1.0, -2.67, 2.96, -2.01, 0.914, -0.181, -0.0102});
}

Vector random_poly_coeffs(int M, Rng& rng) {
    Vector a(M + 1);
    for (int m = 0; m <= M; ++m) a(m) = rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace

std::vector<Dataset> build_databank(const BankSpec& spec, std::uint64_t master_seed) {
    if (spec.count < 1) throw Error("build_databank: count must be >= 1");
    if (spec.kind == BankKind::D2like && spec.d2_config != 'A' && spec.d2_config != 'B')
        throw ConfigError("build_databank: D2 configuration must be 'A' or 'B'");

    const long n_test = (spec.kind == BankKind::D3like) ? spec.n_train : 5 * spec.n_train;
    const long total = spec.warmup + spec.n_train + n_test;

    std::vector<Dataset> out(spec.count);
    for (int d = 0; d < spec.count; ++d) {
        Rng base(master_seed, static_cast<std::uint64_t>(d));
        Rng rng_input = base.child(0);
        Rng rng_system = base.child(1);
        Rng rng_poly = base.child(2);
        Rng rng_noise = base.child(3);

        Dataset ds;
        ds.tag = spec.tag();
        ds.seed = master_seed ^ (0x9e3779b97f4a7c15ULL * (d + 1));
        ds.train_begin = spec.warmup;
        ds.train_end = spec.warmup + spec.n_train;
        ds.test_begin = ds.train_end;
        ds.test_end = ds.train_end + n_test;
        ds.snr_db = spec.snr_db;

        switch (spec.kind) {
            case BankKind::D1like: {
                ds.input.kind = InputSpec::Kind::Multisine;
                ds.input.band_lo = 0.0;
                ds.input.band_hi = 1.0;
                ds.input.n_sines = 100;
                ds.snr_db = 20.0;
                ds.u = generate_input(ds.input, total, rng_input);
                D1System sys;
                ds.y_clean = sys.simulate(std::span<const double>(ds.u.data(), ds.u.size()));
                ds.true_M = 2;
                break;
            }
            case BankKind::D2like: {
                WhSystem sys;
                if (spec.d2_config == 'A') {
                    sys.g1 = random_stable_lti(30, 0.1, 0.9, std::nullopt, rng_system);
                    sys.g2 = random_stable_lti(30, 0.1, 0.9, std::nullopt, rng_system);
                } else {
                    sys.g1 = random_stable_lti(15, 0.1, 0.5, OverdampedSpec{5, 0.7, 0.8},
                                               rng_system);
                    sys.g2 = random_stable_lti(30, 0.1, 0.9, std::nullopt, rng_system);
                }
                ds.input.kind = InputSpec::Kind::WhiteGaussian;
                ds.u = generate_input(ds.input, total, rng_input);

                const Vector x = sys.g1.filter(std::span<const double>(ds.u.data(), ds.u.size()));
                // Contribution of order m is a_m * g2[x^m]; cache the filtered
                // powers so the balance constraint resamples coefficients only.
                std::vector<Vector> w(spec.M + 1);
                std::vector<double> varw(spec.M + 1, 0.0);
                Vector xm = Vector::Ones(x.size());
                for (int m = 0; m <= spec.M; ++m) {
                    if (m > 0) xm.array() *= x.array();
                    w[m] = sys.g2.filter(std::span<const double>(xm.data(), xm.size()));
                    const double mu = w[m].mean();
                    varw[m] = (w[m].array() - mu).square().mean();
                }

                Vector a;
                if (spec.d2_config == 'A') {
                    a = random_poly_coeffs(spec.M, rng_poly);
                } else {
                    bool ok = false;
                    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
                        a = random_poly_coeffs(spec.M, rng_poly);
                        ok = true;
                        for (int m = 1; m < spec.M; ++m) {
                            const double num = a(m + 1) * a(m + 1) * varw[m + 1];
                            const double den = a(m) * a(m) * varw[m];
                            const double ratio = num / den;
                            if (!(ratio >= 0.1 && ratio <= 10.0)) { ok = false; break; }
                        }
                    }
                    if (!ok)
                        throw ConstraintUnsatisfiable(
                            "variance-ratio constraint not met within the rejection cap");
                }
                sys.nl.kind = NlSpec::Kind::Polynomial;
                sys.nl.coeffs = a;

                ds.y_clean = Vector::Zero(total);
                for (int m = 0; m <= spec.M; ++m) ds.y_clean += a(m) * w[m];
                ds.system = sys;
                ds.g1_true_ir = Eigen::Map<const Vector>(sys.g1.impulse_response().data(),
                                                         sys.g1.impulse_response().size());
                ds.true_M = spec.M;
                break;
            }
            case BankKind::D3like: {
                WhSystem sys;
                sys.g1 = d3_linear_block();
                sys.g2 = LtiSystem::identity();
                sys.nl.kind = NlSpec::Kind::Saturation;
                ds.input.kind = InputSpec::Kind::WhiteGaussian;
                ds.input.clip = std::make_pair(-4.2, 4.0);
                ds.u = generate_input(ds.input, total, rng_input);
                ds.y_clean = simulate_wh(sys, std::span<const double>(ds.u.data(), ds.u.size()));
                ds.system = sys;
                ds.g1_true_ir = Eigen::Map<const Vector>(sys.g1.impulse_response().data(),
                                                         sys.g1.impulse_response().size());
                ds.true_M = 9;
                break;
            }
            case BankKind::D4like: {
                WhSystem sys;
                sys.g1 = random_stable_lti(15, 0.1, 0.9, std::nullopt, rng_system);
                sys.g2 = LtiSystem::identity();
                sys.nl.kind = NlSpec::Kind::Polynomial;
                sys.nl.coeffs = random_poly_coeffs(3, rng_poly);
                ds.input.kind = InputSpec::Kind::DecayingCosine;
                ds.input.lambda = 0.0003;
                ds.input.omega = 0.1;
                ds.input.phase = M_PI / 3.0;
                ds.u = generate_input(ds.input, total, rng_input);
                ds.y_clean = simulate_wh(sys, std::span<const double>(ds.u.data(), ds.u.size()));
                ds.system = sys;
                ds.g1_true_ir = Eigen::Map<const Vector>(sys.g1.impulse_response().data(),
                                                         sys.g1.impulse_response().size());
                ds.true_M = 3;
                break;
            }
        }

        if (spec.kind == BankKind::D3like) {
            // Fixed noise variance 0.01 for this bank.
            ds.sigma2_true = 0.01;
            ds.y_noisy = ds.y_clean;
            for (long t = 0; t < total; ++t) ds.y_noisy(t) += 0.1 * rng_noise.normal();
            const double mean = ds.y_clean.mean();
            const double var = (ds.y_clean.array() - mean).square().mean();
            ds.snr_db = 10.0 * std::log10(var / ds.sigma2_true);
        } else {
            auto [yn, s2] = add_noise(ds.y_clean, ds.snr_db, rng_noise);
            ds.y_noisy = std::move(yn);
            ds.sigma2_true = s2;
        }
        out[d] = std::move(ds);
    }
    return out;
}

}  // namespace rvs
