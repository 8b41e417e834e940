#pragma once

#include "rvs/common.hpp"
#include "rvs/separable.hpp"

#include <complex>
#include <optional>
#include <span>
#include <string>

namespace rvs {

/// Discrete-time LTI block as a rational transfer function in q^{-1}
/// (den[0] = 1) with a cached truncated impulse response; all simulation
/// goes through the truncated response.
class LtiSystem {
public:
    static LtiSystem identity();
    static LtiSystem fir(std::vector<double> taps);
    static LtiSystem from_tf(std::vector<double> num, std::vector<double> den);

    const std::vector<double>& impulse_response() const { return ir_; }
    const std::vector<double>& num() const { return num_; }
    const std::vector<double>& den() const { return den_; }

    /// Convolution of the truncated impulse response against u.
    Vector filter(std::span<const double> u) const;

    std::vector<std::complex<double>> poles() const;
    double max_pole_modulus() const;

    /// Rescales so the truncated impulse response has unit 2-norm.
    void normalize_energy(double sign = 1.0);

private:
    std::vector<double> num_{1.0}, den_{1.0};
    std::vector<double> ir_{1.0};
    mutable std::vector<std::complex<double>> pole_cache_;

    void rebuild_ir();
    friend LtiSystem random_stable_lti(int, double, double,
                                       const std::optional<struct OverdampedSpec>&, Rng&);
};

/// Dominant-pole pinning: `count` real positive poles with moduli in [lo, hi].
struct OverdampedSpec {
    int count = 0;
    double lo = 0.7, hi = 0.8;
};

/// Random stable system: conjugate pole pairs with uniform modulus in
/// [mod_lo, mod_hi] and uniform angle, real poles positive, zeros sampled the
/// same way, unit-energy impulse response with random sign.
LtiSystem random_stable_lti(int order, double mod_lo, double mod_hi,
                            const std::optional<OverdampedSpec>& overdamped, Rng& rng);

/// Static nonlinearity: polynomial coefficients a_0..a_M, or the banded
/// saturation +-1 outside [-1/2, 1/2) with slope 2 inside.
struct NlSpec {
    enum class Kind { Polynomial, Saturation };
    Kind kind = Kind::Polynomial;
    Vector coeffs = Vector::Zero(2);

    double eval(double x) const;
    int order() const { return static_cast<int>(coeffs.size()) - 1; }
};

/// Two linear blocks around a static nonlinearity; g2 = identity gives the
/// single-block (Wiener) structure.
struct WhSystem {
    LtiSystem g1, g2;
    NlSpec nl;

    /// Constant term of the equivalent coefficient expansion.
    double h0() const;
};

Vector simulate_wh(const WhSystem& sys, std::span<const double> u);

/// Exact coefficient arrays h_m(t_1..t_m) = a_m sum_tau g2(tau) prod g1(t_i - tau)
/// over [0, n)^m, flattened row-major, for m = 1..M.
std::vector<Vector> true_volterra_maps(const WhSystem& sys, int n, int M);

struct InputSpec {
    enum class Kind { WhiteGaussian, Multisine, DecayingCosine };
    Kind kind = Kind::WhiteGaussian;
    double band_lo = 0.0, band_hi = 1.0;  // multisine band, as a fraction of Nyquist
    int n_sines = 100;
    double lambda = 0.0, omega = 0.0, phase = 0.0;  // decaying cosine, sampled at t = 0,1,...
    std::optional<std::pair<double, double>> clip;  // amplitude clamp

    /// Separable descriptor for the deterministic families.
    std::optional<SeparableInputDesc> separable(long N, int n) const;
};

/// Optional shaping filter applies to the multisine kind only.
Vector generate_input(const InputSpec& spec, long n_total, Rng& rng,
                      const LtiSystem* shaping = nullptr);

/// y_noisy = y_clean + N(0, sigma2) with sigma2 = var(y_clean) / 10^(snr/10).
std::pair<Vector, double> add_noise(const Vector& y_clean, double snr_db, Rng& rng);

struct Dataset {
    std::string tag;
    std::uint64_t seed = 0;
    Vector u, y_clean, y_noisy;
    long train_begin = 0, train_end = 0, test_begin = 0, test_end = 0;  // half-open
    double sigma2_true = 0.0, snr_db = 0.0;
    InputSpec input;
    std::optional<WhSystem> system;  // absent for the parallel-branch bank
    Vector g1_true_ir;               // convenience copy for impulse-response fits
    int true_M = 0;
};

enum class BankKind { D1like, D2like, D3like, D4like };

struct BankSpec {
    BankKind kind = BankKind::D2like;
    char d2_config = 'B';  // 'A' or 'B'
    int M = 2;             // polynomial order for the random banks
    double snr_db = 10.0;
    int count = 20;
    long n_train = 300;
    long warmup = 160;     // pre-train context so trimming never eats training rows

    std::string tag() const;
};

/// Desk-scale databank generation; deterministic per (spec, master_seed).
std::vector<Dataset> build_databank(const BankSpec& spec, std::uint64_t master_seed);

}  // namespace rvs
