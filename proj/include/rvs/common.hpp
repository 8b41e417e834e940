#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rvs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SizeExceeded : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct SeparationCheckFailed : Error { using Error::Error; };
struct SingularCore : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct AllRestartsFailed : Error { using Error::Error; };
struct ZeroSignal : Error { using Error::Error; };
struct ConstraintUnsatisfiable : Error { using Error::Error; };
struct DegenerateFirstOrder : Error { using Error::Error; };
struct DegenerateReference : Error { using Error::Error; };
struct NonPolynomial : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

/// Counter-based PRNG (splitmix64 core). Streams are derived from a
/// (seed, stream) pair so datasets and restarts can own independent,
/// reproducible generators regardless of scheduling order.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller; platform-independent sequence.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool coin() { return (next_u64() & 1ULL) != 0; }

    /// Child generator for a named substream.
    Rng child(std::uint64_t stream) const { return Rng(state_, stream); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
        return z ^ (z >> 33);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Runs fn(i) for i in [0, count) across `workers` threads. Results must be
/// written to per-index slots; no other shared mutable state.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (workers <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int nthreads = static_cast<int>(std::min<std::size_t>(workers, count));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mutex;
    for (int w = 0; w < nthreads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed) throw Error("parallel_for worker failed: " + first_error);
}

inline int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Odometer over [0, base)^m, first index slowest (the pinned row-major
/// vectorization order of multi-indexed coefficient arrays).
struct MultiIndex {
    std::vector<int> idx;
    int base;
    MultiIndex(int m, int base) : idx(static_cast<std::size_t>(m), 0), base(base) {}
    bool next() {
        for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
            if (++idx[k] < base) return true;
            idx[k] = 0;
        }
        return false;
    }
    long count() const {
        long c = 1;
        for (std::size_t i = 0; i < idx.size(); ++i) c *= base;
        return c;
    }
};

}  // namespace rvs
