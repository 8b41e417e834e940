#pragma once

#include "rvs/estimator.hpp"
#include "rvs/simulator.hpp"

#include <map>
#include <span>
#include <string>

namespace rvs {

/// 100 (1 - ||y - yhat|| / ||y - mean(y)||); throws DegenerateReference when
/// the reference is constant.
double pfit(std::span<const double> y_true, std::span<const double> y_hat);
double gfit(std::span<const double> g_true, std::span<const double> g_hat);

/// Same normalized fit over the fixed 301-point grid on [-1.5, 1.5].
double nfit(const std::function<double(double)>& nl_true,
            const std::function<double(double)>& nl_hat);

struct McVariant {
    KernelVariantSpec kernel;
    FitPath path = FitPath::Dense;
    int M = 2;
    int n = 20;
};

struct FitRecord {
    std::string dataset;
    std::string variant;
    double pfit = std::nan(""), gfit = std::nan(""), nfit = std::nan("");
    double cost = std::nan("");
    double fit_seconds = 0.0, predict_seconds = 0.0;
    std::string status = "ok";
    // hyperparameter optimum
    std::vector<double> a;
    double h0 = std::nan(""), sigma2 = std::nan("");
    double alpha1 = std::nan(""), beta1 = std::nan("");
    double alpha2 = std::nan(""), beta2 = std::nan("");
};

struct Aggregate {
    double mean = std::nan(""), median = std::nan("");
    double q1 = std::nan(""), q3 = std::nan("");
    long count = 0;  // non-failed records entering the aggregate
    long failed = 0;
};

/// NaNs are excluded and counted as failures.
Aggregate aggregate(std::span<const double> values);

struct FitReport {
    std::vector<FitRecord> records;

    std::vector<std::string> variants() const;
    Aggregate pfit_of(const std::string& variant) const;
    Aggregate gfit_of(const std::string& variant) const;
    Aggregate nfit_of(const std::string& variant) const;
};

struct McConfig {
    OptimSettings opt;
    InitPolicy policy = InitPolicy::TrimToKnown;
    std::uint64_t seed = 0;
    int workers = 0;      // pairs run concurrently; 0 = hardware default
    int fit_workers = 1;  // restart concurrency inside one fit
};

/// Fits every (dataset, variant) pair, computes the applicable metrics and
/// collects per-pair records; per-pair failures are recorded, not fatal.
FitReport run_monte_carlo(const std::vector<Dataset>& bank,
                          const std::vector<McVariant>& variants, const McConfig& cfg);

/// One (dataset, variant) pair: fit, predict on the test split, compute the
/// applicable metrics. Does not catch failures. `pair_seed` feeds the
/// optimizer restarts; the fitted model is returned through out_model when
/// requested.
FitRecord fit_one(const Dataset& ds, const McVariant& v, const McConfig& cfg,
                  std::uint64_t pair_seed, FittedModel* out_model = nullptr);

/// Training slice for a dataset: the train window plus the lag context the
/// trim policy will consume.
TrainingData training_slice(const Dataset& ds, const McVariant& v);

struct TimingRow {
    std::string variant;
    long N = 0;
    double median_s = 0.0;
};

struct TimingTable {
    std::vector<TimingRow> rows;
    std::map<std::string, double> slope;  // log-log slope per variant

    double median_of(const std::string& variant, long N) const;
};

struct BenchVariant {
    std::string name;
    KernelVariantSpec kernel;
    FitPath path = FitPath::FastSeparable;
    int M = 3;
    int n = 50;
};

/// Median wall time per EB-cost evaluation on decaying-cosine data, per
/// sample size and variant; strictly serial, first evaluation discarded as
/// warm-up.
TimingTable benchmark_timing(const std::vector<long>& n_list,
                             const std::vector<BenchVariant>& variants, int repetitions,
                             std::uint64_t seed);

}  // namespace rvs
