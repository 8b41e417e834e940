#include "rvs/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

namespace rvs {

namespace {

double normalized_fit(std::span<const double> ref, std::span<const double> est) {
    if (ref.size() != est.size() || ref.empty())
        throw Error("fit metric: length mismatch or empty input");
    double mean = 0.0;
    for (double v : ref) mean += v;
    mean /= static_cast<double>(ref.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += (ref[i] - est[i]) * (ref[i] - est[i]);
        den += (ref[i] - mean) * (ref[i] - mean);
    }
    if (!(den > 0.0)) throw DegenerateReference("fit metric: constant reference signal");
    return 100.0 * (1.0 - std::sqrt(num / den));
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

double pfit(std::span<const double> y_true, std::span<const double> y_hat) {
    return normalized_fit(y_true, y_hat);
}

double gfit(std::span<const double> g_true, std::span<const double> g_hat) {
    return normalized_fit(g_true, g_hat);
}

double nfit(const std::function<double(double)>& nl_true,
            const std::function<double(double)>& nl_hat) {
    constexpr int kPoints = 301;
    std::vector<double> t(kPoints), e(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        const double x = -1.5 + 0.01 * i;
        t[i] = nl_true(x);
        e[i] = nl_hat(x);
    }
    return normalized_fit(t, e);
}

Aggregate aggregate(std::span<const double> values) {
    std::vector<double> v;
    Aggregate agg;
    for (double x : values) {
        if (std::isnan(x)) ++agg.failed;
        else v.push_back(x);
    }
    agg.count = static_cast<long>(v.size());
    if (v.empty()) return agg;
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
    };
    agg.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    agg.median = quantile(0.5);
    agg.q1 = quantile(0.25);
    agg.q3 = quantile(0.75);
    return agg;
}

std::vector<std::string> FitReport::variants() const {
    std::vector<std::string> out;
    for (const auto& r : records)
        if (std::find(out.begin(), out.end(), r.variant) == out.end()) out.push_back(r.variant);
    return out;
}

namespace {

Aggregate aggregate_field(const std::vector<FitRecord>& records, const std::string& variant,
                          double FitRecord::*field) {
    std::vector<double> vals;
    for (const auto& r : records)
        if (r.variant == variant) vals.push_back(r.*field);
    return aggregate(vals);
}

}  // namespace

Aggregate FitReport::pfit_of(const std::string& v) const {
    return aggregate_field(records, v, &FitRecord::pfit);
}
Aggregate FitReport::gfit_of(const std::string& v) const {
    return aggregate_field(records, v, &FitRecord::gfit);
}
Aggregate FitReport::nfit_of(const std::string& v) const {
    return aggregate_field(records, v, &FitRecord::nfit);
}

TrainingData training_slice(const Dataset& ds, const McVariant& v) {
    const int n_eff = v.kernel.k2_delta ? v.n : 2 * v.n - 1;
    const long ctx = n_eff - 1;
    if (ds.train_begin < ctx)
        throw InsufficientData("dataset warmup shorter than the model lag context");
    TrainingData td;
    const long lo = ds.train_begin - ctx;
    td.u = ds.u.segment(lo, ds.train_end - lo);
    td.y = ds.y_noisy.segment(lo, ds.train_end - lo);
    td.t0 = lo;
    if (v.path == FitPath::FastSeparable)
        td.input_desc = ds.input.separable(ds.u.size(), v.n);
    return td;
}

FitRecord fit_one(const Dataset& ds, const McVariant& v, const McConfig& cfg,
                  std::uint64_t pair_seed, FittedModel* out_model) {
    FitRecord rec;
    rec.dataset = ds.tag;
    rec.variant = v.kernel.name();

    const TrainingData td = training_slice(ds, v);

    FitConfig fc;
    fc.path = v.path;
    fc.variant = v.kernel;
    fc.M = v.M;
    fc.n = v.n;
    fc.opt = cfg.opt;
    fc.init_policy = cfg.policy;
    fc.seed = pair_seed;
    fc.workers = cfg.fit_workers;

    const double t0 = now_seconds();
    const FittedModel model = fit(td, fc);
    rec.fit_seconds = now_seconds() - t0;

    const int n_eff = model.hyper.lag_span();
    const long ctx = n_eff - 1;
    const long lo = ds.test_begin - ctx;
    Vector u_te = ds.u.segment(lo, ds.test_end - lo);
    const double t1 = now_seconds();
    const Prediction pred =
        predict(model, std::span<const double>(u_te.data(), u_te.size()), lo);
    rec.predict_seconds = now_seconds() - t1;

    const long n_te = ds.test_end - ds.test_begin;
    if (pred.y.size() != n_te)
        throw Error("prediction length mismatch against the test window");
    const Vector y_ref = ds.y_clean.segment(ds.test_begin, n_te);
    rec.pfit = pfit(std::span<const double>(y_ref.data(), y_ref.size()),
                    std::span<const double>(pred.y.data(), pred.y.size()));
    rec.cost = model.cost;

    rec.a.assign(model.hyper.a.data(), model.hyper.a.data() + model.hyper.a.size());
    rec.h0 = model.hyper.h0;
    rec.sigma2 = model.hyper.sigma2;
    rec.alpha1 = model.hyper.k1.alpha;
    rec.beta1 = model.hyper.k1.beta;
    if (model.hyper.k2) {
        rec.alpha2 = model.hyper.k2->alpha;
        rec.beta2 = model.hyper.k2->beta;
    }

    // Linear-block and static-nonlinearity fits where the ground truth
    // supports them (single-linear-block data, -w variant).
    if (v.kernel.k2_delta && ds.system && ds.g1_true_ir.size() > 0 &&
        ds.system->nl.kind == NlSpec::Kind::Saturation) {
        int anchor = -1;
        for (long t = 0; t < ds.g1_true_ir.size(); ++t)
            if (std::abs(ds.g1_true_ir(t)) > 1e-12) { anchor = static_cast<int>(t); break; }
        if (anchor >= 0) {
            const auto dec = decompose_wiener(model, ds.g1_true_ir(anchor), anchor);
            Vector g_true = Vector::Zero(v.n);
            const long copy = std::min<long>(v.n, ds.g1_true_ir.size());
            g_true.head(copy) = ds.g1_true_ir.head(copy);
            rec.gfit = gfit(std::span<const double>(g_true.data(), g_true.size()),
                            std::span<const double>(dec.g_hat.data(), dec.g_hat.size()));
            const auto& nl = ds.system->nl;
            rec.nfit = nfit([&nl](double x) { return nl.eval(x); },
                            [&dec](double x) { return dec.nl_hat(x); });
        }
    }
    if (out_model) *out_model = model;
    return rec;
}

FitReport run_monte_carlo(const std::vector<Dataset>& bank,
                          const std::vector<McVariant>& variants, const McConfig& cfg) {
    if (bank.empty() || variants.empty())
        throw Error("run_monte_carlo: need at least one dataset and one variant");

    const std::size_t pairs = bank.size() * variants.size();
    FitReport report;
    report.records.resize(pairs);
    const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

    parallel_for(pairs, workers, [&](std::size_t idx) {
        const std::size_t d = idx / variants.size();
        const std::size_t vi = idx % variants.size();
        const Dataset& ds = bank[d];
        const McVariant& v = variants[vi];
        const std::uint64_t pair_seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (idx + 1));

        FitRecord rec;
        rec.dataset = ds.tag + "/" + std::to_string(d);
        rec.variant = v.kernel.name();
        try {
            rec = fit_one(ds, v, cfg, pair_seed);
            rec.dataset = ds.tag + "/" + std::to_string(d);
        } catch (const std::exception& e) {
            rec.status = e.what();
        }
        report.records[idx] = std::move(rec);
    });
    return report;
}

double TimingTable::median_of(const std::string& variant, long N) const {
    for (const auto& r : rows)
        if (r.variant == variant && r.N == N) return r.median_s;
    throw Error("timing table: no entry for " + variant + " at N=" + std::to_string(N));
}

TimingTable benchmark_timing(const std::vector<long>& n_list,
                             const std::vector<BenchVariant>& variants, int repetitions,
                             std::uint64_t seed) {
    if (n_list.empty() || variants.empty())
        throw Error("benchmark_timing: empty sample-size or variant list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw Error("benchmark_timing: N list must ascend");
    if (repetitions < 1) throw Error("benchmark_timing: repetitions must be >= 1");

    int max_n = 0;
    for (const auto& v : variants) max_n = std::max(max_n, 2 * v.n - 1);
    const long warm = max_n;

    BankSpec bs;
    bs.kind = BankKind::D4like;
    bs.count = 1;
    bs.n_train = n_list.back();
    bs.warmup = warm;
    const Dataset ds = build_databank(bs, seed)[0];

    // A fixed, representative hyperparameter point per variant; timing does
    // not depend on its value. The noise floor sits on the output-kernel
    // scale (the value is irrelevant to timing, the conditioning is not).
    auto hyper_for = [&](const BenchVariant& v, const EbEvaluator& ev) {
        KernelHyper h;
        h.M = v.M;
        h.n = v.n;
        h.a = Vector::Zero(v.M);
        for (int m = 0; m < v.M; ++m) h.a(m) = 0.6 / (m + 1);
        h.k1 = DcParams{1.0, 0.05, 0.05};
        if (!v.kernel.k2_delta) h.k2 = DcParams{1.0, 0.05, 0.05};
        h.zeta.variant = v.kernel.zeta;
        h.zeta.l = v.kernel.l;
        const double xbar = std::max(ev.x_diag_mean(h.k1), 1e-12);
        double qscale = 0.0, xp = 1.0;
        for (int m = 1; m <= v.M; ++m) {
            xp *= xbar;
            qscale += h.a(m - 1) * h.a(m - 1) * xp;
        }
        h.sigma2 = 0.1 * std::max(qscale, 1e-12);
        return h;
    };

    // Repetition rounds interleave the variants so clock or load drift
    // cannot bias one variant systematically.
    std::map<std::string, std::vector<double>> medians;
    TimingTable table;
    for (long N : n_list) {
        std::vector<std::unique_ptr<EbEvaluator>> evals;
        std::vector<KernelHyper> hypers;
        for (const auto& v : variants) {
            McVariant mv;
            mv.kernel = v.kernel;
            mv.path = v.path;
            mv.M = v.M;
            mv.n = v.n;
            Dataset window = ds;
            window.train_end = window.train_begin + N;
            TrainingData td = training_slice(window, mv);

            FitConfig fc;
            fc.path = v.path;
            fc.variant = v.kernel;
            fc.M = v.M;
            fc.n = v.n;
            evals.push_back(std::make_unique<EbEvaluator>(td, fc));
            hypers.push_back(hyper_for(v, *evals.back()));
            (void)evals.back()->cost(hypers.back());  // warm-up, discarded
        }

        std::vector<std::vector<double>> times(variants.size());
        for (int rep = 0; rep < repetitions; ++rep) {
            for (std::size_t vi = 0; vi < variants.size(); ++vi) {
                const double t0 = now_seconds();
                (void)evals[vi]->cost(hypers[vi]);
                times[vi].push_back(now_seconds() - t0);
            }
        }
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
            std::sort(times[vi].begin(), times[vi].end());
            const double med = times[vi][times[vi].size() / 2];
            medians[variants[vi].name].push_back(med);
            table.rows.push_back({variants[vi].name, N, med});
        }
    }

    // Least-squares slope of log(median) on log(N) per variant.
    for (const auto& v : variants) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = static_cast<double>(n_list.size());
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            const double x = std::log(static_cast<double>(n_list[i]));
            const double y = std::log(medians[v.name][i]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        table.slope[v.name] = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    }
    return table;
}

}  // namespace rvs
