// Command-line front end: simulate databanks, fit models, predict, run the
// timing benchmark and aggregate reports.

#include "rvs/io.hpp"
#include "rvs/metrics.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace rvs;

std::string default_out_root() {
    const char* env = std::getenv("RVS_OUT_ROOT");
    return env && *env ? env : ".";
}

BankSpec parse_bank(const std::string& name, int count, long n_train, double snr, int M,
                    char d2_config, long warmup) {
    BankSpec spec;
    if (name == "d1like") spec.kind = BankKind::D1like;
    else if (name == "d2like") spec.kind = BankKind::D2like;
    else if (name == "d3like") spec.kind = BankKind::D3like;
    else if (name == "d4like") spec.kind = BankKind::D4like;
    else throw ConfigError("--bank: unknown databank '" + name + "'");
    spec.count = count;
    spec.n_train = n_train;
    spec.snr_db = snr;
    spec.M = M;
    spec.d2_config = d2_config;
    spec.warmup = warmup;
    return spec;
}

struct FitFlags {
    std::string dataset, kernel = "dc-decay", path = "auto", out;
    int M = 2, n = 25, l = 100;
    int restarts = 5, max_iters = 2000, workers = 0;
    double tol = 1e-6;
    std::uint64_t seed = 1;
};

McVariant make_variant(const Dataset& ds, const FitFlags& f) {
    McVariant v;
    v.kernel = KernelVariantSpec::from_name(f.kernel);
    v.kernel.l = f.l;
    v.M = f.M;
    v.n = f.n;
    if (f.path == "dense") {
        v.path = FitPath::Dense;
    } else if (f.path == "fast") {
        v.path = FitPath::FastSeparable;
    } else if (f.path == "auto") {
        const bool separable_input = ds.input.kind == InputSpec::Kind::DecayingCosine;
        v.path = (v.kernel.k2_delta && separable_input) ? FitPath::FastSeparable
                                                        : FitPath::Dense;
    } else {
        throw ConfigError("--path: expected auto, dense or fast");
    }
    return v;
}

int cmd_simulate(const std::string& bank, int count, std::uint64_t seed, long n_train,
                 double snr, int M, char d2_config, long warmup, const std::string& out) {
    const BankSpec spec = parse_bank(bank, count, n_train, snr, M, d2_config, warmup);
    const auto datasets = build_databank(spec, seed);
    const fs::path root = fs::path(out) / spec.tag();
    std::vector<std::string> names;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        char leaf[32];
        std::snprintf(leaf, sizeof(leaf), "ds_%03zu", i);
        write_dataset(root / leaf, datasets[i]);
        names.emplace_back(leaf);
    }
    write_manifest(root, spec, seed, names);
    std::cout << "wrote " << datasets.size() << " datasets under " << root.string() << "\n";
    return 0;
}

int cmd_fit(const FitFlags& f) {
    const Dataset ds = read_dataset(f.dataset);
    const McVariant v = make_variant(ds, f);

    McConfig mc;
    mc.opt.restarts = f.restarts;
    mc.opt.max_iters = f.max_iters;
    mc.opt.tol_cost = f.tol;
    mc.seed = f.seed;
    mc.fit_workers = f.workers > 0 ? f.workers : default_workers();

    FittedModel model;
    FitRecord rec = fit_one(ds, v, mc, f.seed, &model);
    rec.dataset = f.dataset;

    const fs::path out = f.out.empty() ? fs::path(default_out_root()) : fs::path(f.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory: " + out.string());
    write_model(out / "model.json", model);
    append_report_row(out / "report.csv", rec);

    std::cout << "variant=" << rec.variant << " path=" << (model.used_fast ? "fast" : "dense")
              << " cost=" << format_double(rec.cost) << "\n";
    std::cout << "PFit=" << format_double(rec.pfit);
    if (!std::isnan(rec.gfit)) std::cout << " GFit=" << format_double(rec.gfit);
    if (!std::isnan(rec.nfit)) std::cout << " NFit=" << format_double(rec.nfit);
    std::cout << "\n";
    return 0;
}

int cmd_predict(const std::string& dataset, const std::string& model_file,
                const std::string& out) {
    const Dataset ds = read_dataset(dataset);
    const ModelFile mf = read_model(model_file);

    McVariant v;
    v.kernel = mf.cfg.variant;
    v.path = mf.cfg.path;
    v.M = mf.cfg.M;
    v.n = mf.cfg.n;
    const TrainingData td = training_slice(ds, v);
    const FittedModel model = rehydrate_model(mf, td);

    const long ctx = model.hyper.lag_span() - 1;
    const long lo = ds.test_begin - ctx;
    Vector u_te = ds.u.segment(lo, ds.test_end - lo);
    const Prediction pred =
        predict(model, std::span<const double>(u_te.data(), u_te.size()), lo);

    const long n_te = ds.test_end - ds.test_begin;
    const Vector y_ref = ds.y_clean.segment(ds.test_begin, n_te);
    const double fit_pct = pfit(std::span<const double>(y_ref.data(), y_ref.size()),
                                std::span<const double>(pred.y.data(), pred.y.size()));

    const fs::path out_dir = out.empty() ? fs::path(default_out_root()) : fs::path(out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    std::ofstream csv(out_dir / "predictions.csv", std::ios::binary);
    if (!csv) throw IoError("cannot write predictions.csv");
    csv << "t,y_hat,y_clean\n";
    for (long i = 0; i < n_te; ++i)
        csv << (ds.test_begin + i) << ',' << format_double(pred.y(i)) << ','
            << format_double(y_ref(i)) << '\n';

    std::cout << "PFit=" << format_double(fit_pct) << "\n";
    return 0;
}

int cmd_benchmark(const std::vector<long>& n_list, const std::vector<std::string>& variant_names,
                  int reps, int M, int n, std::uint64_t seed, const std::string& out) {
    std::vector<BenchVariant> variants;
    for (const auto& name : variant_names) {
        const auto colon = name.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--variants entries look like fast:dc-bd-w or dense:dc-decay-w");
        const std::string route = name.substr(0, colon);
        BenchVariant bv;
        bv.name = name;
        bv.kernel = KernelVariantSpec::from_name(name.substr(colon + 1));
        if (route == "fast") bv.path = FitPath::FastSeparable;
        else if (route == "dense") bv.path = FitPath::Dense;
        else throw ConfigError("--variants route must be fast or dense");
        bv.M = M;
        bv.n = n;
        variants.push_back(bv);
    }

    const TimingTable table = benchmark_timing(n_list, variants, reps, seed);

    std::cout << "variant,N,median_s,slope\n";
    for (const auto& r : table.rows)
        std::cout << r.variant << ',' << r.N << ',' << format_double(r.median_s) << ','
                  << format_double(table.slope.at(r.variant)) << "\n";

    const fs::path out_dir = out.empty() ? fs::path(default_out_root()) : fs::path(out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    write_timings_csv(out_dir / "timings.csv", table);
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
    FitReport report;
    for (const auto& run : runs) {
        const fs::path p(run);
        std::vector<fs::path> files;
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p))
                if (e.is_regular_file() && e.path().filename() == "report.csv")
                    files.push_back(e.path());
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            throw IoError("no such run path: " + run);
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            for (auto& rec : read_report_csv(f)) report.records.push_back(std::move(rec));
    }
    if (report.records.empty()) throw IoError("no report rows found under the given paths");

    const fs::path out_dir = out.empty() ? fs::path(default_out_root()) : fs::path(out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    write_report_json(out_dir / "report.json", report);
    write_report_csv(out_dir / "report.csv", report);

    for (const auto& v : report.variants()) {
        const Aggregate a = report.pfit_of(v);
        std::cout << v << ": mean PFit " << format_double(a.mean) << " median "
                  << format_double(a.median) << " (n=" << a.count << ", failed=" << a.failed
                  << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured-kernel regularized Volterra series identification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file with a [subcommand] section of long option names");
    app.allow_config_extras(CLI::config_extras_mode::error);  // unknown keys are rejected

    auto* sim = app.add_subcommand("simulate", "Generate a databank of datasets");
    sim->fallthrough();
    std::string sim_bank;
    int sim_count = 10, sim_M = 2;
    long sim_n_train = 300, sim_warmup = 160;
    double sim_snr = 10.0;
    std::string sim_d2 = "B";
    std::uint64_t sim_seed = 1;
    std::string sim_out = default_out_root();
    sim->add_option("--bank", sim_bank, "d1like | d2like | d3like | d4like")->required();
    sim->add_option("--count", sim_count, "Number of datasets");
    sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_option("--n-train", sim_n_train, "Training samples per dataset");
    sim->add_option("--snr", sim_snr, "Signal-to-noise ratio in dB");
    sim->add_option("--m", sim_M, "Polynomial order of the random banks");
    sim->add_option("--d2-config", sim_d2, "A or B");
    sim->add_option("--warmup", sim_warmup, "Pre-train context samples");
    sim->add_option("--out", sim_out, "Output root directory");

    auto* fitc = app.add_subcommand("fit", "Fit one model to a dataset");
    fitc->fallthrough();
    FitFlags ff;
    ff.out = default_out_root();
    fitc->add_option("--dataset", ff.dataset, "Dataset directory")->required();
    fitc->add_option("--kernel", ff.kernel, "dc-bd | dc-decay | dc-ob (+ -w suffix)");
    fitc->add_option("--path", ff.path, "auto | dense | fast");
    fitc->add_option("--m", ff.M, "Nonlinearity order");
    fitc->add_option("--n", ff.n, "Memory length");
    fitc->add_option("--l", ff.l, "Basis count for the dc-ob variants");
    fitc->add_option("--restarts", ff.restarts, "Optimizer restarts");
    fitc->add_option("--max-iters", ff.max_iters, "Optimizer iteration cap");
    fitc->add_option("--tol", ff.tol, "Optimizer cost tolerance");
    fitc->add_option("--seed", ff.seed, "Optimizer seed");
    fitc->add_option("--workers", ff.workers, "Concurrent restarts (0 = all cores)");
    fitc->add_option("--out", ff.out, "Output directory");

    auto* pred = app.add_subcommand("predict", "Predict a dataset's test split");
    pred->fallthrough();
    std::string pr_dataset, pr_model, pr_out = default_out_root();
    pred->add_option("--dataset", pr_dataset, "Dataset directory")->required();
    pred->add_option("--model", pr_model, "model.json path")->required();
    pred->add_option("--out", pr_out, "Output directory");

    auto* bench = app.add_subcommand("benchmark", "Time EB-cost evaluations");
    bench->fallthrough();
    std::vector<long> bn_list{1000, 2000, 4000};
    std::vector<std::string> bn_variants{"fast:dc-bd-w", "fast:dc-decay-w", "dense:dc-decay-w"};
    int bn_reps = 5, bn_M = 3, bn_n = 50;
    std::uint64_t bn_seed = 1;
    std::string bn_out = default_out_root();
    bench->add_option("--N", bn_list, "Sample sizes (ascending)")->delimiter(',');
    bench->add_option("--variants", bn_variants, "route:kernel entries")->delimiter(',');
    bench->add_option("--reps", bn_reps, "Repetitions per point");
    bench->add_option("--m", bn_M, "Nonlinearity order");
    bench->add_option("--n", bn_n, "Memory length");
    bench->add_option("--seed", bn_seed, "Data seed");
    bench->add_option("--out", bn_out, "Output directory");

    auto* rep = app.add_subcommand("report", "Aggregate fit records");
    rep->fallthrough();
    std::vector<std::string> rp_runs;
    std::string rp_out = default_out_root();
    rep->add_option("--runs", rp_runs, "Run directories or report.csv files")
        ->required()
        ->delimiter(',');
    rep->add_option("--out", rp_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_bank, sim_count, sim_seed, sim_n_train, sim_snr, sim_M,
                                sim_d2.empty() ? 'B' : sim_d2[0], sim_warmup, sim_out);
        if (fitc->parsed()) return cmd_fit(ff);
        if (pred->parsed()) return cmd_predict(pr_dataset, pr_model, pr_out);
        if (bench->parsed())
            return cmd_benchmark(bn_list, bn_variants, bn_reps, bn_M, bn_n, bn_seed, bn_out);
        if (rep->parsed()) return cmd_report(rp_runs, rp_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const AllRestartsFailed& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const SingularCore& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const NonFinite& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
