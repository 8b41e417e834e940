#include "rvs/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace rvs;
namespace tt = rvs::testing;

namespace {

fs::path scratch_dir(const std::string& leaf) {
    const fs::path p = fs::temp_directory_path() / "rvs_io_tests" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("dataset round trip") {
    BankSpec spec;
    spec.kind = BankKind::D2like;
    spec.d2_config = 'B';
    spec.M = 2;
    spec.count = 1;
    spec.n_train = 60;
    spec.warmup = 50;
    const Dataset ds = build_databank(spec, 99)[0];

    const fs::path dir = scratch_dir("roundtrip");
    write_dataset(dir / "ds", ds);
    const Dataset back = read_dataset(dir / "ds");

    CHECK(back.tag == ds.tag);
    CHECK(back.seed == ds.seed);
    CHECK(back.train_begin == ds.train_begin);
    CHECK(back.test_end == ds.test_end);
    CHECK(back.sigma2_true == ds.sigma2_true);
    REQUIRE(back.u.size() == ds.u.size());
    CHECK((back.u - ds.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y_noisy - ds.y_noisy).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y_clean - ds.y_clean).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.system.has_value());
    CHECK(back.system->nl.coeffs == ds.system->nl.coeffs);
    REQUIRE(back.system->g1.impulse_response().size() ==
            ds.system->g1.impulse_response().size());
    CHECK(back.system->g1.impulse_response() == ds.system->g1.impulse_response());
}

TEST_CASE("model round trip preserves the hyperparameters") {
    Rng rng(7);
    TrainingData td;
    td.u = tt::random_series(rng, 80);
    td.y = tt::random_series(rng, 80);

    KernelHyper h = tt::random_hyper(rng, 2, 4, true, ZetaSpec::Variant::OrthoBasis, 6);
    h.sigma2 = 0.4;
    FitConfig fc;
    fc.variant = KernelVariantSpec::from_name("dc-ob");
    fc.variant.l = 6;
    fc.M = 2;
    fc.n = 4;
    fc.seed = 42;
    const FittedModel model = finalize_model(td, fc, h);

    const fs::path dir = scratch_dir("model");
    write_model(dir / "model.json", model);
    const ModelFile mf = read_model(dir / "model.json");
    CHECK(mf.cost == model.cost);
    CHECK(mf.hyper.sigma2 == model.hyper.sigma2);
    CHECK(mf.hyper.k1.alpha == model.hyper.k1.alpha);
    REQUIRE(mf.hyper.k2.has_value());
    CHECK(mf.hyper.k2->beta == model.hyper.k2->beta);
    CHECK(mf.cfg.variant.name() == "dc-ob");
    CHECK(mf.cfg.variant.l == 6);

    const FittedModel re = rehydrate_model(mf, td);
    CHECK(re.cost == doctest::Approx(model.cost).epsilon(1e-12));
    CHECK((re.alpha - model.alpha).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("report writers") {
    FitReport rep;
    FitRecord a;
    a.dataset = "bank/0";
    a.variant = "dc-bd";
    a.pfit = 81.25;
    a.cost = -12.5;
    a.a = {0.5, -0.25};
    rep.records.push_back(a);
    FitRecord b = a;
    b.dataset = "bank/1";
    b.pfit = std::nan("");
    b.status = "factorization failed";
    rep.records.push_back(b);

    const fs::path dir = scratch_dir("report");
    write_report_csv(dir / "report.csv", rep);
    const auto rows = read_report_csv(dir / "report.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].pfit == 81.25);
    CHECK(std::isnan(rows[1].pfit));
    CHECK(rows[1].status == "factorization failed");
    CHECK(rows[0].a.size() == 2);
    CHECK(rows[0].a[1] == -0.25);

    append_report_row(dir / "more.csv", a);
    append_report_row(dir / "more.csv", b);
    CHECK(read_report_csv(dir / "more.csv").size() == 2);

    const std::string j = report_json_string(rep);
    CHECK(j.find("\"aggregates\"") != std::string::npos);
    CHECK(j.find("dc-bd") != std::string::npos);

    TimingTable tt_;
    tt_.rows = {{"fast", 100, 1e-4}, {"fast", 200, 2e-4}};
    tt_.slope["fast"] = 1.0;
    write_timings_csv(dir / "timings.csv", tt_);
    CHECK(fs::exists(dir / "timings.csv"));
}
