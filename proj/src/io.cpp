#include "rvs/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rvs {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << text;
    if (!out) throw IoError("write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json lti_to_json(const LtiSystem& s) {
    return json{{"num", s.num()}, {"den", s.den()}};
}

LtiSystem lti_from_json(const json& j) {
    return LtiSystem::from_tf(j.at("num").get<std::vector<double>>(),
                              j.at("den").get<std::vector<double>>());
}

json input_to_json(const InputSpec& in) {
    json j;
    switch (in.kind) {
        case InputSpec::Kind::WhiteGaussian: j["kind"] = "white_gaussian"; break;
        case InputSpec::Kind::Multisine:
            j["kind"] = "multisine";
            j["band"] = {in.band_lo, in.band_hi};
            j["n_sines"] = in.n_sines;
            break;
        case InputSpec::Kind::DecayingCosine:
            j["kind"] = "decaying_cosine";
            j["lambda"] = in.lambda;
            j["omega"] = in.omega;
            j["phase"] = in.phase;
            break;
    }
    if (in.clip) j["clip"] = {in.clip->first, in.clip->second};
    return j;
}

InputSpec input_from_json(const json& j) {
    InputSpec in;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "white_gaussian") {
        in.kind = InputSpec::Kind::WhiteGaussian;
    } else if (kind == "multisine") {
        in.kind = InputSpec::Kind::Multisine;
        in.band_lo = j.at("band")[0].get<double>();
        in.band_hi = j.at("band")[1].get<double>();
        in.n_sines = j.at("n_sines").get<int>();
    } else if (kind == "decaying_cosine") {
        in.kind = InputSpec::Kind::DecayingCosine;
        in.lambda = j.at("lambda").get<double>();
        in.omega = j.at("omega").get<double>();
        in.phase = j.at("phase").get<double>();
    } else {
        throw IoError("unknown input kind in meta.json: " + kind);
    }
    if (j.contains("clip"))
        in.clip = std::make_pair(j["clip"][0].get<double>(), j["clip"][1].get<double>());
    return in;
}

std::vector<double> to_std(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<long>(v.size()));
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& ds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory: " + dir.string());

    json meta;
    meta["schema"] = "rvs.dataset/1";
    meta["tag"] = ds.tag;
    meta["seed"] = ds.seed;
    meta["snr_db"] = ds.snr_db;
    meta["sigma2_true"] = ds.sigma2_true;
    meta["split"] = {{"train", {ds.train_begin, ds.train_end}},
                     {"test", {ds.test_begin, ds.test_end}}};
    meta["input"] = input_to_json(ds.input);
    meta["true_M"] = ds.true_M;
    if (ds.system) {
        json sys;
        sys["g1"] = lti_to_json(ds.system->g1);
        sys["g2"] = lti_to_json(ds.system->g2);
        sys["nl"] = {{"kind", ds.system->nl.kind == NlSpec::Kind::Polynomial ? "polynomial"
                                                                             : "saturation"},
                     {"coeffs", to_std(ds.system->nl.coeffs)}};
        meta["system"] = sys;
    }
    write_text(dir / "meta.json", meta.dump(2) + "\n");

    std::ostringstream csv;
    csv << "t,u,y_noisy,y_clean\n";
    for (long t = 0; t < ds.u.size(); ++t)
        csv << t << ',' << format_double(ds.u(t)) << ',' << format_double(ds.y_noisy(t)) << ','
            << format_double(ds.y_clean(t)) << '\n';
    write_text(dir / "data.csv", csv.str());
}

Dataset read_dataset(const fs::path& dir) {
    const json meta = json::parse(read_text(dir / "meta.json"));
    Dataset ds;
    ds.tag = meta.at("tag").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.snr_db = meta.at("snr_db").get<double>();
    ds.sigma2_true = meta.at("sigma2_true").get<double>();
    ds.train_begin = meta.at("split").at("train")[0].get<long>();
    ds.train_end = meta.at("split").at("train")[1].get<long>();
    ds.test_begin = meta.at("split").at("test")[0].get<long>();
    ds.test_end = meta.at("split").at("test")[1].get<long>();
    ds.input = input_from_json(meta.at("input"));
    ds.true_M = meta.value("true_M", 0);
    if (meta.contains("system")) {
        WhSystem sys;
        sys.g1 = lti_from_json(meta["system"]["g1"]);
        sys.g2 = lti_from_json(meta["system"]["g2"]);
        sys.nl.kind = meta["system"]["nl"]["kind"] == "polynomial" ? NlSpec::Kind::Polynomial
                                                                   : NlSpec::Kind::Saturation;
        sys.nl.coeffs = from_std(meta["system"]["nl"]["coeffs"].get<std::vector<double>>());
        ds.system = sys;
        ds.g1_true_ir = Eigen::Map<const Vector>(sys.g1.impulse_response().data(),
                                                 sys.g1.impulse_response().size());
    }

    const std::string data = read_text(dir / "data.csv");
    std::istringstream in(data);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> u, yn, yc;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t, uu, y1, y2;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &t, &uu, &y1, &y2) != 4)
            throw IoError("malformed data.csv row: " + line);
        u.push_back(uu);
        yn.push_back(y1);
        yc.push_back(y2);
    }
    ds.u = from_std(u);
    ds.y_noisy = from_std(yn);
    ds.y_clean = from_std(yc);
    return ds;
}

void write_manifest(const fs::path& dir, const BankSpec& spec, std::uint64_t seed,
                    const std::vector<std::string>& dataset_dirs) {
    json j;
    j["schema"] = "rvs.manifest/1";
    j["bank"] = spec.tag();
    j["count"] = spec.count;
    j["n_train"] = spec.n_train;
    j["snr_db"] = spec.snr_db;
    j["M"] = spec.M;
    j["seed"] = seed;
    j["datasets"] = dataset_dirs;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

json hyper_to_json(const KernelHyper& h) {
    json j;
    j["a"] = to_std(h.a);
    j["h0"] = h.h0;
    j["sigma2"] = h.sigma2;
    j["k1"] = {{"c", h.k1.c}, {"alpha", h.k1.alpha}, {"beta", h.k1.beta}};
    if (h.k2)
        j["k2"] = {{"c", h.k2->c}, {"alpha", h.k2->alpha}, {"beta", h.k2->beta}};
    j["zeta"] = {{"variant", h.zeta.variant == ZetaSpec::Variant::ExpDecay ? "decay" : "ob"},
                 {"l", h.zeta.l}};
    j["M"] = h.M;
    j["n"] = h.n;
    return j;
}

KernelHyper hyper_from_json(const json& j) {
    KernelHyper h;
    h.a = from_std(j.at("a").get<std::vector<double>>());
    h.h0 = j.at("h0").get<double>();
    h.sigma2 = j.at("sigma2").get<double>();
    h.k1 = DcParams{j["k1"]["c"].get<double>(), j["k1"]["alpha"].get<double>(),
                    j["k1"]["beta"].get<double>()};
    if (j.contains("k2"))
        h.k2 = DcParams{j["k2"]["c"].get<double>(), j["k2"]["alpha"].get<double>(),
                        j["k2"]["beta"].get<double>()};
    h.zeta.variant = j["zeta"]["variant"] == "decay" ? ZetaSpec::Variant::ExpDecay
                                                     : ZetaSpec::Variant::OrthoBasis;
    h.zeta.l = j["zeta"]["l"].get<int>();
    h.M = j.at("M").get<int>();
    h.n = j.at("n").get<int>();
    return h;
}

}  // namespace

void write_model(const fs::path& file, const FittedModel& model) {
    json j;
    j["schema"] = "rvs.model/1";
    j["variant"] = model.cfg.variant.name();
    j["path"] = model.used_fast ? "fast" : "dense";
    j["policy"] = model.cfg.init_policy == InitPolicy::TrimToKnown ? "trim" : "prewindow";
    j["seed"] = model.cfg.seed;
    j["cost"] = model.cost;
    j["hyper"] = hyper_to_json(model.hyper);
    j["opt"] = {{"restarts", model.cfg.opt.restarts},
                {"max_iters", model.cfg.opt.max_iters},
                {"tol_cost", model.cfg.opt.tol_cost}};
    write_text(file, j.dump(2) + "\n");
}

ModelFile read_model(const fs::path& file) {
    const json j = json::parse(read_text(file));
    ModelFile mf;
    mf.hyper = hyper_from_json(j.at("hyper"));
    mf.cost = j.at("cost").get<double>();
    mf.used_fast = j.at("path") == "fast";
    mf.cfg.variant = KernelVariantSpec::from_name(j.at("variant").get<std::string>());
    mf.cfg.variant.l = mf.hyper.zeta.l;
    mf.cfg.path = mf.used_fast ? FitPath::FastSeparable : FitPath::Dense;
    mf.cfg.M = mf.hyper.M;
    mf.cfg.n = mf.hyper.n;
    mf.cfg.init_policy = j.at("policy") == "trim" ? InitPolicy::TrimToKnown
                                                  : InitPolicy::PreWindowZero;
    mf.cfg.seed = j.at("seed").get<std::uint64_t>();
    mf.cfg.opt.restarts = j["opt"]["restarts"].get<int>();
    mf.cfg.opt.max_iters = j["opt"]["max_iters"].get<int>();
    mf.cfg.opt.tol_cost = j["opt"]["tol_cost"].get<double>();
    return mf;
}

FittedModel rehydrate_model(const ModelFile& mf, const TrainingData& data) {
    return finalize_model(data, mf.cfg, mf.hyper);
}

namespace {

json record_to_json(const FitRecord& r) {
    json j;
    j["dataset"] = r.dataset;
    j["variant"] = r.variant;
    j["pfit"] = r.pfit;
    j["gfit"] = r.gfit;
    j["nfit"] = r.nfit;
    j["cost"] = r.cost;
    j["fit_seconds"] = r.fit_seconds;
    j["predict_seconds"] = r.predict_seconds;
    j["status"] = r.status;
    j["a"] = r.a;
    j["h0"] = r.h0;
    j["sigma2"] = r.sigma2;
    j["alpha1"] = r.alpha1;
    j["beta1"] = r.beta1;
    j["alpha2"] = r.alpha2;
    j["beta2"] = r.beta2;
    return j;
}

json aggregate_to_json(const Aggregate& a) {
    return json{{"mean", a.mean},   {"median", a.median}, {"q1", a.q1},
                {"q3", a.q3},       {"count", a.count},   {"failed", a.failed}};
}

std::string csv_field(double v) { return std::isnan(v) ? "" : format_double(v); }

std::string record_csv_row(const FitRecord& r) {
    std::ostringstream os;
    std::string a_join;
    for (std::size_t i = 0; i < r.a.size(); ++i) {
        if (i) a_join += ';';
        a_join += format_double(r.a[i]);
    }
    os << r.dataset << ',' << r.variant << ',' << csv_field(r.pfit) << ',' << csv_field(r.gfit)
       << ',' << csv_field(r.nfit) << ',' << csv_field(r.cost) << ','
       << format_double(r.fit_seconds) << ',' << format_double(r.predict_seconds) << ','
       << '"' << r.status << '"' << ',' << csv_field(r.h0) << ',' << csv_field(r.sigma2) << ','
       << csv_field(r.alpha1) << ',' << csv_field(r.beta1) << ',' << csv_field(r.alpha2) << ','
       << csv_field(r.beta2) << ',' << '"' << a_join << '"';
    return os.str();
}

constexpr const char* kReportHeader =
    "dataset,variant,pfit,gfit,nfit,cost,fit_seconds,predict_seconds,status,"
    "h0,sigma2,alpha1,beta1,alpha2,beta2,a";

}  // namespace

std::string report_json_string(const FitReport& report) {
    json j;
    j["schema"] = "rvs.report/1";
    j["records"] = json::array();
    for (const auto& r : report.records) j["records"].push_back(record_to_json(r));
    json aggs;
    for (const auto& v : report.variants()) {
        aggs[v] = {{"pfit", aggregate_to_json(report.pfit_of(v))},
                   {"gfit", aggregate_to_json(report.gfit_of(v))},
                   {"nfit", aggregate_to_json(report.nfit_of(v))}};
    }
    j["aggregates"] = aggs;
    return j.dump(2) + "\n";
}

void write_report_json(const fs::path& file, const FitReport& report) {
    write_text(file, report_json_string(report));
}

void write_report_csv(const fs::path& file, const FitReport& report) {
    std::ostringstream os;
    os << kReportHeader << '\n';
    for (const auto& r : report.records) os << record_csv_row(r) << '\n';
    write_text(file, os.str());
}

void append_report_row(const fs::path& file, const FitRecord& rec) {
    const bool fresh = !fs::exists(file);
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open for appending: " + file.string());
    if (fresh) out << kReportHeader << '\n';
    out << record_csv_row(rec) << '\n';
}

std::vector<FitRecord> read_report_csv(const fs::path& file) {
    const std::string text = read_text(file);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != kReportHeader) throw IoError("unexpected report.csv header in " + file.string());
    std::vector<FitRecord> out;

    auto split_csv = [](const std::string& row) {
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (char c : row) {
            if (c == '"') { quoted = !quoted; continue; }
            if (c == ',' && !quoted) { fields.push_back(cur); cur.clear(); continue; }
            cur += c;
        }
        fields.push_back(cur);
        return fields;
    };
    auto num = [](const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 16) throw IoError("malformed report.csv row: " + line);
        FitRecord r;
        r.dataset = f[0];
        r.variant = f[1];
        r.pfit = num(f[2]);
        r.gfit = num(f[3]);
        r.nfit = num(f[4]);
        r.cost = num(f[5]);
        r.fit_seconds = num(f[6]);
        r.predict_seconds = num(f[7]);
        r.status = f[8];
        r.h0 = num(f[9]);
        r.sigma2 = num(f[10]);
        r.alpha1 = num(f[11]);
        r.beta1 = num(f[12]);
        r.alpha2 = num(f[13]);
        r.beta2 = num(f[14]);
        if (!f[15].empty()) {
            std::istringstream as(f[15]);
            std::string piece;
            while (std::getline(as, piece, ';')) r.a.push_back(std::stod(piece));
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_timings_csv(const fs::path& file, const TimingTable& table) {
    std::ostringstream os;
    os << "variant,N,median_s,slope\n";
    for (const auto& r : table.rows)
        os << r.variant << ',' << r.N << ',' << format_double(r.median_s) << ','
           << format_double(table.slope.at(r.variant)) << '\n';
    write_text(file, os.str());
}

}  // namespace rvs
