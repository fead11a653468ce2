#include "jenseff/io.hpp"
#include "jenseff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jenseff::io {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

CsvTable read_csv(const std::string& content, const std::string& what) {
    CsvTable t;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;  // embedded manifest reference
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) {
                std::ostringstream os;
                os << what << ": line " << line_no << " has " << cells.size()
                   << " fields, expected " << t.header.size();
                throw std::invalid_argument(os.str());
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw std::invalid_argument(what + ": missing header row");
    return t;
}

namespace {

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Vector vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
    return v;
}

double parse_number(const std::string& cell, const std::string& what, std::size_t row,
                    const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        std::ostringstream os;
        os << what << ": row " << row << ", column '" << column << "': cannot parse '" << cell
           << "' as a number";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

json basis_to_json(const BasisSystem& b) {
    json j;
    j["kind"] = b.kind == BasisKind::bspline ? "bspline" : "fourier";
    j["a"] = b.domain.a;
    j["b"] = b.domain.b;
    j["n_basis"] = b.n_basis;
    if (b.kind == BasisKind::bspline) j["order"] = b.order;
    return j;
}

BasisSystem basis_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const Interval dom{j.at("a").get<double>(), j.at("b").get<double>()};
    const int n_basis = j.at("n_basis").get<int>();
    if (kind == "bspline") return make_bspline_basis(dom, n_basis, j.at("order").get<int>());
    if (kind == "fourier") return make_fourier_basis(dom, n_basis);
    throw std::invalid_argument("basis_from_json: unknown kind '" + kind + "'");
}

json dataset_to_json(const AssembledDataset& a) {
    json j;
    j["schema"] = "jenseff.dataset/1";
    j["t_grid"] = vector_to_json(a.ds.t_grid);
    j["Y"] = vector_to_json(a.ds.Y);
    json xs = json::array();
    for (Index r = 0; r < a.ds.X.rows(); ++r) xs.push_back(vector_to_json(a.ds.X.row(r)));
    j["X"] = xs;
    json prov = json::array();
    for (const auto& p : a.provenance) prov.push_back({{"site", p.site_id}, {"time", p.obs_time}});
    j["provenance"] = prov;
    j["beta_basis"] = basis_to_json(a.beta_basis);
    j["g_basis"] = basis_to_json(a.recommended_g_basis);
    j["lambda_g_grid"] = vector_to_json(a.lambda_g_grid);
    j["lambda_beta_grid"] = vector_to_json(a.lambda_beta_grid);
    return j;
}

LoadedDataset dataset_from_json(const json& j, const std::string& what) {
    if (j.value("schema", "") != "jenseff.dataset/1")
        throw std::invalid_argument(what + ": not a jenseff.dataset/1 file");
    LoadedDataset out;
    out.ds.t_grid = vector_from_json(j.at("t_grid"), what + ".t_grid");
    out.ds.Y = vector_from_json(j.at("Y"), what + ".Y");
    const auto& xs = j.at("X");
    out.ds.X.resize(static_cast<Index>(xs.size()), out.ds.t_grid.size());
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const Vector row = vector_from_json(xs[r], what + ".X row");
        if (row.size() != out.ds.t_grid.size())
            throw std::invalid_argument(what + ": X row length mismatch with t_grid");
        out.ds.X.row(static_cast<Index>(r)) = row;
    }
    if (j.contains("provenance"))
        for (const auto& p : j.at("provenance"))
            out.provenance.push_back({p.at("site").get<std::string>(), p.at("time").get<double>()});
    out.beta_basis = basis_from_json(j.at("beta_basis"));
    out.g_basis = basis_from_json(j.at("g_basis"));
    out.lambda_g_grid = vector_from_json(j.at("lambda_g_grid"), what + ".lambda_g_grid");
    out.lambda_beta_grid = vector_from_json(j.at("lambda_beta_grid"), what + ".lambda_beta_grid");
    return out;
}

json fit_to_json(const FsimFit& fit) {
    json j;
    j["schema"] = "jenseff.fit/1";
    j["c"] = vector_to_json(fit.c);
    j["d"] = vector_to_json(fit.d);
    j["lambda_g"] = fit.lambda_g;
    j["lambda_beta"] = fit.lambda_beta;
    j["g_basis"] = basis_to_json(fit.g_basis);
    j["beta_basis"] = basis_to_json(fit.beta_basis);
    j["index"] = vector_to_json(fit.index);
    j["index_bar"] = fit.index_bar;
    j["s_range"] = fit.s_range;
    j["sigma_hat"] = fit.sigma_hat;
    j["gcv"] = fit.gcv_value;
    j["objective"] = fit.objective;
    j["rss"] = fit.rss;
    j["converged"] = fit.converged;
    j["n_restarts_used"] = fit.n_restarts_used;
    j["n_clamped"] = fit.n_clamped;
    j["total_iterations"] = fit.total_iterations;
    return j;
}

std::string surface_to_csv(const JensenSurface& s, const std::string& manifest_digest) {
    std::ostringstream os;
    if (!manifest_digest.empty()) os << "# manifest " << manifest_digest << "\n";
    os << "lambda_g,lambda_beta,delta,sd,t,significant\n";
    for (std::size_t cell = 0; cell < s.grid.size(); ++cell) {
        const auto i = static_cast<Index>(cell);
        const bool sig = s.valid[cell] && std::abs(s.t[i]) > s.crit;
        os << format_double(s.grid[cell].lambda_g) << ',' << format_double(s.grid[cell].lambda_beta)
           << ',' << format_double(s.delta[i]) << ',' << format_double(s.sd[i]) << ','
           << format_double(s.t[i]) << ',' << (sig ? 1 : 0) << "\n";
    }
    return os.str();
}

json surface_to_json(const JensenSurface& s) {
    json j;
    j["schema"] = "jenseff.surface/1";
    j["T_obs"] = s.T_obs;
    j["crit"] = s.crit;
    j["alpha"] = s.alpha;
    j["n_null_draws"] = s.n_null_draws;
    j["seed"] = s.seed;
    j["reject"] = s.reject;
    j["sign_summary"] = to_string(s.sign_summary);
    j["sigma_used"] = {{"sigma", s.sigma_used.sigma},
                       {"lambda_g", s.sigma_used.lambda_g},
                       {"lambda_beta", s.sigma_used.lambda_beta},
                       {"cell", s.sigma_used.cell}};
    j["n_lambda_g"] = s.n_lambda_g;
    j["n_lambda_beta"] = s.n_lambda_beta;
    j["cell_order"] = "row-major";
    j["gcv_cell"] = s.gcv_cell;
    j["argmax_delta_cell"] = s.argmax_delta_cell;
    j["argmin_delta_cell"] = s.argmin_delta_cell;
    json valid = json::array();
    for (const char v : s.valid) valid.push_back(v != 0);
    j["valid"] = valid;
    json fails = json::array();
    for (const auto& f : s.failures) fails.push_back(f);
    j["failures"] = fails;
    json a = json::array();
    for (Index r = 0; r < s.A.rows(); ++r) a.push_back(vector_to_json(s.A.row(r)));
    j["A"] = a;
    return j;
}

std::string power_to_csv(const std::vector<PowerPoint>& points, int n, double sigma,
                         const std::string& manifest_digest) {
    std::ostringstream os;
    if (!manifest_digest.empty()) os << "# manifest " << manifest_digest << "\n";
    os << "eta,rate,n_reps,n,sigma\n";
    for (const auto& p : points)
        os << format_double(p.eta) << ',' << format_double(p.rate) << ',' << p.n_reps << ',' << n
           << ',' << format_double(sigma) << "\n";
    return os.str();
}

std::string rates_to_csv(const StudyConfig& cfg, const StudyResult& res,
                         const std::string& manifest_digest) {
    std::ostringstream os;
    if (!manifest_digest.empty()) os << "# manifest " << manifest_digest << "\n";
    os << "design,link,n,sigma,n_reps,rate,n_reject,n_failed\n";
    os << to_string(cfg.design) << ',' << to_string(cfg.link) << ',' << cfg.n << ','
       << format_double(cfg.sigma) << ',' << cfg.n_reps << ',' << format_double(res.rate) << ','
       << res.n_reject << ',' << res.n_failed << "\n";
    return os.str();
}

json per_seed_to_json(const StudyResult& res) {
    json arr = json::array();
    for (const auto& rep : res.per_seed) {
        arr.push_back({{"seed", rep.seed},
                       {"reject", rep.reject},
                       {"T_obs", rep.T_obs},
                       {"crit", rep.crit},
                       {"sigma_hat", rep.sigma_hat},
                       {"delta_at_gcv", rep.delta_at_gcv},
                       {"sign_summary", rep.sign_summary},
                       {"failed", rep.failed},
                       {"error", rep.error}});
    }
    return arr;
}

std::map<std::string, IrregularSeries> parse_series_csv(const std::string& content,
                                                        const std::string& value_column,
                                                        const std::string& what) {
    const CsvTable t = read_csv(content, what);
    const std::vector<std::string> expected{"site_id", "time_days", value_column};
    if (t.header != expected) {
        std::ostringstream os;
        os << what << ": header must be 'site_id,time_days," << value_column << "', got '";
        for (std::size_t i = 0; i < t.header.size(); ++i)
            os << (i ? "," : "") << t.header[i];
        os << "'";
        throw std::invalid_argument(os.str());
    }

    struct Entry {
        double time;
        double value;
        std::size_t row;
    };
    std::map<std::string, std::vector<Entry>> by_site;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cells = t.rows[r];
        if (cells[0].empty()) {
            std::ostringstream os;
            os << what << ": row " << r + 2 << ": empty site_id";
            throw std::invalid_argument(os.str());
        }
        by_site[cells[0]].push_back({parse_number(cells[1], what, r + 2, "time_days"),
                                     parse_number(cells[2], what, r + 2, value_column), r + 2});
    }

    std::map<std::string, IrregularSeries> out;
    for (auto& [site, entries] : by_site) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < entries.size(); ++i) {
            if (entries[i].time == entries[i - 1].time) {
                std::ostringstream os;
                os << what << ": site '" << site << "': duplicate time " << entries[i].time
                   << " (rows " << entries[i - 1].row << " and " << entries[i].row << ")";
                throw std::invalid_argument(os.str());
            }
        }
        IrregularSeries s;
        s.site_id = site;
        s.times.resize(static_cast<Index>(entries.size()));
        s.values.resize(static_cast<Index>(entries.size()));
        for (std::size_t i = 0; i < entries.size(); ++i) {
            s.times[static_cast<Index>(i)] = entries[i].time;
            s.values[static_cast<Index>(i)] = entries[i].value;
        }
        out.emplace(site, std::move(s));
    }
    return out;
}

namespace {

json curvature_fit_to_json(const CurvatureFitReport& r) {
    return {{"init", r.init},         {"rse", r.rse},
            {"rase0", r.rase0},       {"rase1", r.rase1},
            {"rase2", r.rase2},       {"sup_abs_g2", r.sup_abs_g2},
            {"coef_norm", r.coef_norm}, {"lambda_g", r.lambda_g},
            {"lambda_beta", r.lambda_beta}};
}

CurvatureFitReport curvature_fit_from_json(const json& j) {
    CurvatureFitReport r;
    r.init = j.at("init").get<std::string>();
    r.rse = j.at("rse").get<double>();
    r.rase0 = j.at("rase0").get<double>();
    r.rase1 = j.at("rase1").get<double>();
    r.rase2 = j.at("rase2").get<double>();
    r.sup_abs_g2 = j.at("sup_abs_g2").get<double>();
    r.coef_norm = j.at("coef_norm").get<double>();
    r.lambda_g = j.at("lambda_g").get<double>();
    r.lambda_beta = j.at("lambda_beta").get<double>();
    return r;
}

}  // namespace

json curvature_report_to_json(const CurvatureReport& rep) {
    json j;
    j["schema"] = "jenseff.curvature/1";
    j["seed"] = rep.seed;
    j["truth_init"] = curvature_fit_to_json(rep.truth_init);
    j["equal_init"] = curvature_fit_to_json(rep.equal_init);
    j["sup_g2_difference"] = rep.sup_g2_difference;
    return j;
}

CurvatureReport curvature_report_from_json(const json& j) {
    if (j.value("schema", "") != "jenseff.curvature/1")
        throw std::invalid_argument("curvature_report_from_json: wrong schema");
    CurvatureReport rep;
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.truth_init = curvature_fit_from_json(j.at("truth_init"));
    rep.equal_init = curvature_fit_from_json(j.at("equal_init"));
    rep.sup_g2_difference = j.at("sup_g2_difference").get<double>();
    return rep;
}

std::string Manifest::config_digest() const {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = input_digests;
    j["artifact_version"] = artifact_version;
    return digest_hex(j.dump());
}

json Manifest::to_json() const {
    json j;
    j["schema"] = "jenseff.manifest/1";
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = input_digests;
    j["artifact_version"] = artifact_version;
    j["config_digest"] = config_digest();
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
}

}  // namespace jenseff::io
