#include "jenseff/io.hpp"
#include "jenseff/jensen.hpp"
#include "jenseff/simgen.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

using namespace jenseff;
namespace fs = std::filesystem;

namespace {

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// "lo:hi:n" -> n log10-spaced points from 10^lo to 10^hi
Vector parse_log_grid(const std::string& spec, const char* what) {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1)
        throw std::invalid_argument(std::string(what) + ": expected lo:hi:count (log10 units)");
    return log10_grid(lo, hi, n);
}

// "start:stop:step" -> inclusive linear grid
Vector parse_linear_grid(const std::string& spec, const char* what) {
    double lo = 0.0, hi = 0.0, step = 0.0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || !(step > 0.0))
        throw std::invalid_argument(std::string(what) + ": expected start:stop:step");
    std::vector<double> pts;
    for (double v = lo; v <= hi + 1e-12 * std::max(1.0, std::abs(hi)); v += step) pts.push_back(v);
    if (pts.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
    return Eigen::Map<const Vector>(pts.data(), static_cast<Index>(pts.size()));
}

void write_with_manifest(const std::string& dir, io::Manifest manifest,
                         const std::vector<std::pair<std::string, std::string>>& files) {
    fs::create_directories(dir);
    manifest.finished_at = now_utc();
    for (const auto& [name, content] : files) io::write_file((fs::path(dir) / name).string(), content);
    io::write_file((fs::path(dir) / ("manifest_" + manifest.subcommand + ".json")).string(),
                   manifest.to_json().dump(2) + "\n");
}

struct StudyFlags {
    std::string design = "sim";
    std::string link = "exp_pos";
    double eta = 0.0;
    int n = 100;
    double sigma = 0.1;
    int reps = 200;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    int null_draws = 5000;
    std::string lambda_grid;       // known-index test, log10 spec
    std::string lambda_g_grid;     // full model
    std::string lambda_beta_grid;  // full model
    int jobs = 1;
    std::string out;
};

void add_study_flags(CLI::App* cmd, StudyFlags& f, bool with_link) {
    cmd->add_option("--design", f.design, "sim or fsim")->required();
    if (with_link)
        cmd->add_option("--link", f.link, "exp_pos, exp_neg, neg_square, linear or power_family")
            ->required();
    cmd->add_option("--eta", f.eta, "power_family curvature strength");
    cmd->add_option("--n", f.n, "observations per replicate");
    cmd->add_option("--sigma", f.sigma, "noise standard deviation");
    cmd->add_option("--reps", f.reps, "number of replicates");
    cmd->add_option("--seed", f.seed, "base seed (replicate r uses seed+r)")->required();
    cmd->add_option("--alpha", f.alpha, "significance level");
    cmd->add_option("--null-draws", f.null_draws, "null-simulation sample count");
    cmd->add_option("--lambda-grid", f.lambda_grid,
                    "known-index lambda grid, lo:hi:count in log10 units");
    cmd->add_option("--lambda-g-grid", f.lambda_g_grid, "link penalty grid, log10 lo:hi:count");
    cmd->add_option("--lambda-beta-grid", f.lambda_beta_grid,
                    "coefficient penalty grid, log10 lo:hi:count");
    cmd->add_option("--jobs", f.jobs, "parallel replicate workers");
    cmd->add_option("--out", f.out, "output directory")->required();
}

StudyConfig to_config(const StudyFlags& f) {
    StudyConfig cfg;
    cfg.design = parse_design(f.design);
    cfg.link = parse_link(f.link, f.eta);
    cfg.n = f.n;
    cfg.sigma = f.sigma;
    cfg.n_reps = f.reps;
    cfg.base_seed = f.seed;
    cfg.alpha = f.alpha;
    cfg.n_null_draws = f.null_draws;
    cfg.jobs = f.jobs;
    if (!f.lambda_grid.empty()) cfg.lambda_grid = parse_log_grid(f.lambda_grid, "--lambda-grid");
    if (!f.lambda_g_grid.empty())
        cfg.lambda_g_grid = parse_log_grid(f.lambda_g_grid, "--lambda-g-grid");
    if (!f.lambda_beta_grid.empty())
        cfg.lambda_beta_grid = parse_log_grid(f.lambda_beta_grid, "--lambda-beta-grid");
    return cfg;
}

io::json study_config_json(const StudyFlags& f) {
    io::json j;
    j["design"] = f.design;
    j["link"] = f.link;
    j["eta"] = f.eta;
    j["n"] = f.n;
    j["sigma"] = f.sigma;
    j["reps"] = f.reps;
    j["seed"] = f.seed;
    j["alpha"] = f.alpha;
    j["null_draws"] = f.null_draws;
    j["lambda_grid"] = f.lambda_grid;
    j["lambda_g_grid"] = f.lambda_g_grid;
    j["lambda_beta_grid"] = f.lambda_beta_grid;
    return j;
}

int cmd_simulate(const StudyFlags& f) {
    io::Manifest manifest;
    manifest.subcommand = "simulate";
    manifest.config = study_config_json(f);
    manifest.started_at = now_utc();

    const StudyConfig cfg = to_config(f);
    const StudyResult res = run_rejection_study(cfg);
    const std::string digest = manifest.config_digest();

    io::json per_seed;
    per_seed["schema"] = "jenseff.per_seed/1";
    per_seed["manifest"] = digest;
    per_seed["replicates"] = io::per_seed_to_json(res);
    write_with_manifest(f.out, std::move(manifest),
                        {{"rates.csv", io::rates_to_csv(cfg, res, digest)},
                         {"per_seed.json", per_seed.dump(2) + "\n"}});
    std::cout << "rate " << res.rate << " (" << res.n_reject << "/" << cfg.n_reps << " rejected, "
              << res.n_failed << " failed)\n";
    return 0;
}

int cmd_power(const StudyFlags& f, const std::string& eta_grid_spec) {
    io::Manifest manifest;
    manifest.subcommand = "power";
    manifest.config = study_config_json(f);
    manifest.config["eta_grid"] = eta_grid_spec;
    manifest.started_at = now_utc();

    const Vector etas = parse_linear_grid(eta_grid_spec, "--eta-grid");
    StudyConfig cfg = to_config(f);
    const auto points = run_power_curve(cfg, etas);
    const std::string digest = manifest.config_digest();
    write_with_manifest(f.out, std::move(manifest),
                        {{"power.csv", io::power_to_csv(points, cfg.n, cfg.sigma, digest)}});
    for (const auto& p : points) std::cout << "eta " << p.eta << ": rate " << p.rate << "\n";
    return 0;
}

struct IngestFlags {
    std::string densities;
    std::string environment;
    std::string out;
    IngestOptions opts;
};

int cmd_ingest(const IngestFlags& f) {
    io::Manifest manifest;
    manifest.subcommand = "ingest";
    manifest.started_at = now_utc();

    const std::string dens_csv = io::read_file(f.densities);
    const std::string env_csv = io::read_file(f.environment);
    manifest.input_digests[f.densities] = io::digest_hex(dens_csv);
    manifest.input_digests[f.environment] = io::digest_hex(env_csv);
    manifest.config = {{"window", f.opts.window},
                       {"grid_step", f.opts.grid_step},
                       {"knots_per_year", f.opts.knots_per_year},
                       {"max_gap", f.opts.max_gap},
                       {"segment_gap", f.opts.segment_gap},
                       {"log_density", f.opts.log_density},
                       {"beta_n_basis", f.opts.beta_n_basis},
                       {"beta_order", f.opts.beta_order},
                       {"g_n_basis", f.opts.g_n_basis},
                       {"g_order", f.opts.g_order}};

    auto dens = io::parse_series_csv(dens_csv, "density", f.densities);
    auto env = io::parse_series_csv(env_csv, "value", f.environment);

    std::vector<SitePair> sites;
    for (auto& [site, d] : dens) {
        const auto it = env.find(site);
        if (it == env.end())
            throw std::invalid_argument("ingest: site '" + site +
                                        "' has densities but no environment series");
        sites.push_back({std::move(d), it->second});
    }
    const AssembledDataset a = assemble_dataset(sites, f.opts);
    for (const auto& w : a.warnings) std::cerr << "warning: " << w << "\n";

    const std::string digest = manifest.config_digest();
    io::json ds = io::dataset_to_json(a);
    ds["manifest"] = digest;
    write_with_manifest(f.out, std::move(manifest), {{"dataset.json", ds.dump() + "\n"}});
    std::cout << "pooled " << a.ds.Y.size() << " rows from " << sites.size() << " site(s)\n";
    return 0;
}

std::string grid_csv(const FsimGrid& grid, const std::string& digest) {
    std::ostringstream os;
    os << "# manifest " << digest << "\n";
    os << "lambda_g,lambda_beta,objective,gcv,sigma_hat,converged,clamped\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const auto& fit = grid.fits[c];
        os << io::format_double(grid.cells[c].lambda_g) << ','
           << io::format_double(grid.cells[c].lambda_beta) << ',';
        if (fit)
            os << io::format_double(fit->objective) << ',' << io::format_double(fit->gcv_value)
               << ',' << io::format_double(fit->sigma_hat) << ',' << (fit->converged ? 1 : 0)
               << ',' << fit->n_clamped;
        else
            os << "nan,nan,nan,0,0";
        os << "\n";
    }
    return os.str();
}

struct FitFlags {
    std::string dataset;
    std::string out;
    double lambda_g = -1.0;
    double lambda_beta = -1.0;
    std::string lambda_g_grid;
    std::string lambda_beta_grid;
};

int cmd_fit(const FitFlags& f) {
    io::Manifest manifest;
    manifest.subcommand = "fit";
    manifest.started_at = now_utc();
    const std::string raw = io::read_file(f.dataset);
    manifest.input_digests[f.dataset] = io::digest_hex(raw);
    manifest.config = {{"lambda_g", f.lambda_g},
                       {"lambda_beta", f.lambda_beta},
                       {"lambda_g_grid", f.lambda_g_grid},
                       {"lambda_beta_grid", f.lambda_beta_grid}};

    const io::LoadedDataset loaded = io::dataset_from_json(io::json::parse(raw), f.dataset);
    const FsimBases bases{loaded.g_basis, loaded.beta_basis};
    const std::string digest = manifest.config_digest();

    if (f.lambda_g >= 0.0 && f.lambda_beta >= 0.0) {
        const FsimFit fit = fit_fsim(loaded.ds, bases, f.lambda_g, f.lambda_beta);
        io::json j = io::fit_to_json(fit);
        j["manifest"] = digest;
        write_with_manifest(f.out, std::move(manifest), {{"fit.json", j.dump() + "\n"}});
        std::cout << "objective " << fit.objective << ", sigma " << fit.sigma_hat << "\n";
        return 0;
    }

    const Vector lg = f.lambda_g_grid.empty() ? loaded.lambda_g_grid
                                              : parse_log_grid(f.lambda_g_grid, "--lambda-g-grid");
    const Vector lb = f.lambda_beta_grid.empty()
                          ? loaded.lambda_beta_grid
                          : parse_log_grid(f.lambda_beta_grid, "--lambda-beta-grid");
    const FsimGrid grid = warm_start_grid(loaded.ds, bases, lg, lb);
    const FsimFit& best = *grid.fits[static_cast<std::size_t>(grid.gcv_cell)];
    io::json j = io::fit_to_json(best);
    j["manifest"] = digest;
    j["gcv_cell"] = grid.gcv_cell;
    j["n_sweeps"] = grid.n_sweeps;
    write_with_manifest(f.out, std::move(manifest),
                        {{"fit.json", j.dump() + "\n"}, {"grid.csv", grid_csv(grid, digest)}});
    std::cout << "GCV cell " << grid.gcv_cell << ": lambda_g " << best.lambda_g
              << ", lambda_beta " << best.lambda_beta << ", sigma " << best.sigma_hat << "\n";
    return 0;
}

struct TestFlags {
    std::string dataset;
    std::string out;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    int null_draws = 5000;
    std::string lambda_g_grid;
    std::string lambda_beta_grid;
    bool one_sided = false;
};

int cmd_test(const TestFlags& f) {
    io::Manifest manifest;
    manifest.subcommand = "test";
    manifest.started_at = now_utc();
    const std::string raw = io::read_file(f.dataset);
    manifest.input_digests[f.dataset] = io::digest_hex(raw);
    manifest.config = {{"seed", f.seed},
                       {"alpha", f.alpha},
                       {"null_draws", f.null_draws},
                       {"lambda_g_grid", f.lambda_g_grid},
                       {"lambda_beta_grid", f.lambda_beta_grid},
                       {"one_sided", f.one_sided}};

    const io::LoadedDataset loaded = io::dataset_from_json(io::json::parse(raw), f.dataset);
    const FsimBases bases{loaded.g_basis, loaded.beta_basis};
    const Vector lg = f.lambda_g_grid.empty() ? loaded.lambda_g_grid
                                              : parse_log_grid(f.lambda_g_grid, "--lambda-g-grid");
    const Vector lb = f.lambda_beta_grid.empty()
                          ? loaded.lambda_beta_grid
                          : parse_log_grid(f.lambda_beta_grid, "--lambda-beta-grid");

    const FsimGrid grid = warm_start_grid(loaded.ds, bases, lg, lb);
    const JensenSurface surf = jensen_test_from_grid(grid, f.alpha, f.null_draws, f.seed);

    const std::string digest = manifest.config_digest();
    io::json j = io::surface_to_json(surf);
    j["manifest"] = digest;
    if (f.one_sided) {
        // one-sided report: max over signed t against the same simulated crit
        double max_t = 0.0;
        bool first = true;
        for (std::size_t c = 0; c < surf.grid.size(); ++c) {
            if (!surf.valid[c]) continue;
            const double t = surf.t[static_cast<Index>(c)];
            max_t = first ? t : std::max(max_t, t);
            first = false;
        }
        j["one_sided_T"] = max_t;
        j["one_sided_reject"] = max_t > surf.crit;
    }
    write_with_manifest(f.out, std::move(manifest),
                        {{"surface.csv", io::surface_to_csv(surf, digest)},
                         {"surface.json", j.dump(2) + "\n"},
                         {"grid.csv", grid_csv(grid, digest)}});
    std::cout << "T_obs " << surf.T_obs << " vs crit " << surf.crit << " -> "
              << (surf.reject ? "reject" : "no rejection") << " (sign "
              << to_string(surf.sign_summary) << ", sigma " << surf.sigma_used.sigma << ")\n";
    return 0;
}

int cmd_curvature(std::uint64_t seed, const std::string& out) {
    io::Manifest manifest;
    manifest.subcommand = "curvature-demo";
    manifest.config = {{"seed", seed}};
    manifest.started_at = now_utc();
    const CurvatureReport rep = curvature_demo(seed);
    io::json j = io::curvature_report_to_json(rep);
    j["manifest"] = manifest.config_digest();
    write_with_manifest(out, std::move(manifest), {{"curvature.json", j.dump(2) + "\n"}});
    std::cout << "init=true:  rse " << rep.truth_init.rse << ", rase0 " << rep.truth_init.rase0
              << ", rase1 " << rep.truth_init.rase1 << ", rase2 " << rep.truth_init.rase2
              << ", sup|g''| " << rep.truth_init.sup_abs_g2 << "\n";
    std::cout << "init=equal: rse " << rep.equal_init.rse << ", rase0 " << rep.equal_init.rase0
              << ", rase1 " << rep.equal_init.rase1 << ", rase2 " << rep.equal_init.rase2
              << ", sup|g''| " << rep.equal_init.sup_abs_g2 << "\n";
    std::cout << "sup |g''(true-init) - g''(equal-init)| = " << rep.sup_g2_difference << "\n";
    return 0;
}

int cmd_sigma_check(const StudyFlags& f) {
    io::Manifest manifest;
    manifest.subcommand = "sigma-check";
    manifest.config = study_config_json(f);
    manifest.started_at = now_utc();

    const StudyConfig cfg = to_config(f);
    const StudyResult res = run_rejection_study(cfg);
    const std::string digest = manifest.config_digest();

    std::ostringstream csv;
    csv << "# manifest " << digest << "\n";
    csv << "seed,sigma_hat\n";
    int in_band = 0, usable = 0;
    const double lo = 0.8 * cfg.sigma, hi = 1.2 * cfg.sigma;
    for (const auto& rep : res.per_seed) {
        if (rep.failed) continue;
        ++usable;
        if (rep.sigma_hat >= lo && rep.sigma_hat <= hi) ++in_band;
        csv << rep.seed << ',' << io::format_double(rep.sigma_hat) << "\n";
    }
    io::json summary;
    summary["schema"] = "jenseff.sigma_check/1";
    summary["manifest"] = digest;
    summary["band"] = {lo, hi};
    summary["fraction_in_band"] = usable ? static_cast<double>(in_band) / usable : 0.0;
    summary["n_usable"] = usable;
    write_with_manifest(f.out, std::move(manifest),
                        {{"sigma.csv", csv.str()}, {"sigma_summary.json", summary.dump(2) + "\n"}});
    std::cout << "sigma in [" << lo << ", " << hi << "] for " << in_band << "/" << usable
              << " replicates\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized-spline single index models and the Jensen effect"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value configuration file; flags take precedence");

    StudyFlags sim_flags;
    auto* simulate = app.add_subcommand("simulate", "rejection-rate study over replicates");
    add_study_flags(simulate, sim_flags, true);

    StudyFlags power_flags;
    std::string eta_grid = "0:1.2:0.2";
    auto* power = app.add_subcommand("power", "power curve over the curvature strength eta");
    add_study_flags(power, power_flags, false);
    power->add_option("--eta-grid", eta_grid, "start:stop:step for eta");

    IngestFlags ingest_flags;
    auto* ingest = app.add_subcommand("ingest", "build a dataset from density/environment CSVs");
    ingest->add_option("--densities", ingest_flags.densities, "site_id,time_days,density CSV")
        ->required();
    ingest->add_option("--environment", ingest_flags.environment, "site_id,time_days,value CSV")
        ->required();
    ingest->add_option("--out", ingest_flags.out, "output directory")->required();
    ingest->add_option("--window", ingest_flags.opts.window, "history window in days");
    ingest->add_option("--grid-step", ingest_flags.opts.grid_step, "history grid step in days");
    ingest->add_option("--knots-per-year", ingest_flags.opts.knots_per_year,
                       "spline knots per year for the environment smooth");
    ingest->add_option("--max-gap", ingest_flags.opts.max_gap,
                       "max days between density pairs forming a response");
    ingest->add_option("--segment-gap", ingest_flags.opts.segment_gap,
                       "gap in days that splits an environment series");
    ingest->add_flag("--log-density", ingest_flags.opts.log_density,
                     "log-transform densities before differencing");
    ingest->add_option("--beta-nbasis", ingest_flags.opts.beta_n_basis);
    ingest->add_option("--beta-order", ingest_flags.opts.beta_order);
    ingest->add_option("--g-nbasis", ingest_flags.opts.g_n_basis);
    ingest->add_option("--g-order", ingest_flags.opts.g_order);

    FitFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "fit the model at fixed penalties or by GCV");
    fit->add_option("--dataset", fit_flags.dataset, "dataset.json from ingest")->required();
    fit->add_option("--out", fit_flags.out, "output directory")->required();
    fit->add_option("--lambda-g", fit_flags.lambda_g, "fixed link penalty");
    fit->add_option("--lambda-beta", fit_flags.lambda_beta, "fixed coefficient penalty");
    fit->add_option("--lambda-g-grid", fit_flags.lambda_g_grid, "log10 lo:hi:count");
    fit->add_option("--lambda-beta-grid", fit_flags.lambda_beta_grid, "log10 lo:hi:count");

    TestFlags test_flags;
    auto* test = app.add_subcommand("test", "Jensen-effect surface and decision for a dataset");
    test->add_option("--dataset", test_flags.dataset, "dataset.json from ingest")->required();
    test->add_option("--out", test_flags.out, "output directory")->required();
    test->add_option("--seed", test_flags.seed, "seed for the null simulation")->required();
    test->add_option("--alpha", test_flags.alpha, "significance level");
    test->add_option("--null-draws", test_flags.null_draws);
    test->add_option("--lambda-g-grid", test_flags.lambda_g_grid, "log10 lo:hi:count");
    test->add_option("--lambda-beta-grid", test_flags.lambda_beta_grid, "log10 lo:hi:count");
    test->add_flag("--one-sided", test_flags.one_sided,
                   "also report the one-sided max-t decision");

    std::uint64_t curv_seed = 0;
    std::string curv_out;
    auto* curv =
        app.add_subcommand("curvature-demo", "initialization sensitivity of curvature estimates");
    curv->add_option("--seed", curv_seed, "data seed")->required();
    curv->add_option("--out", curv_out, "output directory")->required();

    StudyFlags sigma_flags;
    sigma_flags.design = "fsim";
    auto* sigma = app.add_subcommand("sigma-check", "residual-scale recovery across replicates");
    add_study_flags(sigma, sigma_flags, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_flags);
        if (power->parsed()) return cmd_power(power_flags, eta_grid);
        if (ingest->parsed()) return cmd_ingest(ingest_flags);
        if (fit->parsed()) return cmd_fit(fit_flags);
        if (test->parsed()) return cmd_test(test_flags);
        if (curv->parsed()) return cmd_curvature(curv_seed, curv_out);
        if (sigma->parsed()) return cmd_sigma_check(sigma_flags);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
