#include "jenseff/simgen.hpp"
#include "jenseff/errors.hpp"
#include "jenseff/linalg.hpp"
#include "jenseff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <atomic>
#include <thread>

namespace jenseff {

double LinkSpec::operator()(double s) const {
    switch (name) {
        case LinkName::exp_pos: return std::exp(s);
        case LinkName::exp_neg: return std::exp(-s);
        case LinkName::neg_square: return -s * s;
        case LinkName::linear: return s;
        case LinkName::power_family: return s + eta * std::exp(-s);
    }
    return 0.0;
}

double LinkSpec::d1(double s) const {
    switch (name) {
        case LinkName::exp_pos: return std::exp(s);
        case LinkName::exp_neg: return -std::exp(-s);
        case LinkName::neg_square: return -2.0 * s;
        case LinkName::linear: return 1.0;
        case LinkName::power_family: return 1.0 - eta * std::exp(-s);
    }
    return 0.0;
}

double LinkSpec::d2(double s) const {
    switch (name) {
        case LinkName::exp_pos: return std::exp(s);
        case LinkName::exp_neg: return std::exp(-s);
        case LinkName::neg_square: return -2.0;
        case LinkName::linear: return 0.0;
        case LinkName::power_family: return eta * std::exp(-s);
    }
    return 0.0;
}

LinkSpec parse_link(const std::string& name, double eta) {
    LinkSpec l;
    l.eta = eta;
    if (name == "exp_pos") l.name = LinkName::exp_pos;
    else if (name == "exp_neg") l.name = LinkName::exp_neg;
    else if (name == "neg_square") l.name = LinkName::neg_square;
    else if (name == "linear") l.name = LinkName::linear;
    else if (name == "power_family") l.name = LinkName::power_family;
    else throw std::invalid_argument("unknown link: " + name);
    return l;
}

std::string to_string(const LinkSpec& link) {
    switch (link.name) {
        case LinkName::exp_pos: return "exp_pos";
        case LinkName::exp_neg: return "exp_neg";
        case LinkName::neg_square: return "neg_square";
        case LinkName::linear: return "linear";
        case LinkName::power_family: {
            std::ostringstream os;
            os << "power_family(eta=" << link.eta << ")";
            return os.str();
        }
    }
    return "?";
}

StudyDesign parse_design(const std::string& name) {
    if (name == "sim") return StudyDesign::sim;
    if (name == "fsim") return StudyDesign::fsim;
    throw std::invalid_argument("unknown design: " + name);
}

std::string to_string(StudyDesign d) {
    return d == StudyDesign::sim ? "sim" : "fsim";
}

SimData gen_sim_data(int n, const LinkSpec& link, double sigma, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_sim_data: n must be >= 1");
    constexpr int p = 5;
    Rng rng(seed);
    SimData out;
    out.X.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) out.X(i, j) = rng.uniform(-0.5, 0.5);
    const double b = 1.0 / std::sqrt(static_cast<double>(p));
    out.E = out.X.rowwise().sum() * b;
    out.Y.resize(n);
    for (int i = 0; i < n; ++i) out.Y[i] = link(out.E[i]) + sigma * rng.normal();
    return out;
}

FsimSimData gen_fsim_data(int n, const LinkSpec& link, double sigma, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_fsim_data: n must be >= 1");
    constexpr int k = 25;
    constexpr int grid_pts = 201;
    const BasisSystem psi = make_fourier_basis({0.0, 1.0}, k);

    Rng rng(seed);
    Matrix scores(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j)
            scores(i, j) = std::sqrt(std::exp(-j / 12.0)) * rng.normal();

    Vector t(grid_pts);
    for (int j = 0; j < grid_pts; ++j) t[j] = static_cast<double>(j) / (grid_pts - 1);
    const Matrix b = eval_basis(psi, t, 0);  // grid_pts x k

    Vector c = Vector::Zero(k);
    c[1] = 1.0;
    c[2] = 1.0;
    c[3] = 0.5;
    c /= c.norm();  // printed coefficients have norm 1.5; identifiability wants 1

    FsimSimData out;
    out.ds.t_grid = t;
    out.ds.X = scores * b.transpose();
    out.true_index = scores * c;  // exact under orthonormality
    out.beta_on_grid = b * c;
    out.noise_sd = sigma;
    out.ds.Y.resize(n);
    for (int i = 0; i < n; ++i) out.ds.Y[i] = link(out.true_index[i]) + sigma * rng.normal();
    return out;
}

FsimSimData gen_four_harmonic_data(int n, const LinkSpec& link, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gen_four_harmonic_data: n must be >= 2");
    constexpr int grid_pts = 201;
    Vector t(grid_pts);
    for (int j = 0; j < grid_pts; ++j) t[j] = static_cast<double>(j) / (grid_pts - 1);

    // harmonics eta_k = (1/sqrt 2) {sin 2pi t, cos 2pi t, sin 4pi t, cos 4pi t}
    Matrix eta(grid_pts, 4);
    for (int j = 0; j < grid_pts; ++j) {
        const double u = t[j];
        eta(j, 0) = std::sin(2.0 * M_PI * u) / std::sqrt(2.0);
        eta(j, 1) = std::cos(2.0 * M_PI * u) / std::sqrt(2.0);
        eta(j, 2) = std::sin(4.0 * M_PI * u) / std::sqrt(2.0);
        eta(j, 3) = std::cos(4.0 * M_PI * u) / std::sqrt(2.0);
    }
    const double gam[4] = {1.0, 0.5, 0.25, 0.125};  // score variances
    Vector bcoef(4);
    bcoef << std::sqrt(2.0) / std::sqrt(12.0), std::sqrt(2.0) / std::sqrt(12.0),
        std::sqrt(2.0) / std::sqrt(6.0), std::sqrt(2.0) / std::sqrt(6.0);

    Rng rng(seed);
    Matrix scores(n, 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) scores(i, j) = std::sqrt(gam[j]) * rng.normal();

    FsimSimData out;
    out.ds.t_grid = t;
    out.ds.X = scores * eta.transpose();
    out.ds.X.rowwise() += t.transpose();  // mean function mu(t) = t
    out.beta_on_grid = eta * bcoef;

    // integral X beta = integral mu beta + sum_k score_k <eta_k, beta>;
    // <eta_k, eta_k> = 1/4, <t, sin(2 pi k t)> = -1/(2 pi k), <t, cos> = 0.
    const double mu_beta = bcoef[0] / std::sqrt(2.0) * (-1.0 / (2.0 * M_PI)) +
                           bcoef[2] / std::sqrt(2.0) * (-1.0 / (4.0 * M_PI));
    out.true_index = (scores * (0.25 * bcoef)).array() + mu_beta;

    Vector g_vals(n);
    for (int i = 0; i < n; ++i) g_vals[i] = link(out.true_index[i]);
    const double mean_g = g_vals.mean();
    const double var_g = (g_vals.array() - mean_g).square().sum() / (n - 1);
    const double sd_eps = std::sqrt(0.1 * var_g);
    out.noise_sd = sd_eps;

    out.ds.Y.resize(n);
    for (int i = 0; i < n; ++i) out.ds.Y[i] = g_vals[i] + sd_eps * rng.normal();
    return out;
}

Vector default_t1_lambda_grid() { return log10_grid(-8.0, 4.0, 41); }
Vector default_fsim_lambda_g_grid() { return log10_grid(-6.0, 2.0, 5); }
Vector default_fsim_lambda_beta_grid() { return log10_grid(-8.0, -4.0, 5); }

BasisSystem t1_study_basis(const Vector& E) {
    return make_bspline_basis({E.minCoeff(), E.maxCoeff()}, 25, 6);
}

FsimBases fsim_study_bases(const FsimDataset& ds) {
    const double s = index_range(ds).value;
    FsimBases bases;
    bases.g = make_bspline_basis({-s, s}, 25, 6);
    bases.beta = make_fourier_basis({ds.t_grid[0], ds.t_grid[ds.t_grid.size() - 1]}, 25);
    return bases;
}

namespace {

RepResult run_one_replicate(const StudyConfig& cfg, std::uint64_t seed) {
    RepResult rep;
    rep.seed = seed;
    try {
        JensenSurface surf;
        if (cfg.design == StudyDesign::sim) {
            const SimData data = gen_sim_data(cfg.n, cfg.link, cfg.sigma, seed);
            const BasisSystem basis = t1_study_basis(data.E);
            const Vector grid =
                cfg.lambda_grid.size() ? cfg.lambda_grid : default_t1_lambda_grid();
            surf = jensen_test_t1(data.E, data.Y, basis, grid, cfg.alpha, cfg.n_null_draws,
                                  seed);
        } else {
            const FsimSimData data = gen_fsim_data(cfg.n, cfg.link, cfg.sigma, seed);
            const FsimBases bases = fsim_study_bases(data.ds);
            const Vector lg =
                cfg.lambda_g_grid.size() ? cfg.lambda_g_grid : default_fsim_lambda_g_grid();
            const Vector lb = cfg.lambda_beta_grid.size() ? cfg.lambda_beta_grid
                                                          : default_fsim_lambda_beta_grid();
            // simulation-study procedure: linear init + restart per cell, no
            // neighbor sweeps (those belong to the observational pipeline)
            FitOptions opts;
            opts.max_warm_sweeps = 0;
            surf = jensen_test_fsim(data.ds, bases, lg, lb, cfg.alpha, cfg.n_null_draws, seed,
                                    opts);
        }
        rep.reject = surf.reject;
        rep.T_obs = surf.T_obs;
        rep.crit = surf.crit;
        rep.sigma_hat = surf.sigma_used.sigma;
        rep.delta_at_gcv =
            surf.gcv_cell >= 0 ? surf.delta[surf.gcv_cell] : std::numeric_limits<double>::quiet_NaN();
        rep.sign_summary = to_string(surf.sign_summary);
    } catch (const std::exception& exc) {
        rep.failed = true;
        rep.error = exc.what();
        rep.reject = false;
    }
    return rep;
}

}  // namespace

StudyResult run_rejection_study(const StudyConfig& cfg) {
    if (cfg.n_reps < 1) throw std::invalid_argument("run_rejection_study: n_reps must be >= 1");
    StudyResult out;
    out.per_seed.resize(static_cast<std::size_t>(cfg.n_reps));
    const int jobs = std::max(1, std::min(cfg.jobs, cfg.n_reps));
    if (jobs == 1) {
        for (int r = 0; r < cfg.n_reps; ++r)
            out.per_seed[static_cast<std::size_t>(r)] = run_one_replicate(cfg, cfg.base_seed + r);
    } else {
        // replicates own independent streams and write into their own slots,
        // so the result is identical for any worker count
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= cfg.n_reps) return;
                out.per_seed[static_cast<std::size_t>(r)] =
                    run_one_replicate(cfg, cfg.base_seed + r);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& rep : out.per_seed) {
        if (rep.failed) ++out.n_failed;
        if (rep.reject) ++out.n_reject;
    }
    out.rate = static_cast<double>(out.n_reject) / cfg.n_reps;
    return out;
}

std::vector<PowerPoint> run_power_curve(const StudyConfig& base, const Vector& eta_grid) {
    if (eta_grid.size() == 0) throw std::invalid_argument("run_power_curve: empty eta grid");
    for (Index i = 1; i < eta_grid.size(); ++i)
        if (eta_grid[i] < eta_grid[i - 1])
            throw std::invalid_argument("run_power_curve: eta grid must be nondecreasing");

    std::vector<PowerPoint> out;
    for (Index i = 0; i < eta_grid.size(); ++i) {
        StudyConfig cfg = base;
        cfg.link = LinkSpec{LinkName::power_family, eta_grid[i]};
        const StudyResult res = run_rejection_study(cfg);
        out.push_back({eta_grid[i], res.rate, cfg.n_reps});
    }
    return out;
}

double rse(const Vector& beta_hat_on_grid, const Vector& beta_true_on_grid,
           const Vector& t_grid) {
    if (beta_hat_on_grid.size() != t_grid.size() || beta_true_on_grid.size() != t_grid.size())
        throw std::invalid_argument("rse: grids differ in length");
    double ise_pos = 0.0, ise_neg = 0.0;
    for (Index j = 0; j + 1 < t_grid.size(); ++j) {
        const double h = 0.5 * (t_grid[j + 1] - t_grid[j]);
        const double d0p = beta_hat_on_grid[j] - beta_true_on_grid[j];
        const double d1p = beta_hat_on_grid[j + 1] - beta_true_on_grid[j + 1];
        const double d0n = beta_hat_on_grid[j] + beta_true_on_grid[j];
        const double d1n = beta_hat_on_grid[j + 1] + beta_true_on_grid[j + 1];
        ise_pos += h * (d0p * d0p + d1p * d1p);
        ise_neg += h * (d0n * d0n + d1n * d1n);
    }
    return std::sqrt(std::min(ise_pos, ise_neg));
}

double rase_k(const FsimFit& fit, const LinkSpec& truth, const Vector& true_index, int k) {
    if (k < 0 || k > 2) throw std::invalid_argument("rase_k: k must be 0, 1 or 2");
    const Index n = fit.index.size();
    if (true_index.size() != n)
        throw std::invalid_argument("rase_k: true index length mismatch");
    Vector s(n);
    for (Index i = 0; i < n; ++i)
        s[i] = std::clamp(fit.index[i], -fit.s_range, fit.s_range);
    const Vector ghat = eval_basis(fit.g_basis, s, k) * fit.d;
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
        double truth_val = 0.0;
        switch (k) {
            case 0: truth_val = truth(true_index[i]); break;
            case 1: truth_val = truth.d1(true_index[i]); break;
            default: truth_val = truth.d2(true_index[i]); break;
        }
        const double diff = ghat[i] - truth_val;
        acc += diff * diff;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

namespace {

struct GcvPick {
    FsimFit fit;
};

// Fit every cell of the demo lattice from one fixed initialization (no
// neighbor sweeps: the whole point is seeing where each start lands) and keep
// the GCV-selected cell. The lattice is scaled to the four-harmonic design and
// the convergence tolerance mirrors common off-the-shelf optimizer defaults,
// the regime whose curvature sensitivity is being demonstrated.
FsimFit fit_grid_from_init(const FsimDataset& ds, const FsimBases& bases, const InitPair& init) {
    const Vector lg = log10_grid(-8.0, 0.0, 5);
    const Vector lb = log10_grid(-9.0, -5.0, 5);
    FitOptions opts;
    opts.rel_obj_tol = 1e-8;
    std::optional<FsimFit> best;
    for (Index i = 0; i < lg.size(); ++i) {
        for (Index j = 0; j < lb.size(); ++j) {
            try {
                FsimFit fit = fit_fsim(ds, bases, lg[i], lb[j], init, opts);
                if (!std::isfinite(fit.gcv_value)) continue;
                if (!best || fit.gcv_value < best->gcv_value) best = std::move(fit);
            } catch (const std::exception&) {
            }
        }
    }
    if (!best) throw SurfaceInvalidError("curvature_demo: no usable fit on the lattice");
    return *best;
}

CurvatureFitReport report_for(const FsimFit& fit, const FsimSimData& data,
                              const LinkSpec& truth, const std::string& label) {
    CurvatureFitReport rep;
    rep.init = label;
    rep.rse = rse(eval_basis(fit.beta_basis, data.ds.t_grid, 0) * fit.c, data.beta_on_grid,
                  data.ds.t_grid);
    rep.rase0 = rase_k(fit, truth, data.true_index, 0);
    rep.rase1 = rase_k(fit, truth, data.true_index, 1);
    rep.rase2 = rase_k(fit, truth, data.true_index, 2);
    rep.coef_norm = fit.c.norm();
    rep.lambda_g = fit.lambda_g;
    rep.lambda_beta = fit.lambda_beta;

    // sup |g''| over the fit's own observed index range
    const double lo = std::max(-fit.s_range, fit.index.minCoeff());
    const double hi = std::min(fit.s_range, fit.index.maxCoeff());
    Vector pts(401);
    for (int j = 0; j < 401; ++j) pts[j] = lo + (hi - lo) * j / 400.0;
    rep.sup_abs_g2 = (eval_basis(fit.g_basis, pts, 2) * fit.d).cwiseAbs().maxCoeff();
    return rep;
}

}  // namespace

CurvatureReport curvature_demo(std::uint64_t seed) {
    const LinkSpec truth{LinkName::exp_neg, 0.0};
    const FsimSimData data = gen_four_harmonic_data(100, truth, seed);
    const FsimBases bases = fsim_study_bases(data.ds);

    // truth start: generating beta projected onto the fitting basis, g read
    // off at the Greville sites
    const Matrix b = eval_basis(bases.beta, data.ds.t_grid, 0);
    SpdSolver proj(Matrix(b.transpose() * b));
    Vector c_truth = proj.solve(Vector(b.transpose() * data.beta_on_grid));
    c_truth = normalize_sign_fix(c_truth, bases.beta);
    const Vector grev = greville_abscissae(bases.g);
    Vector d_truth(bases.g.n_basis);
    for (Index j = 0; j < d_truth.size(); ++j) d_truth[j] = truth(grev[j]);

    // equal start: all coefficients equal in both vectors
    Vector c_equal = normalize_sign_fix(Vector::Ones(bases.beta.n_basis), bases.beta);
    Vector d_equal = Vector::Constant(bases.g.n_basis, data.ds.Y.mean());

    const FsimFit fit_truth = fit_grid_from_init(data.ds, bases, {c_truth, d_truth});
    const FsimFit fit_equal = fit_grid_from_init(data.ds, bases, {c_equal, d_equal});

    CurvatureReport rep;
    rep.seed = seed;
    rep.truth_init = report_for(fit_truth, data, truth, "true");
    rep.equal_init = report_for(fit_equal, data, truth, "equal");

    // sup difference of the two curvature estimates over the shared range
    const double lo = std::max(std::max(-fit_truth.s_range, fit_truth.index.minCoeff()),
                               fit_equal.index.minCoeff());
    const double hi = std::min(std::min(fit_truth.s_range, fit_truth.index.maxCoeff()),
                               fit_equal.index.maxCoeff());
    if (hi > lo) {
        Vector pts(401);
        for (int j = 0; j < 401; ++j) pts[j] = lo + (hi - lo) * j / 400.0;
        const Vector g2a = eval_basis(fit_truth.g_basis, pts, 2) * fit_truth.d;
        const Vector g2b = eval_basis(fit_equal.g_basis, pts, 2) * fit_equal.d;
        rep.sup_g2_difference = (g2a - g2b).cwiseAbs().maxCoeff();
    }
    return rep;
}

}  // namespace jenseff
