#include "jenseff/ingest.hpp"
#include "jenseff/errors.hpp"
#include "jenseff/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jenseff {

void validate_series(const IrregularSeries& s) {
    if (s.times.size() != s.values.size())
        throw std::invalid_argument("IrregularSeries: times and values lengths differ");
    if (!s.times.allFinite() || !s.values.allFinite())
        throw std::invalid_argument("IrregularSeries: non-finite entries");
    for (Index i = 1; i < s.times.size(); ++i)
        if (!(s.times[i] > s.times[i - 1]))
            throw std::invalid_argument("IrregularSeries: times must be strictly increasing");
}

double SmoothedSeries::operator()(double t) const {
    const double tol = 1e-9;
    for (const auto& seg : segments) {
        if (t >= seg.t_lo - tol && t <= seg.t_hi + tol)
            return predict(seg.fit, Vector::Constant(1, std::clamp(t, seg.t_lo, seg.t_hi)))[0];
    }
    std::ostringstream os;
    os << "SmoothedSeries: time " << t << " outside smoothed support";
    throw OutOfSupportError(os.str());
}

bool SmoothedSeries::covers(double lo, double hi) const {
    const double tol = 1e-9;
    for (const auto& seg : segments)
        if (lo >= seg.t_lo - tol && hi <= seg.t_hi + tol) return true;
    return false;
}

SmoothedSeries smooth_series(const IrregularSeries& s, int knots_per_year,
                             const Vector& lambda_grid, double segment_gap) {
    validate_series(s);
    if (knots_per_year < 1)
        throw std::invalid_argument("smooth_series: knots_per_year must be >= 1");
    const Vector grid = lambda_grid.size() ? lambda_grid : log10_grid(-8.0, 4.0, 41);

    SmoothedSeries out;
    const Index n = s.times.size();
    Index start = 0;
    while (start < n) {
        Index stop = start;
        while (stop + 1 < n && s.times[stop + 1] - s.times[stop] <= segment_gap) ++stop;
        const Index len = stop - start + 1;
        const double t_lo = s.times[start], t_hi = s.times[stop];

        if (len < 2 || !(t_hi > t_lo)) {
            std::ostringstream os;
            os << s.site_id << ": segment [" << t_lo << ", " << t_hi << "] has " << len
               << " point(s), skipped";
            out.warnings.push_back(os.str());
            start = stop + 1;
            continue;
        }

        const double span = t_hi - t_lo;
        const int order = 4;  // cubic
        const int n_interior =
            std::max(0, static_cast<int>(std::floor(span * knots_per_year / 365.25)));
        // cap the basis below the data size so the smoother can be non-degenerate
        const int n_basis =
            std::min<int>(n_interior + order, std::max<int>(order, static_cast<int>(len)));
        try {
            const BasisSystem basis = make_bspline_basis({t_lo, t_hi}, n_basis, order);
            LambdaSelection sel =
                select_lambda_gcv(s.times.segment(start, len), s.values.segment(start, len),
                                  basis, grid);
            out.segments.push_back({t_lo, t_hi, std::move(sel.fit)});
        } catch (const std::exception& exc) {
            std::ostringstream os;
            os << s.site_id << ": segment [" << t_lo << ", " << t_hi
               << "] could not be smoothed (" << exc.what() << "), skipped";
            out.warnings.push_back(os.str());
        }
        start = stop + 1;
    }
    return out;
}

std::vector<std::pair<double, double>> build_responses(const IrregularSeries& density,
                                                       double max_gap) {
    validate_series(density);
    std::vector<std::pair<double, double>> out;
    for (Index i = 0; i + 1 < density.times.size(); ++i) {
        const double gap = density.times[i + 1] - density.times[i];
        if (gap < max_gap)
            out.emplace_back(density.times[i],
                             (density.values[i + 1] - density.values[i]) / gap);
    }
    return out;
}

HistoryExtraction extract_histories(const SmoothedSeries& env, const Vector& obs_times,
                                    double window, double grid_step) {
    if (!(window > 0.0) || !(grid_step > 0.0))
        throw std::invalid_argument("extract_histories: window and grid_step must be positive");
    const int g = static_cast<int>(std::round(window / grid_step)) + 1;

    HistoryExtraction out;
    out.grid.resize(g);
    for (int j = 0; j < g; ++j) out.grid[j] = j * grid_step;
    out.dropped_reasons.assign(static_cast<std::size_t>(obs_times.size()), "");

    std::vector<Vector> rows;
    for (Index i = 0; i < obs_times.size(); ++i) {
        const double s = obs_times[i];
        if (!env.covers(s - window, s)) {
            std::ostringstream os;
            os << "window [" << s - window << ", " << s << "] not covered by smoothed support";
            out.dropped_reasons[static_cast<std::size_t>(i)] = os.str();
            continue;
        }
        Vector row(g);
        for (int j = 0; j < g; ++j) row[j] = env(s - window + j * grid_step);
        rows.push_back(std::move(row));
        out.kept.push_back(i);
    }
    out.histories.resize(static_cast<Index>(rows.size()), g);
    for (std::size_t r = 0; r < rows.size(); ++r) out.histories.row(static_cast<Index>(r)) = rows[r];
    return out;
}

namespace {

Vector trapezoid_weights(const Vector& t) {
    Vector w = Vector::Zero(t.size());
    for (Index j = 0; j + 1 < t.size(); ++j) {
        const double h = 0.5 * (t[j + 1] - t[j]);
        w[j] += h;
        w[j + 1] += h;
    }
    return w;
}

}  // namespace

AssembledDataset assemble_dataset(const std::vector<SitePair>& sites, const IngestOptions& opts) {
    AssembledDataset out;
    out.beta_basis = make_bspline_basis({0.0, opts.window}, opts.beta_n_basis, opts.beta_order);

    const int g = static_cast<int>(std::round(opts.window / opts.grid_step)) + 1;
    Vector grid(g);
    for (int j = 0; j < g; ++j) grid[j] = j * opts.grid_step;

    // projection operator onto the coefficient basis, trapezoid inner product
    const Matrix b = eval_basis(out.beta_basis, grid, 0);
    const Vector w = trapezoid_weights(grid);
    SpdSolver proj(Matrix(b.transpose() * w.asDiagonal() * b));
    const Matrix btw = b.transpose() * w.asDiagonal();

    std::vector<Vector> rows;
    std::vector<double> responses;
    for (const auto& site : sites) {
        IrregularSeries density = site.density;
        if (opts.log_density) {
            for (Index i = 0; i < density.values.size(); ++i) {
                if (!(density.values[i] > 0.0))
                    throw std::invalid_argument(
                        "assemble_dataset: log transform needs positive densities (site " +
                        density.site_id + ")");
                density.values[i] = std::log(density.values[i]);
            }
        }
        SmoothedSeries env = smooth_series(site.environment, opts.knots_per_year, Vector(),
                                           opts.segment_gap);
        for (auto& msg : env.warnings) out.warnings.push_back(std::move(msg));

        const auto resp = build_responses(density, opts.max_gap);
        Vector obs_times(static_cast<Index>(resp.size()));
        for (std::size_t i = 0; i < resp.size(); ++i)
            obs_times[static_cast<Index>(i)] = resp[i].first;

        const HistoryExtraction hx = extract_histories(env, obs_times, opts.window, opts.grid_step);
        for (std::size_t i = 0; i < hx.dropped_reasons.size(); ++i)
            if (!hx.dropped_reasons[i].empty())
                out.warnings.push_back(site.density.site_id + ": row dropped, " +
                                       hx.dropped_reasons[i]);

        for (Index r = 0; r < hx.histories.rows(); ++r) {
            const Vector coef = proj.solve(Vector(btw * hx.histories.row(r).transpose()));
            rows.push_back(b * coef);
            const auto src = static_cast<std::size_t>(hx.kept[static_cast<std::size_t>(r)]);
            responses.push_back(resp[src].second);
            out.provenance.push_back({site.density.site_id, resp[src].first});
        }
    }

    if (rows.empty()) throw EmptyDatasetError("assemble_dataset: no usable rows pooled");

    out.ds.t_grid = grid;
    out.ds.X.resize(static_cast<Index>(rows.size()), g);
    out.ds.Y.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.ds.X.row(static_cast<Index>(r)) = rows[r];
        out.ds.Y[static_cast<Index>(r)] = responses[r];
    }

    // g range: the index-range bound widened so |Psi c| <= S for any unit c
    double s_half = index_range(out.ds).value;
    const Matrix psi = functional_design(out.ds, out.beta_basis);
    for (Index r = 0; r < psi.rows(); ++r) s_half = std::max(s_half, psi.row(r).norm());
    out.recommended_g_basis = make_bspline_basis({-s_half, s_half}, opts.g_n_basis, opts.g_order);

    out.lambda_g_grid = log10_grid(-6.0, 2.0, 5);
    out.lambda_beta_grid = log10_grid(-2.0, 6.0, 5);
    return out;
}

}  // namespace jenseff
