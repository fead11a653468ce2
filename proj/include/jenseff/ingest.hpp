#pragma once

#include "jenseff/fsim.hpp"
#include "jenseff/smoothing.hpp"

#include <string>
#include <utility>
#include <vector>

namespace jenseff {

/// One field series: strictly increasing observation times (days) and values.
struct IrregularSeries {
    std::string site_id;
    Vector times;
    Vector values;
};

void validate_series(const IrregularSeries& s);

/// Piecewise-smooth continuous handle: independent penalized splines per
/// contiguous segment, split where observation gaps exceed the threshold.
class SmoothedSeries {
public:
    struct Segment {
        double t_lo = 0.0;
        double t_hi = 0.0;
        SmoothFit fit;
    };

    double operator()(double t) const;  // OutOfSupportError outside every segment
    bool covers(double lo, double hi) const;

    std::vector<Segment> segments;
    std::vector<std::string> warnings;
};

/// Per-segment penalized spline with ~knots_per_year equally spaced interior
/// knots and GCV-selected penalty. Segments that cannot support a smooth
/// (too few points, degenerate smoother) are skipped with a warning.
SmoothedSeries smooth_series(const IrregularSeries& s, int knots_per_year = 21,
                             const Vector& lambda_grid = Vector(),
                             double segment_gap = 180.0);

/// Per-day density changes (d_{i+1}-d_i)/(s_{i+1}-s_i) for consecutive pairs
/// closer than max_gap (strict), keyed by the earlier time s_i.
std::vector<std::pair<double, double>> build_responses(const IrregularSeries& density,
                                                       double max_gap = 100.0);

struct HistoryExtraction {
    Matrix histories;                         // kept rows x grid length
    Vector grid;                              // 0..window, step grid_step (0 = oldest)
    std::vector<Index> kept;                  // indices into obs_times
    std::vector<std::string> dropped_reasons; // aligned with obs_times, "" where kept
};

/// Environment evaluated on the daily grid over [s - window, s] per
/// observation time; rows whose window is not covered by one smoothed
/// segment are dropped with a reason.
HistoryExtraction extract_histories(const SmoothedSeries& env, const Vector& obs_times,
                                    double window = 60.0, double grid_step = 1.0);

struct SitePair {
    IrregularSeries density;
    IrregularSeries environment;
};

struct RowProvenance {
    std::string site_id;
    double obs_time = 0.0;
};

struct AssembledDataset {
    FsimDataset ds;  // histories on the [0, window] grid, pooled across sites
    std::vector<RowProvenance> provenance;
    BasisSystem beta_basis;           // projection basis for the histories
    BasisSystem recommended_g_basis;  // for downstream fitting
    Vector lambda_g_grid;
    Vector lambda_beta_grid;
    std::vector<std::string> warnings;
};

struct IngestOptions {
    double window = 60.0;
    double grid_step = 1.0;
    int knots_per_year = 21;
    double max_gap = 100.0;
    double segment_gap = 180.0;
    bool log_density = false;
    int beta_n_basis = 12;
    int beta_order = 6;
    int g_n_basis = 25;
    int g_order = 4;  // cubic
};

/// Pools (history, response) rows from every site: smooths each environment
/// series, extracts windows at response times, and projects each history onto
/// the coefficient-function basis (trapezoid-weighted least squares).
AssembledDataset assemble_dataset(const std::vector<SitePair>& sites,
                                  const IngestOptions& opts = {});

}  // namespace jenseff
