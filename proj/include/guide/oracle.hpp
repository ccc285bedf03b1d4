#pragma once

#include <array>
#include <cmath>

#include "guide/core.hpp"
#include "guide/parallel.hpp"
#include "guide/rng.hpp"

namespace guide {

/// Analytic ground-truth response generator standing in for the FE solver.
struct OracleConfig {
    double blend_normal = 0.7;  // weight of normal-mode parameters in [0, 1]
    double geom_scale = 1.0;    // separation (mm) -> strain factor
    Vec grid = linspace(0.0, 0.04, 100);

    void validate() const {
        if (blend_normal < 0.0 || blend_normal > 1.0)
            throw InvalidInput("OracleConfig: blend_normal must be in [0, 1]");
        if (!(geom_scale > 0.0))
            throw InvalidInput("OracleConfig: geom_scale must be > 0");
    }
};

/// Uniform sampling bounds per design parameter.
struct ParameterRanges {
    Vec low;
    Vec high;

    void validate() const {
        if (low.size() != high.size())
            throw InvalidDimension("ParameterRanges: low/high length mismatch");
        for (Eigen::Index i = 0; i < low.size(); ++i)
            if (!(low[i] >= 0.0) || !(low[i] < high[i]))
                throw InvalidInput("ParameterRanges: need 0 <= low < high");
    }
};

/// Reference sampling box: stresses 50-400 / 5-200 MPa, separations in
/// [5e-4, 2e-2] mm, identical for normal and shear modes. The resulting
/// curves peak around 150-350 MPa and fail at ~0.2-3.5% strain.
inline ParameterRanges default_parameter_ranges() {
    ParameterRanges r;
    r.low.resize(kTrilinearParams);
    r.high.resize(kTrilinearParams);
    const std::array<double, 5> low{50.0, 5.0, 5e-4, 5e-4, 5e-4};
    const std::array<double, 5> high{400.0, 200.0, 5e-3, 1e-2, 2e-2};
    for (int mode = 0; mode < 2; ++mode)
        for (int j = 0; j < 5; ++j) {
            r.low[5 * mode + j] = low[static_cast<std::size_t>(j)];
            r.high[5 * mode + j] = high[static_cast<std::size_t>(j)];
        }
    return r;
}

namespace detail {

/// Blended trilinear envelope evaluated at one strain value.
/// Knots: (0,0) -> (g*dy, sy) -> (g*(dy+dd1), sy+ds1) -> (g*(dy+dd1+dd2), 0).
inline double trilinear_value(double s, double sy, double ds1, double dy, double dd1,
                              double dd2, double g) {
    if (s <= 0.0) return 0.0;
    const double e1 = g * dy;
    const double e2 = g * (dy + dd1);
    const double e3 = g * (dy + dd1 + dd2);
    if (s >= e3) return 0.0;
    if (s < e1) return sy * (s / e1);
    if (s < e2) return sy + ds1 * ((s - e1) / (e2 - e1));
    return (sy + ds1) * ((e3 - s) / (e3 - e2));
}

inline void blend_parameters(const DesignVector& x, double w, double out[5]) {
    for (int j = 0; j < 5; ++j) out[j] = w * x[j] + (1.0 - w) * x[5 + j];
}

}  // namespace detail

/// Deterministic stress-strain curve for a valid design, sampled on `grid`.
inline ResponseCurve toy_response_on(const DesignVector& x, const OracleConfig& cfg,
                                     const Vec& grid) {
    if (!check_design_constraints(x))
        throw InfeasibleDesign("toy_response: design violates physical constraints");
    double p[5];
    detail::blend_parameters(x, cfg.blend_normal, p);
    ResponseCurve curve;
    curve.grid = grid;
    curve.values.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        curve.values[i] =
            detail::trilinear_value(grid[i], p[0], p[1], p[2], p[3], p[4], cfg.geom_scale);
    return curve;
}

inline ResponseCurve toy_response(const DesignVector& x, const OracleConfig& cfg) {
    return toy_response_on(x, cfg, cfg.grid);
}

/// One uniform rejection-sampled valid design. Throws RangesInfeasible when
/// the acceptance rate over the attempt window drops below 0.1%.
inline DesignVector sample_valid_design(const ParameterRanges& ranges, Rng& rng,
                                        std::int64_t* attempts_out = nullptr) {
    const Eigen::Index d = ranges.low.size();
    DesignVector x(d);
    constexpr int kWindow = 5000;  // > 99.9% rejection over this window aborts
    for (int attempt = 0; attempt < kWindow; ++attempt) {
        for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.uniform(ranges.low[j], ranges.high[j]);
        if (check_design_constraints(x)) {
            if (attempts_out) *attempts_out = attempt + 1;
            return x;
        }
    }
    throw RangesInfeasible("sample_valid_design: rejection rate above 99.9%");
}

/// Constraint-rejection bookkeeping for dataset generation.
struct GenerationStats {
    std::int64_t rows = 0;
    std::int64_t attempts = 0;

    double rejection_rate() const {
        return attempts == 0 ? 0.0
                             : 1.0 - static_cast<double>(rows) / static_cast<double>(attempts);
    }
};

/// n designs sampled uniformly within ranges (rejection-resampled until the
/// physical constraints hold) with oracle responses and feature norm stats.
/// Row i draws from a stream seeded by (seed, i), so the result is
/// bit-identical for a given seed regardless of worker count.
inline Dataset generate_dataset(int n, const ParameterRanges& ranges, const OracleConfig& cfg,
                                std::uint64_t seed, GenerationStats* stats = nullptr) {
    if (n < 1) throw InvalidInput("generate_dataset: need n >= 1");
    ranges.validate();
    cfg.validate();
    const Eigen::Index d = ranges.low.size();
    const Eigen::Index k = cfg.grid.size();

    Dataset ds;
    ds.designs.resize(n, d);
    ds.responses.resize(n, k);
    ds.grid = cfg.grid;

    std::vector<std::int64_t> attempts(static_cast<std::size_t>(n), 0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        const DesignVector x = sample_valid_design(ranges, rng, &attempts[i]);
        ds.designs.row(static_cast<Eigen::Index>(i)) = x.transpose();
        ds.responses.row(static_cast<Eigen::Index>(i)) = toy_response(x, cfg).values.transpose();
    });

    if (stats) {
        stats->rows = n;
        stats->attempts = 0;
        for (const auto a : attempts) stats->attempts += a;
    }
    ds.norm = compute_norm_stats(ds.designs, ds.grid);
    return ds;
}

/// Ground-truth feasibility: |oracle(x) - y*| <= eps at every unmasked grid
/// point with finite tolerance. Evaluates the analytic curve on the target's
/// own grid.
inline bool check_feasible(const DesignVector& x, const TargetSpec& target,
                           const OracleConfig& cfg) {
    const ResponseCurve curve = toy_response_on(x, cfg, target.target.grid);
    for (Eigen::Index u = 0; u < target.size(); ++u) {
        if (!target.constrains(u)) continue;
        if (std::abs(curve.values[u] - target.target.values[u]) > target.tolerance[u])
            return false;
    }
    return true;
}

}  // namespace guide
