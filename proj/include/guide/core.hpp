#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "guide/errors.hpp"

namespace guide {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Trilinear interface-law coefficients, one mode layout per 5 entries:
/// [sigma_y, dsigma_1, delta_y, ddelta_1, ddelta_2] for the normal mode,
/// then the same five for the shear mode. Stresses in MPa, separations in mm.
using DesignVector = Eigen::VectorXd;

inline constexpr int kTrilinearParams = 10;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Functional response sampled on a strictly increasing grid
/// (strain, dimensionless) with one value (stress, MPa) per grid point.
struct ResponseCurve {
    Vec grid;
    Vec values;

    Eigen::Index size() const { return grid.size(); }

    void validate() const {
        if (grid.size() != values.size())
            throw InvalidDimension("ResponseCurve: grid/values length mismatch");
        for (Eigen::Index i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw InvalidInput("ResponseCurve: grid must be strictly increasing");
    }
};

/// Target curve with per-point tolerances (entries may be +inf) and an
/// optional mask; mask[u] == true excludes point u from feasibility and
/// likelihood judgments (equivalent to infinite tolerance there).
struct TargetSpec {
    ResponseCurve target;
    Vec tolerance;
    std::optional<std::vector<bool>> mask;

    Eigen::Index size() const { return target.size(); }

    bool masked(Eigen::Index u) const {
        return mask.has_value() && (*mask)[static_cast<std::size_t>(u)];
    }

    /// A point constrains feasibility iff it is unmasked with finite tolerance.
    bool constrains(Eigen::Index u) const {
        return !masked(u) && std::isfinite(tolerance[u]);
    }

    void validate() const {
        target.validate();
        if (tolerance.size() != target.values.size())
            throw InvalidDimension("TargetSpec: tolerance length mismatch");
        if (mask && static_cast<Eigen::Index>(mask->size()) != target.size())
            throw InvalidDimension("TargetSpec: mask length mismatch");
        for (Eigen::Index u = 0; u < tolerance.size(); ++u)
            if (std::isnan(tolerance[u]) || tolerance[u] < 0.0)
                throw InvalidInput("TargetSpec: tolerances must be >= 0");
    }

    bool well_posed() const {
        for (Eigen::Index u = 0; u < size(); ++u)
            if (constrains(u)) return true;
        return false;
    }
};

/// Per-feature z-score statistics. Feature layout: d design parameters
/// followed by the strain coordinate.
struct NormStats {
    Vec mean;
    Vec std;

    void validate() const {
        if (mean.size() != std.size())
            throw InvalidDimension("NormStats: mean/std length mismatch");
        if ((std.array() <= 0.0).any())
            throw DegenerateStats("NormStats: std entries must be > 0");
    }
};

/// Training data: h x d designs, h x k responses on a shared strain grid,
/// plus z-score stats over the d+1 input features.
struct Dataset {
    Mat designs;
    Mat responses;
    Vec grid;
    NormStats norm;

    Eigen::Index rows() const { return designs.rows(); }
    Eigen::Index n_params() const { return designs.cols(); }
    Eigen::Index n_points() const { return grid.size(); }

    Vec design_mean() const { return norm.mean.head(n_params()); }
    Vec design_std() const { return norm.std.head(n_params()); }
};

inline Vec linspace(double lo, double hi, int k) {
    if (k < 2) throw InvalidInput("linspace: need k >= 2");
    return Vec::LinSpaced(k, lo, hi);
}

/// Physical consistency of a trilinear design: nonnegative entries and the
/// hardening slope strictly below the elastic slope in both modes. The slope
/// test uses the cross-multiplied form dsigma_1 * delta_y < sigma_y * ddelta_1
/// so zero denominators behave as their limits (boundary equality rejects).
inline bool check_design_constraints(const DesignVector& x) {
    if (x.size() != kTrilinearParams)
        throw InvalidDimension("check_design_constraints: expected 10 entries");
    if ((x.array() < 0.0).any() || !x.allFinite()) return false;
    for (int mode = 0; mode < 2; ++mode) {
        const int o = 5 * mode;
        const double sigma_y = x[o], dsigma_1 = x[o + 1];
        const double delta_y = x[o + 2], ddelta_1 = x[o + 3];
        if (!(dsigma_1 * delta_y < sigma_y * ddelta_1)) return false;
    }
    return true;
}

inline Vec zscore_normalize(const Vec& features, const NormStats& stats) {
    if (features.size() != stats.mean.size())
        throw InvalidDimension("zscore_normalize: length mismatch");
    if ((stats.std.array() <= 0.0).any())
        throw DegenerateStats("zscore_normalize: nonpositive std");
    return (features - stats.mean).cwiseQuotient(stats.std);
}

inline Vec zscore_denormalize(const Vec& features, const NormStats& stats) {
    if (features.size() != stats.mean.size())
        throw InvalidDimension("zscore_denormalize: length mismatch");
    if ((stats.std.array() <= 0.0).any())
        throw DegenerateStats("zscore_denormalize: nonpositive std");
    return features.cwiseProduct(stats.std) + stats.mean;
}

/// Tolerance box in centered coordinates delta = y - mu:
/// a_u = y*_u - mu_u - eps_u, b_u = y*_u - mu_u + eps_u.
/// Infinite tolerance yields (-inf, +inf).
inline std::pair<Vec, Vec> tolerance_bounds(const TargetSpec& target, const Vec& mu) {
    const Eigen::Index k = target.size();
    if (mu.size() != k || target.tolerance.size() != k)
        throw InvalidDimension("tolerance_bounds: length mismatch");
    Vec a(k), b(k);
    for (Eigen::Index u = 0; u < k; ++u) {
        const double center = target.target.values[u] - mu[u];
        const double eps = target.tolerance[u];
        if (std::isinf(eps)) {
            a[u] = -kInf;
            b[u] = kInf;
        } else {
            a[u] = center - eps;
            b[u] = center + eps;
        }
    }
    return {std::move(a), std::move(b)};
}

/// Z-score stats over the d+1 input features (design columns + strain).
/// Sample std (h*k - 1 normalization for the strain column is irrelevant at
/// these sizes; sample std with n-1 used throughout).
inline NormStats compute_norm_stats(const Mat& designs, const Vec& grid) {
    const Eigen::Index h = designs.rows();
    const Eigen::Index d = designs.cols();
    if (h < 2) throw DegenerateStats("compute_norm_stats: need at least 2 rows");
    NormStats stats;
    stats.mean.resize(d + 1);
    stats.std.resize(d + 1);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double m = designs.col(j).mean();
        const double ss = (designs.col(j).array() - m).square().sum();
        stats.mean[j] = m;
        stats.std[j] = std::sqrt(ss / static_cast<double>(h - 1));
    }
    const double gm = grid.mean();
    const double gss = (grid.array() - gm).square().sum();
    stats.mean[d] = gm;
    stats.std[d] = std::sqrt(gss / static_cast<double>(grid.size() - 1));
    if ((stats.std.array() <= 0.0).any())
        throw DegenerateStats("compute_norm_stats: degenerate feature column");
    return stats;
}

}  // namespace guide
