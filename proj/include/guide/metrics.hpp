#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "guide/core.hpp"
#include "guide/oracle.hpp"
#include "guide/rng.hpp"

namespace guide {

struct MetricsReport {
    double feasibility_rate = 0.0;
    double vendi = 1.0;
    double knn_novelty = 0.0;
    std::optional<double> pearson_r;
};

/// Fraction of designs whose oracle response meets the target tolerance.
inline double feasibility_rate(const std::vector<DesignVector>& designs, const TargetSpec& target,
                               const OracleConfig& cfg) {
    if (designs.empty()) throw InvalidInput("feasibility_rate: empty design list");
    std::size_t pass = 0;
    for (const auto& x : designs)
        if (check_feasible(x, target, cfg)) ++pass;
    return static_cast<double>(pass) / static_cast<double>(designs.size());
}

/// Median pairwise Euclidean distance, the usual RBF bandwidth heuristic.
/// Falls back to 1 when all points coincide.
inline double median_pairwise_distance(const Mat& designs) {
    const Eigen::Index n = designs.rows();
    if (n < 2) return 1.0;
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            dists.push_back((designs.row(i) - designs.row(j)).norm());
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                     dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

/// Vendi score: exp of the von Neumann entropy of the eigenvalues of K/n,
/// K being the RBF similarity matrix of the (standardized) design rows.
/// Ranges from 1 (all identical) to n (mutually dissimilar).
inline double vendi_score(const Mat& designs, double bandwidth) {
    const Eigen::Index n = designs.rows();
    if (n < 1) throw InvalidInput("vendi_score: need at least one design");
    if (!designs.allFinite()) throw InvalidInput("vendi_score: non-finite design entries");
    if (!(bandwidth > 0.0)) throw InvalidInput("vendi_score: bandwidth must be > 0");
    Mat k_mat(n, n);
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for (Eigen::Index i = 0; i < n; ++i) {
        k_mat(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d2 = (designs.row(i) - designs.row(j)).squaredNorm();
            const double v = std::exp(-d2 * inv);
            k_mat(i, j) = v;
            k_mat(j, i) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(k_mat / static_cast<double>(n),
                                           Eigen::EigenvaluesOnly);
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = eig.eigenvalues()[i];
        if (lam > 0.0) entropy -= lam * std::log(lam);
    }
    return std::exp(entropy);
}

/// Mean over designs of the mean Euclidean distance to the k nearest
/// training rows. Both matrices are expected in standardized coordinates.
inline double knn_novelty(const Mat& designs, const Mat& train_designs, int k) {
    if (k < 1) throw InvalidK("knn_novelty: k must be >= 1");
    if (k > train_designs.rows()) throw InvalidK("knn_novelty: k exceeds training rows");
    if (designs.rows() < 1) throw InvalidInput("knn_novelty: empty design set");
    if (designs.cols() != train_designs.cols())
        throw InvalidDimension("knn_novelty: feature dimension mismatch");
    double total = 0.0;
    std::vector<double> dist(static_cast<std::size_t>(train_designs.rows()));
    for (Eigen::Index i = 0; i < designs.rows(); ++i) {
        for (Eigen::Index j = 0; j < train_designs.rows(); ++j)
            dist[static_cast<std::size_t>(j)] = (designs.row(i) - train_designs.row(j)).norm();
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += dist[static_cast<std::size_t>(j)];
        // nth_element leaves the k smallest in the first k slots
        total += sum / static_cast<double>(k);
    }
    return total / static_cast<double>(designs.rows());
}

/// Binned likelihood-feasibility Pearson correlation (Fig.-4e-style
/// protocol): [0,1] split into n_bins right-closed intervals, bins with fewer
/// than min_per_bin records dropped, correlation between bin centers and bin
/// feasibility fractions. Absent when fewer than 3 bins survive or the
/// surviving fractions are constant.
inline std::optional<double> binned_correlation(
    const std::vector<std::pair<double, bool>>& records, int n_bins, int min_per_bin) {
    if (records.empty()) throw InvalidInput("binned_correlation: empty records");
    if (n_bins < 1) throw InvalidInput("binned_correlation: n_bins >= 1");
    std::vector<std::int64_t> count(static_cast<std::size_t>(n_bins), 0);
    std::vector<std::int64_t> feasible(static_cast<std::size_t>(n_bins), 0);
    for (const auto& [lik, ok] : records) {
        const double l = std::clamp(lik, 0.0, 1.0);
        // right-closed bins: (i/n, (i+1)/n]; zero falls into the first bin
        int bin = l <= 0.0 ? 0
                           : static_cast<int>(std::ceil(l * n_bins)) - 1;
        bin = std::clamp(bin, 0, n_bins - 1);
        ++count[static_cast<std::size_t>(bin)];
        if (ok) ++feasible[static_cast<std::size_t>(bin)];
    }
    std::vector<double> xs, ys;
    for (int i = 0; i < n_bins; ++i) {
        if (count[static_cast<std::size_t>(i)] < min_per_bin) continue;
        xs.push_back((i + 0.5) / n_bins);
        ys.push_back(static_cast<double>(feasible[static_cast<std::size_t>(i)]) /
                     static_cast<double>(count[static_cast<std::size_t>(i)]));
    }
    if (xs.size() < 3) return std::nullopt;
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

/// Greedy max-min-distance subset: seeded random first pick, then each new
/// index maximizes its minimum distance to the selected set (ties -> lowest
/// index). Returns indices in selection order.
inline std::vector<Eigen::Index> maxmin_subset(const Mat& designs, int m, std::uint64_t seed) {
    const Eigen::Index n = designs.rows();
    if (m < 1 || m > n) throw InvalidSubsetSize("maxmin_subset: need 1 <= m <= n");
    Rng rng(seed);
    std::vector<Eigen::Index> picked;
    picked.reserve(static_cast<std::size_t>(m));
    picked.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    Vec min_dist(n);
    for (Eigen::Index i = 0; i < n; ++i)
        min_dist[i] = (designs.row(i) - designs.row(picked[0])).norm();
    while (static_cast<int>(picked.size()) < m) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (min_dist[i] > min_dist[best]) best = i;
        picked.push_back(best);
        for (Eigen::Index i = 0; i < n; ++i)
            min_dist[i] = std::min(min_dist[i], (designs.row(i) - designs.row(best)).norm());
    }
    return picked;
}

}  // namespace guide
