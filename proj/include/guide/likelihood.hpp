#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/normal.hpp"
#include "guide/parallel.hpp"
#include "guide/rng.hpp"
#include "guide/surrogate.hpp"

namespace guide {

/// Monte Carlo estimate of a multivariate-normal box probability.
/// underflow flags runs in which every hypercube sample hit a zero-width
/// factor, i.e. the integrand underflowed everywhere the sampler looked.
struct BoxProbabilityResult {
    double p = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    bool underflow = false;
};

namespace detail {

/// Nested bound pair for coordinate u given the prefix of inverse-normal
/// values y'_v = Phi^-1(z_v), v < u. Infinite bounds map to d = 0 / e = 1.
inline std::pair<double, double> nested_bounds_from_yprime(const Mat& chol_lower, const Vec& a,
                                                           const Vec& b, const double* yprime,
                                                           Eigen::Index u) {
    const double l_uu = chol_lower(u, u);
    if (!(l_uu > 0.0)) throw NotCholesky("nested_bounds: diagonal entry not positive");
    double shift = 0.0;
    for (Eigen::Index v = 0; v < u; ++v) shift += chol_lower(u, v) * yprime[v];
    const double d = std::isinf(a[u]) && a[u] < 0.0 ? 0.0 : normal_cdf((a[u] - shift) / l_uu);
    const double e = std::isinf(b[u]) && b[u] > 0.0 ? 1.0 : normal_cdf((b[u] - shift) / l_uu);
    return {d, e};
}

}  // namespace detail

/// Nested integration bounds (d_u, e_u) of the Genz transform for coordinate
/// u = z_prefix.size(), given hypercube samples z_v of all prior coordinates.
inline std::pair<double, double> nested_bounds(const Mat& chol_lower, const Vec& a, const Vec& b,
                                               const Vec& z_prefix) {
    const Eigen::Index u = z_prefix.size();
    if (chol_lower.rows() != chol_lower.cols() || a.size() != chol_lower.rows() ||
        b.size() != a.size() || u >= a.size())
        throw InvalidDimension("nested_bounds: inconsistent dimensions");
    for (Eigen::Index v = 0; v < u; ++v)
        if (!(z_prefix[v] >= 0.0) || !(z_prefix[v] < 1.0))
            throw InvalidInput("nested_bounds: z_prefix entries must lie in [0, 1)");
    std::vector<double> yprime(static_cast<std::size_t>(u));
    for (Eigen::Index v = 0; v < u; ++v) yprime[static_cast<std::size_t>(v)] = normal_quantile(z_prefix[v]);
    return detail::nested_bounds_from_yprime(chol_lower, a, b, yprime.data(), u);
}

/// Pr(a <= y - mu <= b) for y ~ N(mu, cov), i.e. the bounds are centered
/// deviations (mu cancels and is used for dimension checking only).
///
/// Cholesky factorization plus inverse-normal rescaling turns the rectangle
/// into a unit-hypercube integral whose integrand is the product of nested
/// bound widths; that product is averaged over n_mc uniform samples.
/// Coordinates are processed in ascending (b-a)/sigma order to reduce
/// estimator variance. Sample chunks own derived RNG streams keyed by sample
/// index, so estimates are independent of worker count.
inline BoxProbabilityResult mvn_box_probability(const Vec& mu, const Mat& cov, const Vec& a,
                                                const Vec& b, std::int64_t n_mc,
                                                std::uint64_t seed) {
    const Eigen::Index k = cov.rows();
    if (cov.cols() != k || mu.size() != k || a.size() != k || b.size() != k)
        throw InvalidDimension("mvn_box_probability: inconsistent dimensions");
    if (n_mc < 1) throw InvalidInput("mvn_box_probability: need n_mc >= 1");

    for (Eigen::Index u = 0; u < k; ++u)
        if (a[u] > b[u]) return {0.0, 0.0, 0, true};  // empty box, exactly 0

    // Genz ordering heuristic: narrow boxes first.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Vec width(k);
    for (Eigen::Index u = 0; u < k; ++u) {
        const double sd = std::sqrt(cov(u, u));
        width[u] = (b[u] - a[u]) / sd;  // inf when either bound is infinite
        if (std::isnan(width[u])) width[u] = kInf;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return width[i] < width[j]; });

    Mat cov_p(k, k);
    Vec a_p(k), b_p(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        a_p[i] = a[order[static_cast<std::size_t>(i)]];
        b_p[i] = b[order[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j)
            cov_p(i, j) = cov(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    Eigen::LLT<Mat> llt(cov_p);
    if (llt.info() != Eigen::Success)
        throw IllConditioned("mvn_box_probability: Cholesky factorization failed");
    const Mat chol_lower = llt.matrixL();

    constexpr std::int64_t kChunk = 512;
    const auto n = static_cast<std::size_t>(n_mc);
    std::vector<double> products(n);
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    parallel_for(n_chunks, [&](std::size_t c) {
        Rng rng(derive_seed(seed, c));
        std::vector<double> yprime(static_cast<std::size_t>(k));
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(n, lo + kChunk);
        for (std::size_t i = lo; i < hi; ++i) {
            double prod = 1.0;
            for (Eigen::Index u = 0; u < k; ++u) {
                const double w = rng.uniform();
                const auto [d, e] =
                    detail::nested_bounds_from_yprime(chol_lower, a_p, b_p, yprime.data(), u);
                const double factor = e - d;
                if (!(factor > 0.0)) {
                    prod = 0.0;
                    break;
                }
                prod *= factor;
                yprime[static_cast<std::size_t>(u)] = normal_quantile(d + w * factor);
            }
            products[i] = prod;
        }
    });

    const double mean = pairwise_sum(products.data(), n) / static_cast<double>(n);
    double std_error = 0.0;
    if (n_mc > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dlt = products[i] - mean;
            sq[i] = dlt * dlt;
        }
        const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n_mc - 1);
        std_error = std::sqrt(var / static_cast<double>(n_mc));
    }
    const bool underflow =
        std::all_of(products.begin(), products.end(), [](double v) { return v == 0.0; });
    return {mean, std_error, n_mc, underflow};
}

/// Tolerance likelihood L(x | y*, eps) = Pr(||y - y*||_inf <= eps | x) under
/// the surrogate's predictive distribution. Masked points act as infinite
/// tolerance, which the transform absorbs without re-dimensioning.
inline BoxProbabilityResult likelihood(const EnsembleModel& model, const DesignVector& x,
                                       const TargetSpec& target, std::int64_t n_mc,
                                       std::uint64_t seed) {
    target.validate();
    if (target.size() != model.n_points())
        throw InvalidDimension("likelihood: target length does not match model grid");
    const PredictiveDistribution pred = predict_distribution(model, x);
    auto [a, b] = tolerance_bounds(target, pred.mean);
    if (target.mask) {
        for (Eigen::Index u = 0; u < target.size(); ++u) {
            if (target.masked(u)) {
                a[u] = -kInf;
                b[u] = kInf;
            }
        }
    }
    return mvn_box_probability(pred.mean, pred.cov, a, b, n_mc, seed);
}

}  // namespace guide
