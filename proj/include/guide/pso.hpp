#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/likelihood.hpp"
#include "guide/normal.hpp"
#include "guide/parallel.hpp"
#include "guide/rng.hpp"
#include "guide/surrogate.hpp"

namespace guide {

/// Constriction-factor swarm configuration (Clerc constants as defaults).
struct PsoConfig {
    int swarm_size = 80;
    double c1 = 1.49445;
    double c2 = 1.49445;
    double w = 0.729;
    double alpha = 4.0;  // search bounds: (max(0, mean - alpha*std), mean + alpha*std)
    int max_iters = 300;
    double lambda = 1.0;      // coverage-term weight
    double t_stabilizer = 1e-3;

    void validate() const {
        if (swarm_size < 2) throw InvalidInput("PsoConfig: swarm_size >= 2");
        if (!(w > 0.0) || !(c1 > 0.0) || !(c2 > 0.0))
            throw InvalidInput("PsoConfig: w, c1, c2 must be > 0");
        if (!(alpha > 0.0)) throw InvalidInput("PsoConfig: alpha must be > 0");
        if (!(t_stabilizer > 0.0)) throw InvalidInput("PsoConfig: t_stabilizer must be > 0");
        if (max_iters < 1) throw InvalidInput("PsoConfig: max_iters >= 1");
    }
};

/// Outcome of the support search. found == false is the refusal signal, not
/// an error: no design with strictly positive likelihood was seen.
struct SupportResult {
    bool found = false;
    std::optional<DesignVector> x0;
    std::optional<double> likelihood0;
    int iterations_used = 0;
    double best_objective = -std::numeric_limits<double>::infinity();
};

/// Covariance-weighted distance between target and predictive mean, computed
/// through the Cholesky factor (never an explicit inverse).
inline double mahalanobis(const Vec& y_star, const Vec& mu, const Mat& cov) {
    if (y_star.size() != mu.size() || cov.rows() != y_star.size() || cov.cols() != y_star.size())
        throw InvalidDimension("mahalanobis: inconsistent dimensions");
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        throw IllConditioned("mahalanobis: covariance not positive definite");
    const Vec z = llt.matrixL().solve(y_star - mu);
    return z.norm();
}

/// Support-search objective: -log(t + d_M/sqrt(k)) plus a z-score tolerance
/// coverage term (lambda/k) * sum_u log(Phi(r_u + tau_u) - Phi(r_u - tau_u)).
/// Infinite-tolerance and masked coordinates contribute log(1) = 0; zero-width
/// intervals are floored at log(1e-300).
inline double objective_score(const TargetSpec& target, const PredictiveDistribution& pred,
                              double lambda, double t) {
    const Eigen::Index k = target.size();
    if (pred.mean.size() != k || pred.cov.rows() != k)
        throw InvalidDimension("objective_score: target/prediction size mismatch");
    const double d_m = mahalanobis(target.target.values, pred.mean, pred.cov);
    double score = -std::log(t + d_m / std::sqrt(static_cast<double>(k)));
    if (lambda != 0.0) {
        double coverage = 0.0;
        for (Eigen::Index u = 0; u < k; ++u) {
            if (!target.constrains(u)) continue;
            const double sd = std::sqrt(pred.cov(u, u));
            const double r = (target.target.values[u] - pred.mean[u]) / sd;
            const double tau = target.tolerance[u] / sd;
            const double p = normal_cdf(r + tau) - normal_cdf(r - tau);
            coverage += std::log(std::max(p, 1e-300));
        }
        score += lambda / static_cast<double>(k) * coverage;
    }
    return score;
}

namespace detail {
inline constexpr std::uint64_t kLikelihoodStream = 0x6c696b;  // shared by PSO and the chain
}

inline std::uint64_t support_likelihood_seed(std::uint64_t seed) {
    return derive_seed(seed, detail::kLikelihoodStream);
}

/// Star-topology PSO over the design box (max(0, mean - alpha*std),
/// mean + alpha*std). After every iteration the incumbent global best is
/// tested with the tolerance likelihood; the first strictly positive value
/// terminates the search. Exhausting max_iters reports refusal.
inline SupportResult pso_search(const EnsembleModel& model, const TargetSpec& target,
                                const NormStats& dataset_stats, const PsoConfig& cfg,
                                std::uint64_t seed, std::int64_t n_mc = 4096) {
    cfg.validate();
    target.validate();
    const Eigen::Index d = model.n_params();
    const Vec x_mean = dataset_stats.mean.head(d);
    const Vec x_std = dataset_stats.std.head(d);
    const Vec lo = (x_mean - cfg.alpha * x_std).cwiseMax(0.0);
    const Vec hi = x_mean + cfg.alpha * x_std;

    Rng rng(derive_seed(seed, 0x70736f));
    const std::uint64_t lik_seed = support_likelihood_seed(seed);

    auto sample_position = [&](DesignVector& x) {
        for (int attempt = 0; attempt < 5000; ++attempt) {
            for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.uniform(lo[j], hi[j]);
            if (check_design_constraints(x)) return;
        }
        throw RangesInfeasible("pso_search: cannot sample a valid particle in bounds");
    };

    const int n = cfg.swarm_size;
    std::vector<DesignVector> pos(static_cast<std::size_t>(n), DesignVector(d));
    std::vector<Vec> vel(static_cast<std::size_t>(n), Vec(d));
    std::vector<double> score(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        sample_position(pos[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < d; ++j)
            vel[static_cast<std::size_t>(i)][j] = 0.1 * rng.uniform(-1.0, 1.0) * (hi[j] - lo[j]);
    }

    auto evaluate_all = [&]() {
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            try {
                const PredictiveDistribution pred = predict_distribution(model, pos[i]);
                score[i] = objective_score(target, pred, cfg.lambda, cfg.t_stabilizer);
            } catch (const IllConditioned&) {
                score[i] = -std::numeric_limits<double>::infinity();
            }
        });
    };

    evaluate_all();
    std::vector<DesignVector> pbest = pos;
    std::vector<double> pbest_score = score;
    std::size_t g = 0;
    for (std::size_t i = 1; i < static_cast<std::size_t>(n); ++i)
        if (pbest_score[i] > pbest_score[g]) g = i;
    DesignVector gbest = pbest[g];
    double gbest_score = pbest_score[g];

    SupportResult result;
    DesignVector last_checked;
    double last_p = 0.0;
    auto check_support = [&](int iteration) {
        if (last_checked.size() == 0 || gbest != last_checked) {
            last_checked = gbest;
            last_p = likelihood(model, gbest, target, n_mc, lik_seed).p;
        }
        result.iterations_used = iteration;
        result.best_objective = gbest_score;
        if (last_p > 0.0) {
            result.found = true;
            result.x0 = gbest;
            result.likelihood0 = last_p;
            return true;
        }
        return false;
    };

    if (check_support(1)) return result;

    for (int iter = 2; iter <= cfg.max_iters; ++iter) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const double r1 = rng.uniform();
                const double r2 = rng.uniform();
                vel[i][j] = cfg.w * vel[i][j] + cfg.c1 * r1 * (pbest[i][j] - pos[i][j]) +
                            cfg.c2 * r2 * (gbest[j] - pos[i][j]);
            }
            pos[i] += vel[i];
            pos[i] = pos[i].cwiseMax(lo).cwiseMin(hi);
            if (!check_design_constraints(pos[i])) sample_position(pos[i]);  // repair, keep velocity
        }
        evaluate_all();
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            if (score[i] > pbest_score[i]) {
                pbest_score[i] = score[i];
                pbest[i] = pos[i];
                if (score[i] > gbest_score) {
                    gbest_score = score[i];
                    gbest = pos[i];
                }
            }
        }
        if (check_support(iter)) return result;
    }
    return result;  // refusal: no positive-likelihood design observed
}

}  // namespace guide
