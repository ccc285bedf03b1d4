#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/parallel.hpp"
#include "guide/rng.hpp"

namespace guide {

/// Mean/std/covariance of the predicted response at the k grid points.
/// cov is the conditioned (possibly jittered) matrix; jitter is the eta that
/// was actually added, so diag(cov) - jitter recovers std^2.
struct PredictiveDistribution {
    Vec mean;
    Vec std;
    Mat cov;
    double jitter = 0.0;
};

struct MemberConfig {
    int feature_dim = 512;
    double ridge = 1e-3;
    double lengthscale = 1.0;  // bandwidth of the random feature draw (z-score units)
};

/// One ensemble member: ridge weights over random cosine features
/// phi_f(x, s) = sqrt(2/F) * cos(omega_f . [x_tilde; s_tilde] + phase_f).
///
/// The strain part of the projection is fixed per model, so cos/sin tables
/// over the grid are precomputed and a prediction reduces to two k x F
/// mat-vec products (angle-addition identity); no per-query trig on the grid.
struct RidgeMember {
    Mat omega;    // F x (d+1); last column is the strain projection
    Vec phase;    // F
    Vec weights;  // F

    Mat grid_cos;  // k x F: cos(omega_s * s_tilde + phase)
    Mat grid_sin;  // k x F: sin(omega_s * s_tilde + phase)

    int feature_dim() const { return static_cast<int>(weights.size()); }

    /// Rebuild the grid trig tables for normalized strain values.
    void precompute_grid(const Vec& s_tilde) {
        const Eigen::Index k = s_tilde.size();
        const Eigen::Index f = omega.rows();
        const Vec omega_s = omega.col(omega.cols() - 1);
        grid_cos.resize(k, f);
        grid_sin.resize(k, f);
        for (Eigen::Index u = 0; u < k; ++u)
            for (Eigen::Index j = 0; j < f; ++j) {
                const double arg = omega_s[j] * s_tilde[u] + phase[j];
                grid_cos(u, j) = std::cos(arg);
                grid_sin(u, j) = std::sin(arg);
            }
    }

    /// Feature matrix (k x F) for one normalized design.
    Mat features(const Vec& x_tilde) const {
        const Eigen::Index f = omega.rows();
        const double scale = std::sqrt(2.0 / static_cast<double>(f));
        const Vec proj = omega.leftCols(omega.cols() - 1) * x_tilde;
        const Vec cx = proj.array().cos();
        const Vec sx = proj.array().sin();
        return scale * (grid_cos * cx.asDiagonal() - grid_sin * sx.asDiagonal());
    }

    /// Predicted curve (k-vector) for one normalized design.
    Vec predict(const Vec& x_tilde) const {
        const Eigen::Index f = omega.rows();
        const double scale = std::sqrt(2.0 / static_cast<double>(f));
        const Vec proj = omega.leftCols(omega.cols() - 1) * x_tilde;
        const Vec wc = scale * weights.cwiseProduct(proj.array().cos().matrix());
        const Vec ws = scale * weights.cwiseProduct(proj.array().sin().matrix());
        return grid_cos * wc - grid_sin * ws;
    }
};

struct EnsembleModel {
    std::vector<RidgeMember> members;
    NormStats norm;  // d design features + strain
    Vec grid;
    double gamma = 0.35;
    double sigma_floor = 1e-3;
    double jitter_base = 1e-8;
    double target_condition = 1e8;
    double kernel_scale = 100.0;  // strain -> kernel coordinate (percent units)
    MemberConfig member_config;

    int ensemble_size() const { return static_cast<int>(members.size()); }
    Eigen::Index n_params() const { return norm.mean.size() - 1; }
    Eigen::Index n_points() const { return grid.size(); }

    Vec kernel_coords() const { return grid * kernel_scale; }

    Vec normalize_design(const DesignVector& x) const {
        if (x.size() != n_params())
            throw InvalidDimension("EnsembleModel: design dimension mismatch");
        return (x - norm.mean.head(n_params())).cwiseQuotient(norm.std.head(n_params()));
    }

    Vec normalized_strain() const {
        const Eigen::Index d = n_params();
        return (grid.array() - norm.mean[d]) / norm.std[d];
    }
};

/// Radial-kernel covariance grafting: Sigma_ij = s_i s_j exp(-gamma (c_i - c_j)^2).
/// gamma = 0 and gamma = inf are accepted as the rank-one and diagonal limits.
inline Mat graft_covariance(const Vec& sigma, const Vec& grid, double gamma) {
    if (sigma.size() != grid.size())
        throw InvalidDimension("graft_covariance: sigma/grid length mismatch");
    if ((sigma.array() < 0.0).any())
        throw InvalidStd("graft_covariance: negative std entry");
    if (std::isnan(gamma) || gamma < 0.0)
        throw InvalidInput("graft_covariance: gamma must be >= 0");
    const Eigen::Index k = sigma.size();
    Mat cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        cov(i, i) = sigma[i] * sigma[i];
        for (Eigen::Index j = 0; j < i; ++j) {
            const double dist = grid[i] - grid[j];
            const double kern = std::isinf(gamma) ? 0.0 : std::exp(-gamma * dist * dist);
            const double v = sigma[i] * sigma[j] * kern;
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    return cov;
}

/// Empirical response covariance with the unbiased (h-1) normalization.
inline Mat response_covariance(const Mat& responses) {
    const Eigen::Index h = responses.rows();
    if (h < 2) throw DegenerateStats("response_covariance: need at least 2 rows");
    const Mat centered = responses.rowwise() - responses.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(h - 1);
}

inline Vec default_gamma_grid() {
    Vec g(40);
    for (int i = 0; i < 40; ++i) g[i] = 0.05 * (i + 1);
    return g;
}

/// Grid search for the decay rate minimizing || graft(sigma_bar, grid, g) -
/// train_cov ||_F; ties break toward the smaller gamma.
inline double fit_gamma(const Mat& train_cov, const Vec& sigma_bar, const Vec& grid,
                        const Vec& gamma_grid) {
    if (gamma_grid.size() == 0) throw InvalidInput("fit_gamma: empty gamma grid");
    if (train_cov.rows() != grid.size() || train_cov.cols() != grid.size())
        throw InvalidDimension("fit_gamma: covariance/grid size mismatch");
    std::vector<double> gammas(gamma_grid.data(), gamma_grid.data() + gamma_grid.size());
    std::sort(gammas.begin(), gammas.end());
    double best_gamma = gammas.front();
    double best_dist = std::numeric_limits<double>::infinity();
    for (const double g : gammas) {
        if (!(g > 0.0)) throw InvalidInput("fit_gamma: gamma grid entries must be > 0");
        const double dist = (graft_covariance(sigma_bar, grid, g) - train_cov).norm();
        if (dist < best_dist) {
            best_dist = dist;
            best_gamma = g;
        }
    }
    return best_gamma;
}

namespace detail {

/// Extreme-eigenvalue ratio via power iteration and inverse iteration through
/// an existing Cholesky factorization.
inline double estimate_condition(const Mat& m, const Eigen::LLT<Mat>& llt, int iters = 25) {
    const Eigen::Index k = m.rows();
    if (k == 1) return 1.0;
    Vec v = Vec::Ones(k).normalized();
    for (int i = 0; i < iters; ++i) {
        v = m * v;
        const double n = v.norm();
        if (n == 0.0) return std::numeric_limits<double>::infinity();
        v /= n;
    }
    const double lambda_max = v.dot(m * v);
    Vec u = Vec::Ones(k).normalized();
    for (int i = 0; i < iters; ++i) {
        u = llt.solve(u);
        const double n = u.norm();
        if (!std::isfinite(n) || n == 0.0) return std::numeric_limits<double>::infinity();
        u /= n;
    }
    const double lambda_min = u.dot(m * u);
    if (!(lambda_min > 0.0)) return std::numeric_limits<double>::infinity();
    return lambda_max / lambda_min;
}

}  // namespace detail

/// Adds the smallest diagonal jitter from the ladder {0, eta0, 10*eta0, ...}
/// such that Cholesky succeeds and the estimated condition number stays at or
/// below target_condition. Returns the conditioned matrix and the eta used.
inline std::pair<Mat, double> condition_jitter(const Mat& cov, double target_condition = 1e8,
                                               double eta0 = 1e-8) {
    if (cov.rows() != cov.cols()) throw InvalidDimension("condition_jitter: matrix not square");
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, 1.0))
        throw InvalidInput("condition_jitter: matrix not symmetric");
    constexpr int kMaxRungs = 16;
    double eta = 0.0;
    for (int rung = 0; rung <= kMaxRungs; ++rung) {
        Mat m = cov;
        m.diagonal().array() += eta;
        Eigen::LLT<Mat> llt(m);
        if (llt.info() == Eigen::Success) {
            const double cond = detail::estimate_condition(m, llt);
            if (cond <= target_condition) return {std::move(m), eta};
        }
        eta = (rung == 0) ? eta0 : eta * 10.0;
    }
    throw IllConditioned("condition_jitter: jitter ladder exhausted");
}

namespace detail {

/// Fits one ridge member on a bootstrap resample via chunked normal equations.
inline RidgeMember train_member(const Mat& x_tilde_rows, const Mat& responses,
                                const Vec& s_tilde, const MemberConfig& cfg,
                                std::uint64_t seed) {
    const Eigen::Index h = x_tilde_rows.rows();
    const Eigen::Index d = x_tilde_rows.cols();
    const Eigen::Index k = s_tilde.size();
    const Eigen::Index f = cfg.feature_dim;
    Rng rng(seed);

    RidgeMember member;
    member.omega.resize(f, d + 1);
    for (Eigen::Index i = 0; i < f; ++i)
        for (Eigen::Index j = 0; j < d + 1; ++j)
            member.omega(i, j) = rng.normal() / cfg.lengthscale;
    member.phase.resize(f);
    for (Eigen::Index i = 0; i < f; ++i) member.phase[i] = rng.uniform(0.0, 2.0 * M_PI);
    member.precompute_grid(s_tilde);

    std::vector<Eigen::Index> rows(static_cast<std::size_t>(h));
    for (auto& r : rows) r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(h)));

    Mat gram = Mat::Zero(f, f);
    Vec rhs = Vec::Zero(f);
    constexpr Eigen::Index kChunk = 32;  // designs per Gram accumulation block
    Mat block(kChunk * k, f);
    Vec yblock(kChunk * k);
    Eigen::Index filled = 0;
    auto flush = [&]() {
        if (filled == 0) return;
        const auto a = block.topRows(filled * k);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
        rhs.noalias() += a.transpose() * yblock.head(filled * k);
        filled = 0;
    };
    for (Eigen::Index i = 0; i < h; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        block.middleRows(filled * k, k) = member.features(x_tilde_rows.row(r).transpose());
        yblock.segment(filled * k, k) = responses.row(r).transpose();
        if (++filled == kChunk) flush();
    }
    flush();
    gram = gram.selfadjointView<Eigen::Lower>();

    double ridge = cfg.ridge;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Mat system = gram;
        system.diagonal().array() += ridge;
        Eigen::LLT<Mat> llt(system);
        if (llt.info() == Eigen::Success) {
            member.weights = llt.solve(rhs);
            return member;
        }
        ridge *= 100.0;  // one escalation retry on singular normal equations
    }
    throw TrainingFailed("train_member: normal equations not positive definite");
}

}  // namespace detail

/// Trains a bootstrap ensemble of T ridge members. When pinned_gamma is NaN
/// the covariance decay rate is fitted on the training responses (Frobenius
/// match against the empirical covariance), otherwise the pin is used.
inline EnsembleModel train_ensemble(const Dataset& dataset, int ensemble_size,
                                    const MemberConfig& member_cfg, std::uint64_t seed,
                                    double pinned_gamma = std::numeric_limits<double>::quiet_NaN()) {
    if (dataset.rows() < 1) throw InvalidInput("train_ensemble: empty dataset");
    if (ensemble_size < 2) throw InvalidInput("train_ensemble: need T >= 2");
    if (member_cfg.feature_dim < 1) throw InvalidInput("train_ensemble: feature_dim >= 1");
    dataset.norm.validate();

    EnsembleModel model;
    model.norm = dataset.norm;
    model.grid = dataset.grid;
    model.member_config = member_cfg;

    const Eigen::Index d = dataset.n_params();
    Mat x_tilde(dataset.rows(), d);
    for (Eigen::Index i = 0; i < dataset.rows(); ++i)
        x_tilde.row(i) = (dataset.designs.row(i) - model.norm.mean.head(d).transpose())
                             .cwiseQuotient(model.norm.std.head(d).transpose());
    const Vec s_tilde = (dataset.grid.array() - model.norm.mean[d]) / model.norm.std[d];

    model.members.resize(static_cast<std::size_t>(ensemble_size));
    parallel_for(static_cast<std::size_t>(ensemble_size), [&](std::size_t t) {
        model.members[t] = detail::train_member(x_tilde, dataset.responses, s_tilde, member_cfg,
                                                derive_seed(seed, t));
    });

    if (std::isnan(pinned_gamma)) {
        const Mat train_cov = response_covariance(dataset.responses);
        const Vec sigma_bar = train_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        model.gamma = fit_gamma(train_cov, sigma_bar, model.kernel_coords(), default_gamma_grid());
    } else {
        if (!(pinned_gamma > 0.0)) throw InvalidInput("train_ensemble: pinned gamma must be > 0");
        model.gamma = pinned_gamma;
    }
    return model;
}

/// Ensemble mean and per-point population std across members, floored at
/// sigma_floor.
inline std::pair<Vec, Vec> predict_mean_std(const EnsembleModel& model, const DesignVector& x) {
    if (model.members.size() < 1) throw InvalidInput("predict_mean_std: untrained model");
    const Vec x_tilde = model.normalize_design(x);
    const Eigen::Index k = model.n_points();
    const auto t_count = static_cast<Eigen::Index>(model.members.size());
    Mat preds(t_count, k);
    for (Eigen::Index t = 0; t < t_count; ++t)
        preds.row(t) = model.members[static_cast<std::size_t>(t)].predict(x_tilde).transpose();
    Vec mu = preds.colwise().mean();
    Vec var = (preds.rowwise() - mu.transpose()).array().square().colwise().mean();
    Vec sigma = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(model.sigma_floor);
    return {std::move(mu), std::move(sigma)};
}

/// Ensemble mean only (fast path for mean-squared-error fitness loops).
inline Vec predict_mean(const EnsembleModel& model, const DesignVector& x) {
    if (model.members.size() < 1) throw InvalidInput("predict_mean: untrained model");
    const Vec x_tilde = model.normalize_design(x);
    Vec mu = Vec::Zero(model.n_points());
    for (const auto& member : model.members) mu += member.predict(x_tilde);
    return mu / static_cast<double>(model.members.size());
}

/// Full predictive distribution: ensemble mean/std, grafted covariance, and
/// jitter conditioning.
inline PredictiveDistribution predict_distribution(const EnsembleModel& model,
                                                   const DesignVector& x) {
    PredictiveDistribution pred;
    auto [mu, sigma] = predict_mean_std(model, x);
    pred.mean = std::move(mu);
    pred.std = std::move(sigma);
    const Mat raw = graft_covariance(pred.std, model.kernel_coords(), model.gamma);
    auto [cov, eta] = condition_jitter(raw, model.target_condition, model.jitter_base);
    pred.cov = std::move(cov);
    pred.jitter = eta;
    return pred;
}

}  // namespace guide
