#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/likelihood.hpp"
#include "guide/pso.hpp"
#include "guide/rng.hpp"
#include "guide/surrogate.hpp"

namespace guide {

struct ChainConfig {
    int burn_in = 20;
    int n_keep = 50;
    double psi = 0.0;  // 0 -> the asymptotically optimal 2.38/sqrt(d)
    Vec sigma_q_init;  // initial per-parameter proposal stds
    Vec prior_low;
    Vec prior_high;
    int max_resample = 1000;

    double effective_psi(Eigen::Index d) const {
        return psi > 0.0 ? psi : 2.38 / std::sqrt(static_cast<double>(d));
    }

    void validate() const {
        if (burn_in < 0) throw InvalidInput("ChainConfig: burn_in >= 0");
        if (n_keep < 1) throw InvalidInput("ChainConfig: n_keep >= 1");
        if (psi < 0.0) throw InvalidInput("ChainConfig: psi must be >= 0");
        if (max_resample < 1) throw InvalidInput("ChainConfig: max_resample >= 1");
        if (sigma_q_init.size() == 0 || (sigma_q_init.array() <= 0.0).any())
            throw InvalidInput("ChainConfig: sigma_q_init must be positive");
        if (prior_low.size() != sigma_q_init.size() || prior_high.size() != sigma_q_init.size())
            throw InvalidDimension("ChainConfig: prior bounds length mismatch");
        if ((prior_low.array() >= prior_high.array()).any())
            throw InvalidInput("ChainConfig: need prior_low < prior_high");
    }
};

/// One retained chain state. Rejections repeat the previous state with
/// accepted = false (standard Metropolis-Hastings semantics).
struct ChainRecord {
    DesignVector x;
    double likelihood = 0.0;
    bool accepted = false;
    int iteration = 0;
};

using LikelihoodFn = std::function<double(const DesignVector&)>;
using ValidityFn = std::function<bool(const DesignVector&)>;

/// Gaussian random-walk proposal x' = x_c + zeta, zeta ~ N(0, psi^2 Sigma_q),
/// resampled until `valid` accepts, up to max_resample draws.
inline DesignVector propose(const DesignVector& x_c, double psi, const Mat& sigma_q,
                            const ValidityFn& valid, int max_resample, Rng& rng) {
    Eigen::LLT<Mat> llt(sigma_q);
    if (llt.info() != Eigen::Success)
        throw NotCholesky("propose: proposal covariance not positive definite");
    const Mat chol_lower = llt.matrixL();
    for (int attempt = 0; attempt < max_resample; ++attempt) {
        const DesignVector x_new = x_c + psi * (chol_lower * rng.normal_vector(x_c.size()));
        if (valid(x_new)) return x_new;
    }
    throw ProposalStuck("propose: max_resample exceeded");
}

/// Metropolis acceptance with probability min(1, l_new / l_old).
inline bool metropolis_accept(double l_new, double l_old, Rng& rng) {
    if (!(l_old > 0.0)) throw InvalidChainState("metropolis_accept: current likelihood must be > 0");
    const double ratio = l_new / l_old;
    if (ratio >= 1.0) return true;
    return rng.uniform() < ratio;
}

/// Random-walk Metropolis chain. Burn-in runs on the diagonal sigma_q_init
/// covariance; afterwards the proposal covariance is replaced by the
/// empirical covariance of the burn-in states, shrunk 50/50 toward its
/// diagonal and jittered (it is rank-deficient for short burn-ins), and then
/// frozen. Returns the post-burn-in records only.
inline std::vector<ChainRecord> run_chain(const LikelihoodFn& likelihood_fn,
                                          const ValidityFn& valid, const DesignVector& x0,
                                          const ChainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Eigen::Index d = x0.size();
    if (d != cfg.sigma_q_init.size())
        throw InvalidDimension("run_chain: x0 dimension does not match config");
    if (!valid(x0)) throw InvalidChainState("run_chain: x0 violates constraints or prior support");
    double l_current = likelihood_fn(x0);
    if (!(l_current > 0.0)) throw InvalidChainState("run_chain: likelihood(x0) must be > 0");

    Rng rng(derive_seed(seed, 0x6d636d63));
    Mat sigma_q = cfg.sigma_q_init.array().square().matrix().asDiagonal();

    DesignVector x = x0;
    std::vector<ChainRecord> kept;
    kept.reserve(static_cast<std::size_t>(cfg.n_keep));
    Mat burn_states(cfg.burn_in, d);

    const double psi = cfg.effective_psi(d);
    const int total = cfg.burn_in + cfg.n_keep;
    for (int it = 0; it < total; ++it) {
        bool accepted = false;
        try {
            const DesignVector x_new = propose(x, psi, sigma_q, valid, cfg.max_resample, rng);
            const double l_new = likelihood_fn(x_new);
            if (metropolis_accept(l_new, l_current, rng)) {
                x = x_new;
                l_current = l_new;  // likelihood cached; rejections never re-integrate
                accepted = true;
            }
        } catch (const ProposalStuck&) {
            accepted = false;  // stay put rather than aborting near tight corners
        }

        if (it < cfg.burn_in) {
            burn_states.row(it) = x.transpose();
            if (it == cfg.burn_in - 1 && cfg.burn_in >= 2) {
                const Mat centered = burn_states.rowwise() - burn_states.colwise().mean();
                Mat emp = (centered.transpose() * centered) / static_cast<double>(cfg.burn_in - 1);
                Mat blended = 0.5 * emp;
                blended.diagonal() += 0.5 * emp.diagonal();
                const double eta = 1e-8 * blended.diagonal().mean() + 1e-12;
                blended.diagonal().array() += eta;
                sigma_q = blended;
            }
        } else {
            kept.push_back({x, l_current, accepted, it});
        }
    }
    return kept;
}

/// Design-space validity: physical constraints plus the uniform prior box.
inline ValidityFn design_validity(const Vec& prior_low, const Vec& prior_high) {
    return [prior_low, prior_high](const DesignVector& x) {
        if ((x.array() < prior_low.array()).any() || (x.array() > prior_high.array()).any())
            return false;
        return check_design_constraints(x);
    };
}

/// Posterior sampling for a design task. The likelihood seed is shared with
/// pso_search so the chain sees exactly the probability that qualified x0.
inline std::vector<ChainRecord> run_design_chain(const EnsembleModel& model,
                                                 const TargetSpec& target, const DesignVector& x0,
                                                 const ChainConfig& cfg, std::int64_t n_mc,
                                                 std::uint64_t seed) {
    const std::uint64_t lik_seed = support_likelihood_seed(seed);
    LikelihoodFn lik = [&model, &target, n_mc, lik_seed](const DesignVector& x) {
        return likelihood(model, x, target, n_mc, lik_seed).p;
    };
    return run_chain(lik, design_validity(cfg.prior_low, cfg.prior_high), x0, cfg, seed);
}

}  // namespace guide
