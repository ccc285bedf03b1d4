#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/parallel.hpp"
#include "guide/rng.hpp"
#include "guide/surrogate.hpp"

namespace guide {

/// Surrogate-assisted GA baseline: generational, tournament selection of
/// size 2, uniform crossover, Gaussian mutation, elitism. Fitness is the MSE
/// between the predictive mean and the target over constrained points.
struct GaConfig {
    int population = 100;
    int generations = 100;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;
    double mutation_scale = 0.1;  // fraction of the per-parameter training std
    int elitism = 2;
    Vec low;   // gene box, usually the PSO search bounds
    Vec high;
    Vec gene_std;  // per-parameter training std for mutation scaling

    void validate() const {
        if (population < 2) throw InvalidInput("GaConfig: population >= 2");
        if (generations < 1) throw InvalidInput("GaConfig: generations >= 1");
        if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 ||
            mutation_rate > 1.0)
            throw InvalidInput("GaConfig: rates must lie in [0, 1]");
        if (elitism < 0 || elitism >= population)
            throw InvalidInput("GaConfig: need 0 <= elitism < population");
        if (low.size() == 0 || low.size() != high.size() || gene_std.size() != low.size())
            throw InvalidDimension("GaConfig: bounds/gene_std length mismatch");
    }
};

namespace detail {

inline DesignVector ga_random_design(const GaConfig& cfg, Rng& rng) {
    const Eigen::Index d = cfg.low.size();
    DesignVector x(d);
    for (int attempt = 0; attempt < 5000; ++attempt) {
        for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.uniform(cfg.low[j], cfg.high[j]);
        if (check_design_constraints(x)) return x;
    }
    throw RangesInfeasible("ga_design: cannot sample a valid individual in bounds");
}

/// Repair by resampling genes: redraw the whole gene vector mode-wise until
/// the physical constraints hold.
inline void ga_repair(DesignVector& x, const GaConfig& cfg, Rng& rng) {
    if (check_design_constraints(x)) return;
    x = ga_random_design(cfg, rng);
}

}  // namespace detail

/// Runs the GA and returns the n_out best-by-fitness unique individuals seen
/// across all generations (hall of fame; a converged final population may
/// hold fewer than n_out distinct points).
inline std::vector<DesignVector> ga_design(const EnsembleModel& model, const TargetSpec& target,
                                           const GaConfig& cfg, int n_out, std::uint64_t seed) {
    cfg.validate();
    target.validate();
    if (n_out < 1) throw InvalidInput("ga_design: n_out >= 1");

    std::vector<Eigen::Index> constrained;
    for (Eigen::Index u = 0; u < target.size(); ++u)
        if (target.constrains(u)) constrained.push_back(u);
    if (constrained.empty()) throw InvalidInput("ga_design: target has no constrained points");

    auto fitness_of = [&](const DesignVector& x) {
        const Vec mu = predict_mean(model, x);
        double sum = 0.0;
        for (const Eigen::Index u : constrained) {
            const double e = mu[u] - target.target.values[u];
            sum += e * e;
        }
        return sum / static_cast<double>(constrained.size());
    };

    Rng rng(derive_seed(seed, 0x6761));
    const Eigen::Index d = cfg.low.size();
    const auto pop_n = static_cast<std::size_t>(cfg.population);
    std::vector<DesignVector> pop(pop_n);
    std::vector<double> fit(pop_n);
    for (auto& x : pop) x = detail::ga_random_design(cfg, rng);

    std::vector<std::pair<DesignVector, double>> archive;  // all evaluated individuals
    archive.reserve(pop_n * static_cast<std::size_t>(cfg.generations + 1));

    auto evaluate = [&]() {
        parallel_for(pop_n, [&](std::size_t i) { fit[i] = fitness_of(pop[i]); });
        for (std::size_t i = 0; i < pop_n; ++i) archive.emplace_back(pop[i], fit[i]);
    };
    evaluate();

    auto tournament = [&]() -> const DesignVector& {
        const std::size_t a = rng.index(pop_n);
        const std::size_t b = rng.index(pop_n);
        return fit[a] <= fit[b] ? pop[a] : pop[b];
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<std::size_t> rank(pop_n);
        std::iota(rank.begin(), rank.end(), std::size_t{0});
        std::stable_sort(rank.begin(), rank.end(),
                         [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

        std::vector<DesignVector> next;
        next.reserve(pop_n);
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[rank[static_cast<std::size_t>(e)]]);
        while (next.size() < pop_n) {
            DesignVector child_a = tournament();
            DesignVector child_b = tournament();
            if (rng.uniform() < cfg.crossover_rate)
                for (Eigen::Index j = 0; j < d; ++j)
                    if (rng.uniform() < 0.5) std::swap(child_a[j], child_b[j]);
            for (DesignVector* child : {&child_a, &child_b}) {
                for (Eigen::Index j = 0; j < d; ++j)
                    if (rng.uniform() < cfg.mutation_rate) {
                        (*child)[j] += rng.normal() * cfg.mutation_scale * cfg.gene_std[j];
                        (*child)[j] = std::clamp((*child)[j], cfg.low[j], cfg.high[j]);
                    }
                detail::ga_repair(*child, cfg, rng);
                if (next.size() < pop_n) next.push_back(*child);
            }
        }
        pop = std::move(next);
        evaluate();
    }

    std::stable_sort(archive.begin(), archive.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    std::vector<DesignVector> out;
    for (const auto& [x, f] : archive) {
        if (static_cast<int>(out.size()) == n_out) break;
        bool dup = false;
        for (const auto& y : out)
            if (x == y) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(x);
    }
    return out;
}

}  // namespace guide
