#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "guide/config.hpp"
#include "guide/ga.hpp"
#include "guide/io.hpp"
#include "guide/likelihood.hpp"
#include "guide/mcmc.hpp"
#include "guide/metrics.hpp"
#include "guide/oracle.hpp"
#include "guide/pso.hpp"
#include "guide/surrogate.hpp"

namespace guide::cli {

/// Stable exit-code contract:
/// 0 success, 2 usage/config/data-file errors, 3 dataset generation failure,
/// 4 training failure, 10 refusal (a valid outcome, not a failure).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTraining = 4;
inline constexpr int kExitRefusal = 10;

namespace fs = std::filesystem;

namespace detail {

inline void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p))
        throw IoError(std::string(what) + " not found: " + p.string());
}

/// Target with tolerance = fraction * peak stress, the benchmark convention.
inline TargetSpec target_from_response(const Vec& grid, const Vec& values, double tol_fraction) {
    TargetSpec t;
    t.target.grid = grid;
    t.target.values = values;
    const double peak = values.maxCoeff();
    t.tolerance = Vec::Constant(values.size(), tol_fraction * peak);
    return t;
}

struct DedupedDesigns {
    std::vector<DesignVector> designs;
    std::vector<double> likelihoods;
    std::vector<int> multiplicities;
};

/// Collapses exact repeats from rejected moves, then ranks by likelihood.
inline DedupedDesigns dedupe_records(const std::vector<ChainRecord>& records) {
    DedupedDesigns out;
    for (const auto& r : records) {
        bool found = false;
        for (std::size_t i = 0; i < out.designs.size(); ++i) {
            if (out.designs[i] == r.x) {
                ++out.multiplicities[i];
                found = true;
                break;
            }
        }
        if (!found) {
            out.designs.push_back(r.x);
            out.likelihoods.push_back(r.likelihood);
            out.multiplicities.push_back(1);
        }
    }
    std::vector<std::size_t> order(out.designs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.likelihoods[a] > out.likelihoods[b];
    });
    DedupedDesigns ranked;
    for (const auto i : order) {
        ranked.designs.push_back(out.designs[i]);
        ranked.likelihoods.push_back(out.likelihoods[i]);
        ranked.multiplicities.push_back(out.multiplicities[i]);
    }
    return ranked;
}

}  // namespace detail

/// gen-data: writes train/val/test CSVs plus the grid manifest.
inline int cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
    if (cfg.n_train < 1) throw ConfigError("gen-data: data.n_train must be >= 1");
    const fs::path dir = cfg.paths.dataset_dir;
    fs::create_directories(dir);

    GenerationStats train_stats;
    const Dataset train =
        generate_dataset(cfg.n_train, cfg.ranges, cfg.oracle, cfg.seeds.data, &train_stats);
    save_dataset_csv(dir / "train.csv", train);

    GenerationStats holdout_stats;
    if (cfg.n_holdout > 1) {
        const Dataset holdout = generate_dataset(cfg.n_holdout, cfg.ranges, cfg.oracle,
                                                 derive_seed(cfg.seeds.data, 1), &holdout_stats);
        const Eigen::Index n_val = cfg.n_holdout / 2;
        Dataset val{holdout.designs.topRows(n_val), holdout.responses.topRows(n_val),
                    holdout.grid, holdout.norm};
        Dataset test{holdout.designs.bottomRows(holdout.rows() - n_val),
                     holdout.responses.bottomRows(holdout.rows() - n_val), holdout.grid,
                     holdout.norm};
        save_dataset_csv(dir / "val.csv", val);
        save_dataset_csv(dir / "test.csv", test);
        log << "val rows: " << val.rows() << "\ntest rows: " << test.rows() << "\n";
    }
    save_grid_manifest(dir / "manifest.json", train.grid, cfg.hash());

    log << "train rows: " << train.rows() << "\n"
        << "constraint rejection rate: " << fmt_double(train_stats.rejection_rate()) << " ("
        << train_stats.attempts << " draws for " << train_stats.rows << " rows)\n";
    return kExitOk;
}

/// train: fits the ensemble (and gamma unless pinned), reports validation
/// RMSE, writes the model artifact.
inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir = cfg.paths.dataset_dir;
    detail::require_exists(dir / "train.csv", "training CSV");
    detail::require_exists(dir / "manifest.json", "grid manifest");
    const Vec grid = load_grid_manifest(dir / "manifest.json");
    const Dataset train = load_dataset_csv(dir / "train.csv", grid);

    EnsembleModel model = train_ensemble(
        train, cfg.surrogate.ensemble_size, cfg.surrogate.member, cfg.seeds.train,
        cfg.surrogate.gamma_pin.value_or(std::numeric_limits<double>::quiet_NaN()));
    model.sigma_floor = cfg.surrogate.sigma_floor;
    model.jitter_base = cfg.surrogate.jitter_base;
    model.target_condition = cfg.surrogate.target_condition;
    model.kernel_scale = cfg.surrogate.kernel_scale;
    if (!cfg.surrogate.gamma_pin) {
        // refit on the configured kernel scale if it differs from the default
        const Mat train_cov = response_covariance(train.responses);
        const Vec sigma_bar = train_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        model.gamma = fit_gamma(train_cov, sigma_bar, model.kernel_coords(), default_gamma_grid());
    }

    double val_rmse = std::numeric_limits<double>::quiet_NaN();
    if (fs::exists(dir / "val.csv")) {
        const Dataset val = load_dataset_csv(dir / "val.csv", grid);
        std::vector<double> sq(static_cast<std::size_t>(val.rows()));
        parallel_for(static_cast<std::size_t>(val.rows()), [&](std::size_t i) {
            const Vec mu = predict_mean(model, val.designs.row(static_cast<Eigen::Index>(i)).transpose());
            sq[i] = (mu - val.responses.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm() /
                    static_cast<double>(val.n_points());
        });
        val_rmse = std::sqrt(pairwise_sum(sq.data(), sq.size()) / static_cast<double>(sq.size()));
    }

    save_model(cfg.paths.model, model, cfg.hash());
    log << "ensemble members: " << model.ensemble_size() << "\n"
        << "gamma: " << fmt_double(model.gamma)
        << (cfg.surrogate.gamma_pin ? " (pinned)" : " (fitted)") << "\n"
        << "validation rmse: " << fmt_double(val_rmse) << " MPa\n";
    return kExitOk;
}

struct DesignOutcome {
    bool refused = false;
    SupportResult support;
    std::vector<ChainRecord> records;
};

/// Library-level design pipeline: support search, then posterior sampling.
inline DesignOutcome run_design_pipeline(const EnsembleModel& model, const TargetSpec& target,
                                         const RunConfig& cfg, std::uint64_t seed,
                                         int n_keep_override = -1) {
    DesignOutcome outcome;
    outcome.support = pso_search(model, target, model.norm, cfg.pso, seed, cfg.n_mc);
    if (!outcome.support.found) {
        outcome.refused = true;
        return outcome;
    }
    const Eigen::Index d = model.n_params();
    ChainConfig chain_cfg =
        make_chain_config(cfg.chain, model.norm.mean.head(d), model.norm.std.head(d));
    if (n_keep_override > 0) chain_cfg.n_keep = n_keep_override;
    outcome.records =
        run_design_chain(model, target, *outcome.support.x0, chain_cfg, cfg.n_mc, seed);
    return outcome;
}

/// design: PSO + MCMC for one target; exit 10 with zero designs on refusal.
inline int cmd_design(const RunConfig& cfg, std::ostream& log,
                      const std::string& target_override = {},
                      const std::string& out_override = {}) {
    const fs::path target_path = target_override.empty() ? fs::path(cfg.paths.target)
                                                         : fs::path(target_override);
    if (target_path.empty()) throw ConfigError("design: no target path configured");
    detail::require_exists(target_path, "target JSON");
    detail::require_exists(cfg.paths.model, "model artifact");
    const fs::path out_dir = out_override.empty() ? fs::path(cfg.paths.out_dir)
                                                  : fs::path(out_override);
    fs::create_directories(out_dir);

    const EnsembleModel model = load_model(cfg.paths.model);
    const TargetSpec target = load_target(target_path);
    if (!target.well_posed())
        throw ConfigError("design: target needs at least one finite unmasked tolerance");

    const DesignOutcome outcome = run_design_pipeline(model, target, cfg, cfg.seeds.design);

    if (outcome.refused) {
        Json refusal;
        refusal["found"] = false;
        refusal["iterations_used"] = outcome.support.iterations_used;
        refusal["best_objective"] = outcome.support.best_objective;
        refusal["config_hash"] = cfg.hash();
        write_json(out_dir / "refusal.json", refusal);
        save_designs_csv(out_dir / "designs.csv", {}, {}, {});
        log << "refusal: no positive-likelihood design within "
            << outcome.support.iterations_used << " iterations\n";
        return kExitRefusal;
    }

    save_chain_trace(out_dir / "trace.jsonl", outcome.records);
    const auto ranked = detail::dedupe_records(outcome.records);
    save_designs_csv(out_dir / "designs.csv", ranked.designs, ranked.likelihoods,
                     ranked.multiplicities);

    std::int64_t accepted = 0;
    for (const auto& r : outcome.records) accepted += r.accepted ? 1 : 0;
    Json info;
    info["found"] = true;
    info["iterations_used"] = outcome.support.iterations_used;
    info["likelihood0"] = *outcome.support.likelihood0;
    info["n_designs"] = ranked.designs.size();
    info["acceptance_rate"] =
        static_cast<double>(accepted) / static_cast<double>(outcome.records.size());
    info["config_hash"] = cfg.hash();
    write_json(out_dir / "run_info.json", info);

    log << "designs: " << ranked.designs.size() << " unique of " << outcome.records.size()
        << " retained (acceptance " << fmt_double(info["acceptance_rate"].get<double>())
        << ")\n";
    return kExitOk;
}

/// evaluate: oracle-validates a design file and writes metric reports.
inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log,
                        const std::string& designs_path, const std::string& target_path) {
    detail::require_exists(designs_path, "designs CSV");
    detail::require_exists(target_path, "target JSON");
    const fs::path dir = cfg.paths.dataset_dir;
    detail::require_exists(dir / "train.csv", "training CSV");
    detail::require_exists(dir / "manifest.json", "grid manifest");

    auto [designs, likelihoods] = load_designs_csv(designs_path);
    if (designs.empty()) throw IoError("evaluate: design file has no rows");
    const TargetSpec target = load_target(target_path);
    const Vec grid = load_grid_manifest(dir / "manifest.json");
    const Dataset train = load_dataset_csv(dir / "train.csv", grid);

    const fs::path out_dir = cfg.paths.out_dir;
    fs::create_directories(out_dir);

    std::vector<bool> feasible(designs.size());
    for (std::size_t i = 0; i < designs.size(); ++i)
        feasible[i] = check_feasible(designs[i], target, cfg.oracle);

    const Eigen::Index d = train.n_params();
    Mat std_designs(static_cast<Eigen::Index>(designs.size()), d);
    for (std::size_t i = 0; i < designs.size(); ++i)
        std_designs.row(static_cast<Eigen::Index>(i)) =
            (designs[i] - train.design_mean()).cwiseQuotient(train.design_std()).transpose();
    Mat std_train(train.rows(), d);
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        std_train.row(i) = (train.designs.row(i).transpose() - train.design_mean())
                               .cwiseQuotient(train.design_std())
                               .transpose();

    MetricsReport report;
    report.feasibility_rate =
        static_cast<double>(std::count(feasible.begin(), feasible.end(), true)) /
        static_cast<double>(designs.size());
    report.vendi = vendi_score(std_designs, median_pairwise_distance(std_designs));
    report.knn_novelty = knn_novelty(std_designs, std_train, std::min<int>(5, train.rows()));
    if (!likelihoods.empty()) {
        std::vector<std::pair<double, bool>> records;
        for (std::size_t i = 0; i < designs.size(); ++i)
            records.emplace_back(likelihoods[i], feasible[i]);
        report.pearson_r = binned_correlation(records, 20, 20);
    }

    save_metrics_report(out_dir / "report.json", report, cfg.hash());
    {
        auto out = guide::detail::open_out(out_dir / "per_design.csv");
        out << "index,feasible" << (likelihoods.empty() ? "" : ",likelihood") << "\n";
        for (std::size_t i = 0; i < designs.size(); ++i) {
            out << i << "," << (feasible[i] ? 1 : 0);
            if (!likelihoods.empty()) out << "," << fmt_double(likelihoods[i]);
            out << "\n";
        }
    }
    log << "feasibility_rate: " << fmt_double(report.feasibility_rate) << "\n"
        << "vendi: " << fmt_double(report.vendi) << "\n"
        << "knn_novelty: " << fmt_double(report.knn_novelty) << "\n";
    return kExitOk;
}

struct BenchmarkRow {
    std::string method;
    int target_id = 0;
    bool found = true;
    double feasibility = 0.0;
    double vendi = std::numeric_limits<double>::quiet_NaN();
    double knn = std::numeric_limits<double>::quiet_NaN();
};

/// benchmark: GUIDe vs the GA baseline over targets drawn from the test
/// split, matched design budgets, per-method metrics CSV plus pooled
/// likelihood-feasibility records.
inline int cmd_benchmark(const RunConfig& cfg, std::ostream& log) {
    detail::require_exists(cfg.paths.model, "model artifact");
    const fs::path dir = cfg.paths.dataset_dir;
    detail::require_exists(dir / "train.csv", "training CSV");
    detail::require_exists(dir / "test.csv", "test CSV");
    detail::require_exists(dir / "manifest.json", "grid manifest");

    const EnsembleModel model = load_model(cfg.paths.model);
    const Vec grid = load_grid_manifest(dir / "manifest.json");
    const Dataset train = load_dataset_csv(dir / "train.csv", grid);
    const Dataset test = load_dataset_csv(dir / "test.csv", grid);
    const fs::path out_dir = cfg.paths.out_dir;
    fs::create_directories(out_dir / "targets");

    const int n_targets = cfg.benchmark.n_targets;
    const int budget = cfg.benchmark.designs_per_target;
    if (n_targets < 1 || budget < 1)
        throw ConfigError("benchmark: n_targets and designs_per_target must be >= 1");
    if (test.rows() < n_targets)
        throw ConfigError("benchmark: test split smaller than n_targets");

    Rng pick(derive_seed(cfg.seeds.design, 0x7461726765747300ULL));
    std::vector<Eigen::Index> target_rows;
    while (static_cast<int>(target_rows.size()) < n_targets) {
        const auto row = static_cast<Eigen::Index>(pick.index(static_cast<std::size_t>(test.rows())));
        if (std::find(target_rows.begin(), target_rows.end(), row) == target_rows.end())
            target_rows.push_back(row);
    }

    const Eigen::Index d = model.n_params();
    const GaConfig ga_cfg =
        make_ga_config(cfg.ga, cfg.pso.alpha, model.norm.mean.head(d), model.norm.std.head(d));

    Mat std_train(train.rows(), d);
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        std_train.row(i) = (train.designs.row(i).transpose() - train.design_mean())
                               .cwiseQuotient(train.design_std())
                               .transpose();
    auto standardized = [&](const std::vector<DesignVector>& xs) {
        Mat m(static_cast<Eigen::Index>(xs.size()), d);
        for (std::size_t i = 0; i < xs.size(); ++i)
            m.row(static_cast<Eigen::Index>(i)) =
                (xs[i] - train.design_mean()).cwiseQuotient(train.design_std()).transpose();
        return m;
    };
    auto subset_metrics = [&](const std::vector<DesignVector>& xs, const TargetSpec& target,
                              BenchmarkRow& row) {
        row.feasibility = feasibility_rate(xs, target, cfg.oracle);
        std::vector<DesignVector> ok;
        for (const auto& x : xs)
            if (check_feasible(x, target, cfg.oracle)) ok.push_back(x);
        if (!ok.empty()) {
            const Mat m = standardized(ok);
            row.vendi = vendi_score(m, median_pairwise_distance(m));
            row.knn = knn_novelty(m, std_train, std::min<int>(5, train.rows()));
        }
    };

    std::vector<BenchmarkRow> guide_rows(static_cast<std::size_t>(n_targets));
    std::vector<BenchmarkRow> ga_rows(static_cast<std::size_t>(n_targets));
    std::vector<std::vector<std::pair<double, bool>>> pooled(static_cast<std::size_t>(n_targets));

    parallel_for(static_cast<std::size_t>(n_targets), [&](std::size_t i) {
        const Eigen::Index row = target_rows[i];
        const TargetSpec target = detail::target_from_response(
            grid, test.responses.row(row).transpose(), cfg.benchmark.tolerance_fraction);
        const std::uint64_t seed = derive_seed(cfg.seeds.design, i);

        BenchmarkRow& g = guide_rows[i];
        g.method = "guide";
        g.target_id = static_cast<int>(i);
        const DesignOutcome outcome = run_design_pipeline(model, target, cfg, seed, budget);
        if (outcome.refused) {
            g.found = false;
        } else {
            std::vector<DesignVector> xs;
            for (const auto& r : outcome.records) {
                xs.push_back(r.x);
                pooled[i].emplace_back(r.likelihood, check_feasible(r.x, target, cfg.oracle));
            }
            subset_metrics(xs, target, g);
        }

        BenchmarkRow& b = ga_rows[i];
        b.method = "ga";
        b.target_id = static_cast<int>(i);
        const auto ga_designs = ga_design(model, target, ga_cfg, budget, seed);
        subset_metrics(ga_designs, target, b);

        save_target(out_dir / "targets" / ("target_" + std::to_string(i) + ".json"), target);
    });

    std::vector<std::pair<double, bool>> all_records;
    for (const auto& p : pooled) all_records.insert(all_records.end(), p.begin(), p.end());

    {
        auto out = guide::detail::open_out(out_dir / "benchmark.csv");
        out << "method,target_id,found,feasibility,vendi,knn_novelty\n";
        for (const auto* rows : {&guide_rows, &ga_rows})
            for (const auto& r : *rows)
                out << r.method << "," << r.target_id << "," << (r.found ? 1 : 0) << ","
                    << fmt_double(r.feasibility) << "," << fmt_double(r.vendi) << ","
                    << fmt_double(r.knn) << "\n";
    }
    {
        auto out = guide::detail::open_out(out_dir / "records.csv");
        out << "likelihood,feasible\n";
        for (const auto& [lik, ok] : all_records)
            out << fmt_double(lik) << "," << (ok ? 1 : 0) << "\n";
    }

    auto mean_feasibility = [](const std::vector<BenchmarkRow>& rows) {
        double s = 0.0;
        for (const auto& r : rows) s += r.feasibility;
        return s / static_cast<double>(rows.size());
    };
    Json summary;
    summary["n_targets"] = n_targets;
    summary["designs_per_target"] = budget;
    summary["guide_feasibility"] = mean_feasibility(guide_rows);
    summary["ga_feasibility"] = mean_feasibility(ga_rows);
    const auto r = all_records.empty()
                       ? std::nullopt
                       : binned_correlation(all_records, 20, 20);
    if (r)
        summary["pearson_r"] = *r;
    else
        summary["pearson_r"] = nullptr;
    summary["config_hash"] = cfg.hash();
    write_json(out_dir / "benchmark_summary.json", summary);

    log << "guide feasibility: " << fmt_double(summary["guide_feasibility"].get<double>()) << "\n"
        << "ga feasibility: " << fmt_double(summary["ga_feasibility"].get<double>()) << "\n";
    return kExitOk;
}

}  // namespace guide::cli
