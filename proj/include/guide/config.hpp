#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "guide/core.hpp"
#include "guide/ga.hpp"
#include "guide/io.hpp"
#include "guide/mcmc.hpp"
#include "guide/oracle.hpp"
#include "guide/pso.hpp"
#include "guide/surrogate.hpp"

namespace guide {

struct SurrogateSettings {
    int ensemble_size = 30;
    MemberConfig member;
    double sigma_floor = 1e-3;
    std::optional<double> gamma_pin;  // absent -> fit on training covariance
    double kernel_scale = 100.0;
    double jitter_base = 1e-8;
    double target_condition = 1e8;
};

struct ChainSettings {
    int burn_in = 20;
    int n_keep = 50;
    std::optional<double> psi;   // absent -> 2.38/sqrt(d)
    double sigma_q_scale = 0.1;  // initial proposal std as a fraction of sigma_x
    double alpha_prior = 6.0;    // prior box: [0, mean + alpha_prior * std]
    int max_resample = 1000;
};

struct BenchmarkSettings {
    int n_targets = 50;
    int designs_per_target = 50;
    double tolerance_fraction = 0.10;  // epsilon as a fraction of target peak stress
};

struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t train = 2;
    std::uint64_t design = 3;
};

struct Paths {
    std::string dataset_dir = "data";
    std::string model = "model.json";
    std::string target;
    std::string out_dir = "out";
};

struct GaSettings {
    int population = 100;
    int generations = 100;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;
    double mutation_scale = 0.1;
    int elitism = 2;
};

struct RunConfig {
    OracleConfig oracle;
    ParameterRanges ranges = default_parameter_ranges();
    int n_train = 1669;
    int n_holdout = 5667;
    SurrogateSettings surrogate;
    PsoConfig pso;
    ChainSettings chain;
    std::int64_t n_mc = 4096;
    GaSettings ga;
    BenchmarkSettings benchmark;
    Seeds seeds;
    Paths paths;
    Json raw;  // canonical parsed config, hashed into artifacts

    std::string hash() const { return config_hash(raw); }
};

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

inline Vec get_vec(const Json& j, const char* key, const Vec& fallback) {
    if (!j.contains(key)) return fallback;
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// Parses and validates the run-level JSON config. Unknown values of the
/// wrong type and invariant violations raise ConfigError.
inline RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file not found: " + path.string());
    Json j;
    try {
        j = Json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    RunConfig cfg;
    cfg.raw = j;
    try {
        if (j.contains("oracle")) {
            const Json& o = j["oracle"];
            cfg.oracle.blend_normal = detail::get_or(o, "blend_normal", cfg.oracle.blend_normal);
            cfg.oracle.geom_scale = detail::get_or(o, "geom_scale", cfg.oracle.geom_scale);
            if (o.contains("grid")) {
                const Json& g = o["grid"];
                cfg.oracle.grid = linspace(detail::get_or(g, "min", 0.0),
                                           detail::get_or(g, "max", 0.04),
                                           detail::get_or(g, "k", 100));
            }
            if (o.contains("ranges")) {
                cfg.ranges.low = detail::get_vec(o["ranges"], "low", cfg.ranges.low);
                cfg.ranges.high = detail::get_vec(o["ranges"], "high", cfg.ranges.high);
            }
        }
        if (j.contains("data")) {
            cfg.n_train = detail::get_or(j["data"], "n_train", cfg.n_train);
            cfg.n_holdout = detail::get_or(j["data"], "n_holdout", cfg.n_holdout);
        }
        if (j.contains("surrogate")) {
            const Json& s = j["surrogate"];
            cfg.surrogate.ensemble_size = detail::get_or(s, "T", cfg.surrogate.ensemble_size);
            cfg.surrogate.member.feature_dim =
                detail::get_or(s, "feature_dim", cfg.surrogate.member.feature_dim);
            cfg.surrogate.member.ridge = detail::get_or(s, "ridge", cfg.surrogate.member.ridge);
            cfg.surrogate.member.lengthscale =
                detail::get_or(s, "lengthscale", cfg.surrogate.member.lengthscale);
            cfg.surrogate.sigma_floor = detail::get_or(s, "sigma_floor", cfg.surrogate.sigma_floor);
            cfg.surrogate.kernel_scale =
                detail::get_or(s, "kernel_scale", cfg.surrogate.kernel_scale);
            cfg.surrogate.jitter_base = detail::get_or(s, "jitter_base", cfg.surrogate.jitter_base);
            cfg.surrogate.target_condition =
                detail::get_or(s, "target_condition", cfg.surrogate.target_condition);
            if (s.contains("gamma")) {
                if (s["gamma"].is_string()) {
                    if (s["gamma"].get<std::string>() != "fit")
                        throw ConfigError("surrogate.gamma must be a number or \"fit\"");
                } else {
                    cfg.surrogate.gamma_pin = s["gamma"].get<double>();
                }
            }
        }
        if (j.contains("pso")) {
            const Json& p = j["pso"];
            cfg.pso.swarm_size = detail::get_or(p, "swarm_size", cfg.pso.swarm_size);
            cfg.pso.c1 = detail::get_or(p, "c1", cfg.pso.c1);
            cfg.pso.c2 = detail::get_or(p, "c2", cfg.pso.c2);
            cfg.pso.w = detail::get_or(p, "w", cfg.pso.w);
            cfg.pso.alpha = detail::get_or(p, "alpha", cfg.pso.alpha);
            cfg.pso.max_iters = detail::get_or(p, "max_iters", cfg.pso.max_iters);
            cfg.pso.lambda = detail::get_or(p, "lambda", cfg.pso.lambda);
            cfg.pso.t_stabilizer = detail::get_or(p, "t_stabilizer", cfg.pso.t_stabilizer);
        }
        if (j.contains("chain")) {
            const Json& c = j["chain"];
            cfg.chain.burn_in = detail::get_or(c, "burn_in", cfg.chain.burn_in);
            cfg.chain.n_keep = detail::get_or(c, "n_keep", cfg.chain.n_keep);
            if (c.contains("psi") && !c["psi"].is_null()) cfg.chain.psi = c["psi"].get<double>();
            cfg.chain.sigma_q_scale = detail::get_or(c, "sigma_q_scale", cfg.chain.sigma_q_scale);
            cfg.chain.alpha_prior = detail::get_or(c, "alpha_prior", cfg.chain.alpha_prior);
            cfg.chain.max_resample = detail::get_or(c, "max_resample", cfg.chain.max_resample);
        }
        if (j.contains("likelihood"))
            cfg.n_mc = detail::get_or(j["likelihood"], "n_mc", cfg.n_mc);
        if (j.contains("ga")) {
            const Json& g = j["ga"];
            cfg.ga.population = detail::get_or(g, "population", cfg.ga.population);
            cfg.ga.generations = detail::get_or(g, "generations", cfg.ga.generations);
            cfg.ga.crossover_rate = detail::get_or(g, "crossover_rate", cfg.ga.crossover_rate);
            cfg.ga.mutation_rate = detail::get_or(g, "mutation_rate", cfg.ga.mutation_rate);
            cfg.ga.mutation_scale = detail::get_or(g, "mutation_scale", cfg.ga.mutation_scale);
            cfg.ga.elitism = detail::get_or(g, "elitism", cfg.ga.elitism);
        }
        if (j.contains("benchmark")) {
            const Json& b = j["benchmark"];
            cfg.benchmark.n_targets = detail::get_or(b, "n_targets", cfg.benchmark.n_targets);
            cfg.benchmark.designs_per_target =
                detail::get_or(b, "designs_per_target", cfg.benchmark.designs_per_target);
            cfg.benchmark.tolerance_fraction =
                detail::get_or(b, "tolerance_fraction", cfg.benchmark.tolerance_fraction);
        }
        if (j.contains("seeds")) {
            const Json& s = j["seeds"];
            cfg.seeds.data = detail::get_or<std::uint64_t>(s, "data", cfg.seeds.data);
            cfg.seeds.train = detail::get_or<std::uint64_t>(s, "train", cfg.seeds.train);
            cfg.seeds.design = detail::get_or<std::uint64_t>(s, "design", cfg.seeds.design);
        }
        if (j.contains("paths")) {
            const Json& p = j["paths"];
            cfg.paths.dataset_dir = detail::get_or<std::string>(p, "dataset_dir", cfg.paths.dataset_dir);
            cfg.paths.model = detail::get_or<std::string>(p, "model", cfg.paths.model);
            cfg.paths.target = detail::get_or<std::string>(p, "target", cfg.paths.target);
            cfg.paths.out_dir = detail::get_or<std::string>(p, "out_dir", cfg.paths.out_dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    try {
        cfg.oracle.validate();
        cfg.ranges.validate();
        cfg.pso.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid config values: ") + e.what());
    }
    if (cfg.n_train < 0 || cfg.n_holdout < 0) throw ConfigError("data counts must be >= 0");
    if (cfg.n_mc < 1) throw ConfigError("likelihood.n_mc must be >= 1");
    if (cfg.surrogate.ensemble_size < 2) throw ConfigError("surrogate.T must be >= 2");
    if (cfg.chain.burn_in < 0 || cfg.chain.n_keep < 1)
        throw ConfigError("chain.burn_in >= 0 and chain.n_keep >= 1 required");
    return cfg;
}

/// Applies one `name=value` override to seeds.{data,train,design}.
inline void apply_seed_override(RunConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("seed override must be NAME=VALUE: " + spec);
    const std::string name = spec.substr(0, eq);
    std::uint64_t value = 0;
    try {
        value = std::stoull(spec.substr(eq + 1));
    } catch (const std::exception&) {
        throw ConfigError("seed override value is not an integer: " + spec);
    }
    if (name == "data")
        cfg.seeds.data = value;
    else if (name == "train")
        cfg.seeds.train = value;
    else if (name == "design")
        cfg.seeds.design = value;
    else
        throw ConfigError("unknown seed name '" + name + "' (expected data|train|design)");
    cfg.raw["seeds"][name] = value;
}

/// Chain configuration resolved against dataset statistics.
inline ChainConfig make_chain_config(const ChainSettings& settings, const Vec& design_mean,
                                     const Vec& design_std) {
    ChainConfig cc;
    cc.burn_in = settings.burn_in;
    cc.n_keep = settings.n_keep;
    cc.psi = settings.psi.value_or(0.0);
    cc.sigma_q_init = settings.sigma_q_scale * design_std;
    cc.prior_low = Vec::Zero(design_mean.size());
    cc.prior_high = design_mean + settings.alpha_prior * design_std;
    cc.max_resample = settings.max_resample;
    return cc;
}

/// GA configuration sharing the PSO search box and training gene scales.
inline GaConfig make_ga_config(const GaSettings& settings, double alpha, const Vec& design_mean,
                               const Vec& design_std) {
    GaConfig gc;
    gc.population = settings.population;
    gc.generations = settings.generations;
    gc.crossover_rate = settings.crossover_rate;
    gc.mutation_rate = settings.mutation_rate;
    gc.mutation_scale = settings.mutation_scale;
    gc.elitism = settings.elitism;
    gc.low = (design_mean - alpha * design_std).cwiseMax(0.0);
    gc.high = design_mean + alpha * design_std;
    gc.gene_std = design_std;
    return gc;
}

}  // namespace guide
