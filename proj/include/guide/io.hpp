#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "guide/core.hpp"
#include "guide/mcmc.hpp"
#include "guide/metrics.hpp"
#include "guide/surrogate.hpp"

namespace guide {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; infinities serialize as "inf"/"-inf".
inline std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError("parse_double: cannot parse '" + std::string(s) + "'");
    return v;
}

/// FNV-1a over a canonical JSON dump; embedded in artifacts for provenance.
inline std::string config_hash(const Json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline Json load_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace detail

inline void write_json(const std::filesystem::path& path, const Json& j, int indent = 2) {
    detail::open_out(path) << j.dump(indent) << "\n";
}

// ---------------------------------------------------------------- datasets

/// One CSV per split: header x_1..x_d,y_1..y_k, one row per design.
inline void save_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
    auto out = detail::open_out(path);
    const Eigen::Index d = ds.n_params(), k = ds.n_points();
    for (Eigen::Index j = 0; j < d; ++j) out << "x_" << (j + 1) << ",";
    for (Eigen::Index u = 0; u < k; ++u) out << "y_" << (u + 1) << (u + 1 < k ? "," : "\n");
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out << fmt_double(ds.designs(i, j)) << ",";
        for (Eigen::Index u = 0; u < k; ++u)
            out << fmt_double(ds.responses(i, u)) << (u + 1 < k ? "," : "\n");
    }
}

/// Sidecar grid manifest shared by the splits in one dataset directory.
inline void save_grid_manifest(const std::filesystem::path& path, const Vec& grid,
                               const std::string& cfg_hash = {}) {
    Json j;
    j["k"] = grid.size();
    j["grid_min"] = grid[0];
    j["grid_max"] = grid[grid.size() - 1];
    if (!cfg_hash.empty()) j["config_hash"] = cfg_hash;
    detail::open_out(path) << j.dump(2) << "\n";
}

inline Vec load_grid_manifest(const std::filesystem::path& path) {
    const Json j = detail::load_json(path);
    if (!j.contains("k") || !j.contains("grid_min") || !j.contains("grid_max"))
        throw IoError("grid manifest missing k/grid_min/grid_max: " + path.string());
    return linspace(j["grid_min"].get<double>(), j["grid_max"].get<double>(), j["k"].get<int>());
}

inline Dataset load_dataset_csv(const std::filesystem::path& csv_path, const Vec& grid) {
    const std::string text = detail::read_file(csv_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset CSV: " + csv_path.string());
    const auto header = detail::split_csv_line(line);
    Eigen::Index d = 0;
    for (const auto& h : header)
        if (h.rfind("x_", 0) == 0) ++d;
    const auto k = static_cast<Eigen::Index>(header.size()) - d;
    if (d < 1 || k != grid.size())
        throw IoError("dataset CSV header does not match manifest: " + csv_path.string());

    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (static_cast<Eigen::Index>(fields.size()) != d + k)
            throw IoError("dataset CSV row width mismatch: " + csv_path.string());
        for (const auto& f : fields) values.push_back(parse_double(f));
        ++rows;
    }
    if (rows == 0) throw IoError("dataset CSV has no rows: " + csv_path.string());
    Dataset ds;
    ds.designs.resize(rows, d);
    ds.responses.resize(rows, k);
    ds.grid = grid;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) ds.designs(i, j) = values[static_cast<std::size_t>(i * (d + k) + j)];
        for (Eigen::Index u = 0; u < k; ++u)
            ds.responses(i, u) = values[static_cast<std::size_t>(i * (d + k) + d + u)];
    }
    ds.norm = compute_norm_stats(ds.designs, ds.grid);
    return ds;
}

// ----------------------------------------------------------------- targets

inline void save_target(const std::filesystem::path& path, const TargetSpec& target) {
    Json j;
    j["grid"] = std::vector<double>(target.target.grid.data(),
                                    target.target.grid.data() + target.target.grid.size());
    j["target"] = std::vector<double>(target.target.values.data(),
                                      target.target.values.data() + target.target.values.size());
    Json tol = Json::array();
    for (Eigen::Index u = 0; u < target.tolerance.size(); ++u) {
        if (std::isinf(target.tolerance[u]))
            tol.push_back("inf");
        else
            tol.push_back(target.tolerance[u]);
    }
    j["tolerance"] = std::move(tol);
    if (target.mask) j["mask"] = *target.mask;
    detail::open_out(path) << j.dump(2) << "\n";
}

inline TargetSpec load_target(const std::filesystem::path& path) {
    const Json j = detail::load_json(path);
    for (const char* key : {"grid", "target", "tolerance"})
        if (!j.contains(key)) throw IoError(std::string("target JSON missing '") + key + "'");
    TargetSpec t;
    const auto grid = j["grid"].get<std::vector<double>>();
    const auto vals = j["target"].get<std::vector<double>>();
    t.target.grid = Eigen::Map<const Vec>(grid.data(), static_cast<Eigen::Index>(grid.size()));
    t.target.values = Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    t.tolerance.resize(static_cast<Eigen::Index>(j["tolerance"].size()));
    Eigen::Index u = 0;
    for (const auto& e : j["tolerance"]) {
        if (e.is_string())
            t.tolerance[u++] = parse_double(e.get<std::string>());
        else
            t.tolerance[u++] = e.get<double>();
    }
    if (j.contains("mask")) t.mask = j["mask"].get<std::vector<bool>>();
    t.validate();
    return t;
}

// ------------------------------------------------------------------ models

inline void save_model(const std::filesystem::path& path, const EnsembleModel& model,
                       const std::string& cfg_hash = {}) {
    Json j;
    j["format"] = "guide-model-v1";
    if (!cfg_hash.empty()) j["config_hash"] = cfg_hash;
    j["gamma"] = model.gamma;
    j["sigma_floor"] = model.sigma_floor;
    j["jitter_base"] = model.jitter_base;
    j["target_condition"] = model.target_condition;
    j["kernel_scale"] = model.kernel_scale;
    j["member_config"] = {{"feature_dim", model.member_config.feature_dim},
                          {"ridge", model.member_config.ridge},
                          {"lengthscale", model.member_config.lengthscale}};
    j["grid"] = std::vector<double>(model.grid.data(), model.grid.data() + model.grid.size());
    j["norm"] = {{"mean", std::vector<double>(model.norm.mean.data(),
                                              model.norm.mean.data() + model.norm.mean.size())},
                 {"std", std::vector<double>(model.norm.std.data(),
                                             model.norm.std.data() + model.norm.std.size())}};
    Json members = Json::array();
    for (const auto& m : model.members) {
        Json jm;
        jm["omega"] = std::vector<double>(m.omega.data(), m.omega.data() + m.omega.size());
        jm["omega_rows"] = m.omega.rows();
        jm["phase"] = std::vector<double>(m.phase.data(), m.phase.data() + m.phase.size());
        jm["weights"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
        members.push_back(std::move(jm));
    }
    j["members"] = std::move(members);
    detail::open_out(path) << j.dump() << "\n";
}

inline EnsembleModel load_model(const std::filesystem::path& path) {
    const Json j = detail::load_json(path);
    if (!j.contains("format") || j["format"].get<std::string>() != "guide-model-v1")
        throw IoError("unsupported model format in " + path.string());
    EnsembleModel model;
    model.gamma = j["gamma"].get<double>();
    model.sigma_floor = j["sigma_floor"].get<double>();
    model.jitter_base = j["jitter_base"].get<double>();
    model.target_condition = j["target_condition"].get<double>();
    model.kernel_scale = j["kernel_scale"].get<double>();
    model.member_config.feature_dim = j["member_config"]["feature_dim"].get<int>();
    model.member_config.ridge = j["member_config"]["ridge"].get<double>();
    model.member_config.lengthscale = j["member_config"]["lengthscale"].get<double>();
    const auto grid = j["grid"].get<std::vector<double>>();
    model.grid = Eigen::Map<const Vec>(grid.data(), static_cast<Eigen::Index>(grid.size()));
    const auto mean = j["norm"]["mean"].get<std::vector<double>>();
    const auto sd = j["norm"]["std"].get<std::vector<double>>();
    model.norm.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    model.norm.std = Eigen::Map<const Vec>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    const Vec s_tilde = model.normalized_strain();
    for (const auto& jm : j["members"]) {
        RidgeMember m;
        const auto omega = jm["omega"].get<std::vector<double>>();
        const auto rows = jm["omega_rows"].get<Eigen::Index>();
        const auto cols = static_cast<Eigen::Index>(omega.size()) / rows;
        m.omega = Eigen::Map<const Mat>(omega.data(), rows, cols);
        const auto phase = jm["phase"].get<std::vector<double>>();
        const auto weights = jm["weights"].get<std::vector<double>>();
        m.phase = Eigen::Map<const Vec>(phase.data(), static_cast<Eigen::Index>(phase.size()));
        m.weights = Eigen::Map<const Vec>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        m.precompute_grid(s_tilde);
        model.members.push_back(std::move(m));
    }
    return model;
}

// ------------------------------------------------------- chains and designs

/// Chain trace as JSON Lines, one record per line.
inline void save_chain_trace(const std::filesystem::path& path,
                             const std::vector<ChainRecord>& records) {
    auto out = detail::open_out(path);
    for (const auto& r : records) {
        Json j;
        j["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
        j["likelihood"] = r.likelihood;
        j["accepted"] = r.accepted;
        j["iteration"] = r.iteration;
        out << j.dump() << "\n";
    }
}

/// Deduplicated designs ranked by likelihood (descending):
/// likelihood,multiplicity,x_1..x_d.
inline void save_designs_csv(const std::filesystem::path& path,
                             const std::vector<DesignVector>& designs,
                             const std::vector<double>& likelihoods,
                             const std::vector<int>& multiplicities) {
    auto out = detail::open_out(path);
    const Eigen::Index d = designs.empty() ? kTrilinearParams : designs.front().size();
    out << "likelihood,multiplicity";
    for (Eigen::Index j = 0; j < d; ++j) out << ",x_" << (j + 1);
    out << "\n";
    for (std::size_t i = 0; i < designs.size(); ++i) {
        out << fmt_double(likelihoods[i]) << "," << multiplicities[i];
        for (Eigen::Index j = 0; j < d; ++j) out << "," << fmt_double(designs[i][j]);
        out << "\n";
    }
}

/// Reads any CSV whose header contains x_1..x_d columns (design output files
/// or raw design tables); an optional likelihood column is returned when
/// present.
inline std::pair<std::vector<DesignVector>, std::vector<double>> load_designs_csv(
    const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty designs CSV: " + path.string());
    const auto header = detail::split_csv_line(line);
    std::vector<int> xcols;
    int lik_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].rfind("x_", 0) == 0) xcols.push_back(static_cast<int>(c));
        if (header[c] == "likelihood") lik_col = static_cast<int>(c);
    }
    if (xcols.empty()) throw IoError("designs CSV has no x_ columns: " + path.string());
    std::vector<DesignVector> designs;
    std::vector<double> likelihoods;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw IoError("designs CSV row width mismatch: " + path.string());
        DesignVector x(static_cast<Eigen::Index>(xcols.size()));
        for (std::size_t j = 0; j < xcols.size(); ++j)
            x[static_cast<Eigen::Index>(j)] = parse_double(fields[static_cast<std::size_t>(xcols[j])]);
        designs.push_back(std::move(x));
        if (lik_col >= 0) likelihoods.push_back(parse_double(fields[static_cast<std::size_t>(lik_col)]));
    }
    return {std::move(designs), std::move(likelihoods)};
}

inline void save_metrics_report(const std::filesystem::path& path, const MetricsReport& report,
                                const std::string& cfg_hash = {}) {
    Json j;
    j["feasibility_rate"] = report.feasibility_rate;
    j["vendi"] = report.vendi;
    j["knn_novelty"] = report.knn_novelty;
    if (report.pearson_r)
        j["pearson_r"] = *report.pearson_r;
    else
        j["pearson_r"] = nullptr;
    if (!cfg_hash.empty()) j["config_hash"] = cfg_hash;
    detail::open_out(path) << j.dump(2) << "\n";
}

}  // namespace guide
