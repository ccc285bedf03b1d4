#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "guide/core.hpp"
#include "guide/oracle.hpp"
#include "guide/rng.hpp"
#include "guide/surrogate.hpp"

namespace guide::test {

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("guide_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

/// A reference-valid trilinear design (hardening slope well below elastic).
inline DesignVector valid_design() {
    DesignVector x(kTrilinearParams);
    x << 100.0, 10.0, 0.001, 0.001, 0.005,  // normal mode
        80.0, 8.0, 0.002, 0.002, 0.008;     // shear mode
    return x;
}

/// Random symmetric positive-definite matrix with a given condition number.
inline Mat random_spd(Eigen::Index k, double condition, Rng& rng) {
    Mat a(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) a(i, j) = rng.normal();
    const Eigen::HouseholderQR<Mat> qr(a);
    const Mat q = qr.householderQ();
    Vec eigs(k);
    for (Eigen::Index i = 0; i < k; ++i)
        eigs[i] = 1.0 + (condition - 1.0) * static_cast<double>(i) / std::max<double>(1, k - 1);
    return q * eigs.asDiagonal() * q.transpose();
}

/// Small seeded training fixture shared by surrogate/likelihood/search tests.
struct SmallModelFixture {
    OracleConfig oracle;
    Dataset train;
    Dataset holdout;
    EnsembleModel model;

    SmallModelFixture() {
        const ParameterRanges ranges = default_parameter_ranges();
        train = generate_dataset(300, ranges, oracle, 11);
        holdout = generate_dataset(60, ranges, oracle, 12);
        MemberConfig mc;
        mc.feature_dim = 128;
        mc.ridge = 1e-3;
        model = train_ensemble(train, 8, mc, 21);
    }

    static const SmallModelFixture& instance() {
        static SmallModelFixture fixture;
        return fixture;
    }

    TargetSpec target_from_row(Eigen::Index row, double tol_fraction = 0.10) const {
        TargetSpec t;
        t.target.grid = holdout.grid;
        t.target.values = holdout.responses.row(row).transpose();
        t.tolerance = Vec::Constant(t.target.values.size(),
                                    tol_fraction * t.target.values.maxCoeff());
        return t;
    }
};

}  // namespace guide::test
