#include <catch2/catch_amalgamated.hpp>

#include "guide/core.hpp"
#include "guide/rng.hpp"
#include "test_util.hpp"

using namespace guide;

TEST_CASE("design constraints accept the reference trilinear shape", "[core]") {
    // elastic slope 1e5, hardening slope 1e4 in both modes
    DesignVector x(10);
    x << 100.0, 10.0, 0.001, 0.001, 0.005, 100.0, 10.0, 0.001, 0.001, 0.005;
    CHECK(check_design_constraints(x));
}

TEST_CASE("design constraints reject negatives and boundary equality", "[core]") {
    DesignVector x = test::valid_design();
    SECTION("negative entry") {
        x[4] = -0.1;
        CHECK_FALSE(check_design_constraints(x));
    }
    SECTION("hardening slope exactly equal to elastic slope") {
        // sigma_y/delta_y = 1e5; set dsigma_1/ddelta_1 = 1e5 exactly
        x[1] = 100.0;
        x[3] = 0.001;
        CHECK_FALSE(check_design_constraints(x));
    }
    SECTION("dimension mismatch") {
        CHECK_THROWS_AS(check_design_constraints(Vec::Ones(9)), InvalidDimension);
    }
}

TEST_CASE("design constraints are scale consistent per mode", "[core]") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        DesignVector x(10);
        for (int j = 0; j < 10; ++j) x[j] = rng.uniform(1e-4, 10.0);
        const bool verdict = check_design_constraints(x);
        const double c = rng.uniform(0.1, 50.0);
        DesignVector scaled = x;
        for (const int j : {0, 1, 2, 3}) scaled[j] *= c;  // all four slope quantities, one mode
        CHECK(check_design_constraints(scaled) == verdict);
    }
}

TEST_CASE("zscore normalization centers and scales", "[core]") {
    NormStats stats;
    stats.mean = Vec::LinSpaced(4, 1.0, 4.0);
    stats.std = Vec::LinSpaced(4, 0.5, 2.0);
    CHECK(zscore_normalize(stats.mean, stats).isZero(0.0));
    CHECK(zscore_normalize(stats.mean + stats.std, stats).isApprox(Vec::Ones(4)));
}

TEST_CASE("zscore round-trip is an algebraic inverse", "[core]") {
    Rng rng(3);
    NormStats stats;
    stats.mean = rng.normal_vector(11) * 10.0;
    stats.std = rng.normal_vector(11).cwiseAbs() + Vec::Constant(11, 0.1);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec q = rng.normal_vector(11) * 5.0;
        const Vec back = zscore_denormalize(zscore_normalize(q, stats), stats);
        REQUIRE((back - q).norm() <= 1e-12 * (1.0 + q.norm()));
    }
}

TEST_CASE("zscore rejects degenerate stats", "[core]") {
    NormStats stats;
    stats.mean = Vec::Zero(3);
    stats.std = Vec::Ones(3);
    stats.std[1] = 0.0;
    CHECK_THROWS_AS(zscore_normalize(Vec::Zero(3), stats), DegenerateStats);
    stats.std[1] = -1.0;
    CHECK_THROWS_AS(zscore_denormalize(Vec::Zero(3), stats), DegenerateStats);
    stats.std[1] = 1.0;
    CHECK_THROWS_AS(zscore_normalize(Vec::Zero(4), stats), InvalidDimension);
}

namespace {

TargetSpec make_target(const Vec& values, const Vec& tolerance) {
    TargetSpec t;
    t.target.grid = Vec::LinSpaced(values.size(), 0.0, 1.0);
    t.target.values = values;
    t.tolerance = tolerance;
    return t;
}

}  // namespace

TEST_CASE("tolerance bounds center the box on y* - mu", "[core]") {
    SECTION("target equals mean") {
        const Vec mu = Vec::Constant(5, 2.0);
        const auto [a, b] = tolerance_bounds(make_target(mu, Vec::Ones(5)), mu);
        CHECK(a.isApprox(Vec::Constant(5, -1.0)));
        CHECK(b.isApprox(Vec::Constant(5, 1.0)));
    }
    SECTION("direct arithmetic") {
        Vec values(2), mu(2), tol(2);
        values << 2.0, 0.0;
        mu << 0.0, 0.0;
        tol << 1.0, 1.0;
        const auto [a, b] = tolerance_bounds(make_target(values, tol), mu);
        CHECK(a[0] == 1.0);
        CHECK(b[0] == 3.0);
        CHECK(a[1] == -1.0);
        CHECK(b[1] == 1.0);
    }
    SECTION("infinite tolerance yields an unbounded coordinate") {
        Vec tol = Vec::Ones(3);
        tol[1] = kInf;
        const auto [a, b] = tolerance_bounds(make_target(Vec::Zero(3), tol), Vec::Zero(3));
        CHECK(a[1] == -kInf);
        CHECK(b[1] == kInf);
        CHECK(std::isfinite(a[0]));
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(tolerance_bounds(make_target(Vec::Zero(3), Vec::Ones(3)), Vec::Zero(4)),
                        InvalidDimension);
    }
}

TEST_CASE("tolerance bounds keep a <= b for nonnegative tolerances", "[core]") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec values = rng.normal_vector(8) * 100.0;
        const Vec mu = rng.normal_vector(8) * 100.0;
        Vec tol = rng.normal_vector(8).cwiseAbs();
        if (trial % 3 == 0) tol[trial % 8] = kInf;
        const auto [a, b] = tolerance_bounds(make_target(values, tol), mu);
        for (Eigen::Index u = 0; u < 8; ++u) REQUIRE(a[u] <= b[u]);
    }
}

TEST_CASE("target spec validation", "[core]") {
    TargetSpec t = make_target(Vec::Zero(4), Vec::Ones(4));
    CHECK_NOTHROW(t.validate());
    CHECK(t.well_posed());

    SECTION("all-infinite tolerance is valid but not well posed") {
        t.tolerance = Vec::Constant(4, kInf);
        CHECK_NOTHROW(t.validate());
        CHECK_FALSE(t.well_posed());
    }
    SECTION("mask excludes points") {
        t.mask = std::vector<bool>{true, true, true, false};
        CHECK(t.constrains(3));
        CHECK_FALSE(t.constrains(0));
    }
    SECTION("negative tolerance rejected") {
        t.tolerance[2] = -1.0;
        CHECK_THROWS_AS(t.validate(), InvalidInput);
    }
    SECTION("non-increasing grid rejected") {
        t.target.grid[2] = t.target.grid[1];
        CHECK_THROWS_AS(t.validate(), InvalidInput);
    }
}

TEST_CASE("norm stats cover design columns plus strain", "[core]") {
    Rng rng(9);
    Mat designs(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) designs(i, j) = rng.uniform(0.0, 10.0);
    const Vec grid = linspace(0.0, 0.04, 25);
    const NormStats stats = compute_norm_stats(designs, grid);
    REQUIRE(stats.mean.size() == 4);
    CHECK(stats.mean[3] == Catch::Approx(0.02));
    CHECK((stats.std.array() > 0.0).all());
}
