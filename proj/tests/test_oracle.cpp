#include <catch2/catch_amalgamated.hpp>

#include "guide/oracle.hpp"
#include "test_util.hpp"

using namespace guide;

TEST_CASE("toy response anchors at the origin and fails to zero", "[oracle]") {
    const OracleConfig cfg;
    const DesignVector x = test::valid_design();
    const ResponseCurve curve = toy_response(x, cfg);
    CHECK(curve.values[0] == 0.0);

    // blended failure strain g * (dy + dd1 + dd2)
    const double w = cfg.blend_normal;
    const double fail = cfg.geom_scale * ((w * x[2] + (1 - w) * x[7]) +
                                          (w * x[3] + (1 - w) * x[8]) +
                                          (w * x[4] + (1 - w) * x[9]));
    for (Eigen::Index i = 0; i < curve.size(); ++i)
        if (curve.grid[i] >= fail) CHECK(curve.values[i] == 0.0);
}

TEST_CASE("toy response hits the blended yield point exactly", "[oracle]") {
    OracleConfig cfg;
    const DesignVector x = test::valid_design();
    const double w = cfg.blend_normal;
    const double sy = w * x[0] + (1 - w) * x[5];
    const double dy = w * x[2] + (1 - w) * x[7];
    // put the yield strain on the sampling grid so no interpolation is involved
    cfg.grid = Vec(3);
    cfg.grid << 0.0, cfg.geom_scale * dy, 0.04;
    const ResponseCurve curve = toy_response(x, cfg);
    CHECK(curve.values[1] == Catch::Approx(sy).epsilon(1e-12));
}

TEST_CASE("toy response rejects invalid designs", "[oracle]") {
    OracleConfig cfg;
    DesignVector x = test::valid_design();
    x[0] = -1.0;
    CHECK_THROWS_AS(toy_response(x, cfg), InfeasibleDesign);
}

TEST_CASE("toy response is continuous in the design", "[oracle]") {
    const OracleConfig cfg;
    Rng rng(31);
    const ParameterRanges ranges = default_parameter_ranges();
    for (int trial = 0; trial < 20; ++trial) {
        const DesignVector x = sample_valid_design(ranges, rng);
        DesignVector y = x;
        for (Eigen::Index j = 0; j < 10; ++j) y[j] *= 1.0 + 1e-9;
        if (!check_design_constraints(y)) continue;
        const Vec a = toy_response(x, cfg).values;
        const Vec b = toy_response(y, cfg).values;
        REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + a.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("dataset generation is reproducible and respects constraints", "[oracle]") {
    const OracleConfig cfg;
    const ParameterRanges ranges = default_parameter_ranges();
    const Dataset a = generate_dataset(64, ranges, cfg, 99);
    const Dataset b = generate_dataset(64, ranges, cfg, 99);
    REQUIRE(a.designs == b.designs);
    REQUIRE(a.responses == b.responses);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        REQUIRE(check_design_constraints(a.designs.row(i).transpose()));
        CHECK(a.responses(i, 0) == 0.0);
    }
    const Dataset c = generate_dataset(64, ranges, cfg, 100);
    CHECK(a.designs != c.designs);
}

TEST_CASE("dataset generation hits the reference training size", "[oracle]") {
    GenerationStats stats;
    const Dataset ds = generate_dataset(1669, default_parameter_ranges(), OracleConfig{}, 1, &stats);
    CHECK(ds.rows() == 1669);
    CHECK(stats.attempts >= stats.rows);
    CHECK(stats.rejection_rate() < 0.999);
}

TEST_CASE("infeasible ranges abort with RangesInfeasible", "[oracle]") {
    // hardening slope always far above the elastic slope
    ParameterRanges r;
    r.low.resize(10);
    r.high.resize(10);
    for (int mode = 0; mode < 2; ++mode) {
        const int o = 5 * mode;
        r.low[o] = 1.0;      r.high[o] = 2.0;       // sigma_y
        r.low[o + 1] = 1000; r.high[o + 1] = 2000;  // dsigma_1
        r.low[o + 2] = 1.0;  r.high[o + 2] = 2.0;   // delta_y
        r.low[o + 3] = 1e-4; r.high[o + 3] = 2e-4;  // ddelta_1
        r.low[o + 4] = 1e-4; r.high[o + 4] = 2e-4;  // ddelta_2
    }
    CHECK_THROWS_AS(generate_dataset(4, r, OracleConfig{}, 7), RangesInfeasible);
}

TEST_CASE("oracle feasibility round-trips held-out rows", "[oracle]") {
    const OracleConfig cfg;
    const Dataset ds = generate_dataset(32, default_parameter_ranges(), cfg, 5);
    for (Eigen::Index i = 0; i < 8; ++i) {
        TargetSpec target;
        target.target.grid = ds.grid;
        target.target.values = ds.responses.row(i).transpose();
        const double peak = target.target.values.maxCoeff();
        target.tolerance = Vec::Constant(ds.n_points(), 0.10 * peak);
        CHECK(check_feasible(ds.designs.row(i).transpose(), target, cfg));
    }
}

TEST_CASE("feasibility with exact match and infinite tolerance", "[oracle]") {
    const OracleConfig cfg;
    const DesignVector x = test::valid_design();
    TargetSpec target;
    target.target = toy_response(x, cfg);
    SECTION("zero tolerance on its own curve") {
        target.tolerance = Vec::Zero(target.size());
        CHECK(check_feasible(x, target, cfg));
    }
    SECTION("all-infinite tolerance accepts any valid design") {
        target.tolerance = Vec::Constant(target.size(), kInf);
        Rng rng(17);
        const ParameterRanges ranges = default_parameter_ranges();
        for (int i = 0; i < 10; ++i)
            CHECK(check_feasible(sample_valid_design(ranges, rng), target, cfg));
    }
}

TEST_CASE("feasibility is monotone in tolerance", "[oracle]") {
    const OracleConfig cfg;
    Rng rng(23);
    const ParameterRanges ranges = default_parameter_ranges();
    for (int trial = 0; trial < 50; ++trial) {
        const DesignVector x = sample_valid_design(ranges, rng);
        const DesignVector y = sample_valid_design(ranges, rng);
        TargetSpec target;
        target.target = toy_response(x, cfg);
        const double eps = rng.uniform(1.0, 50.0);
        target.tolerance = Vec::Constant(target.size(), eps);
        const bool tight = check_feasible(y, target, cfg);
        target.tolerance *= 2.0;
        const bool loose = check_feasible(y, target, cfg);
        if (tight) REQUIRE(loose);
    }
}

TEST_CASE("masked points are excluded from feasibility", "[oracle]") {
    const OracleConfig cfg;
    const DesignVector x = test::valid_design();
    TargetSpec target;
    target.target = toy_response(x, cfg);
    target.target.values[5] += 100.0;  // force a violation at point 5
    target.tolerance = Vec::Constant(target.size(), 1.0);
    CHECK_FALSE(check_feasible(x, target, cfg));
    std::vector<bool> mask(static_cast<std::size_t>(target.size()), false);
    mask[5] = true;
    target.mask = mask;
    CHECK(check_feasible(x, target, cfg));
}
