#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfl/fractal_sets.hpp"

using namespace sfl;

TEST(Cantor, DepthZeroKeepsEndQuarters) {
    const InitialSet c = make_cantor(0.25, 0);
    ASSERT_EQ(c.points.size(), 4u);
    EXPECT_DOUBLE_EQ(c.points[0][0], 0.0);
    EXPECT_DOUBLE_EQ(c.points[1][0], 0.25);
    EXPECT_DOUBLE_EQ(c.points[2][0], 0.75);
    EXPECT_DOUBLE_EQ(c.points[3][0], 1.0);
}

TEST(Cantor, TheoreticalDimension) {
    EXPECT_DOUBLE_EQ(*make_cantor(0.25, 3).theoretical_dim, 0.5);
    EXPECT_NEAR(*make_cantor(1.0 / 3.0, 3).theoretical_dim, std::log(2.0) / std::log(3.0), 1e-15);
    EXPECT_NEAR(*make_cantor(1.0 / 3.0, 3).theoretical_dim, 0.6309, 1e-4);
}

TEST(Cantor, PointCountAndRange) {
    for (int depth = 0; depth <= 12; ++depth) {
        const InitialSet c = make_cantor(0.25, depth);
        EXPECT_EQ(c.points.size(), std::size_t{1} << (depth + 2));
        EXPECT_TRUE(std::is_sorted(c.points.begin(), c.points.end(),
                                   [](const Vec& a, const Vec& b) { return a[0] < b[0]; }));
        for (const auto& p : c.points) {
            EXPECT_GE(p[0], 0.0);
            EXPECT_LE(p[0], 1.0);
        }
        EXPECT_DOUBLE_EQ(c.finest_scale, std::pow(0.25, depth + 1));
    }
}

TEST(Cantor, RejectsBadArguments) {
    EXPECT_THROW(make_cantor(0.5, 2), Error);
    EXPECT_THROW(make_cantor(0.0, 2), Error);
    EXPECT_THROW(make_cantor(0.25, 17), Error);
    EXPECT_THROW(make_cantor(0.25, 5, {.max_depth = 4}), Error);
}

TEST(ReciprocalPowers, Enumeration) {
    const InitialSet s = make_reciprocal_powers(1.0, 3);
    std::vector<double> xs;
    for (const auto& p : s.points) xs.push_back(p[0]);
    std::sort(xs.begin(), xs.end());
    ASSERT_EQ(xs.size(), 4u);
    EXPECT_DOUBLE_EQ(xs[0], 0.0);
    EXPECT_DOUBLE_EQ(xs[1], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(xs[2], 0.5);
    EXPECT_DOUBLE_EQ(xs[3], 1.0);
    EXPECT_DOUBLE_EQ(*make_reciprocal_powers(1.0, 10).theoretical_dim, 0.5);
    EXPECT_DOUBLE_EQ(*make_reciprocal_powers(2.0, 10).theoretical_dim, 1.0 / 3.0);
    EXPECT_THROW(make_reciprocal_powers(1.0, 1), Error);
}

TEST(ReciprocalPowers, StrictlyDecreasingWithAccumulationPoint) {
    const InitialSet s = make_reciprocal_powers(2.0, 500);
    std::vector<double> xs;
    for (const auto& p : s.points) xs.push_back(p[0]);
    std::sort(xs.begin(), xs.end(), std::greater<>());
    for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_LT(xs[i], xs[i - 1]);
    EXPECT_EQ(xs.back(), 0.0);
}

TEST(Graph, IdentityEvolutionIsTimeAxisSegment) {
    const SpaceTimeSet s = make_graph(make_singleton(Vec{0.0}), identity_bundle(1.0));
    for (double t : {0.0, 0.3, 1.0}) {
        const auto sec = temporal_section(s, t);
        ASSERT_EQ(sec.size(), 1u);
        EXPECT_EQ(sec[0][0], 0.0);
    }
}

TEST(Graph, QuadraticContractionMapsReciprocalsToSquares) {
    const InitialSet s0 = make_reciprocal_powers(1.0, 50);
    const SpaceTimeSet s = make_graph(s0, quadratic_contraction_bundle());
    const auto at0 = temporal_section(s, 0.0);
    for (std::size_t i = 0; i < at0.size(); ++i) EXPECT_EQ(at0[i][0], s0.points[i][0]);
    const auto at1 = temporal_section(s, 1.0);
    for (std::size_t i = 1; i < at1.size(); ++i) {
        const double n = double(i);
        EXPECT_NEAR(at1[i][0], 1.0 / (n * n), 1e-15);
    }
    EXPECT_EQ(at1[0][0], 0.0);
}

TEST(Graph, HolderDriftOverCantorAccepted) {
    const InitialSet s0 = embed(make_cantor(0.25, 10), 2);
    const SpaceTimeSet s = make_graph(s0, holder_drift_bundle(0.5), {.holder_samples = 100000, .seed = 7});
    ASSERT_NE(s.graph(), nullptr);
    EXPECT_EQ(s.graph()->bundle.holder_exponent, 0.5);
    EXPECT_EQ(s.graph()->bundle.holder_constant, 1.0);
}

TEST(Graph, SampledHolderConditionHasNoViolations) {
    // |t1^a - t2^a| <= |t1 - t2|^a on [0,1]; checked on 1e5 triples per exponent.
    for (double a : {0.25, 0.5, 0.75, 1.0}) {
        const InitialSet s0 = embed(make_cantor(0.25, 6), 2);
        const HolderReport rep = check_holder(s0, holder_drift_bundle(a), 100000, 11);
        EXPECT_GT(rep.checked, 99000u);
        EXPECT_EQ(rep.violations, 0u) << "alpha=" << a;
        EXPECT_LE(rep.worst_ratio, 1.0 + 1e-6);  // rounding at 1e-8 separations
    }
}

TEST(Graph, RejectsUnderstatedHolderExponent) {
    TrajectoryBundle b = holder_drift_bundle(0.5);
    b.holder_exponent = 1.0;  // t^(1/2) is not Lipschitz near 0
    try {
        make_graph(make_singleton(Vec{0.0, 0.0}), b);
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("worst pair"), std::string::npos);
    }
}

TEST(Graph, SectionLiesInProjection) {
    // Every section point Z(t, x) lies within the Hoelder modulus of the
    // projection sampled on a time grid.
    const InitialSet s0 = make_reciprocal_powers(1.0, 40);
    const SpaceTimeSet s = make_graph(s0, quadratic_contraction_bundle());
    const int steps = 200;
    std::vector<double> proj;
    for (int k = 0; k <= steps; ++k)
        for (const auto& p : temporal_section(s, double(k) / steps)) proj.push_back(p[0]);
    CounterRng rng(3, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform();
        for (const auto& p : temporal_section(s, t)) {
            double best = kInf;
            for (double q : proj) best = std::min(best, std::abs(q - p[0]));
            EXPECT_LE(best, 0.25 * (0.5 / steps) + 1e-15);
        }
    }
}

TEST(Product, SectionsFollowTimeFactor) {
    const InitialSet a = make_cantor(0.25, 4);
    const SpaceTimeSet s = make_product(TimeSet::interval(0.0, 0.5), a);
    EXPECT_TRUE(temporal_section(s, 0.9).empty());
    EXPECT_EQ(temporal_section(s, 0.25).size(), a.points.size());

    const SpaceTimeSet axis = make_product(TimeSet::interval(0.0, 1.0), make_singleton(Vec{0.0, 0.0}));
    EXPECT_EQ(temporal_section(axis, 0.7).size(), 1u);
}

TEST(Product, CantorTimeFactor) {
    const SpaceTimeSet s = make_product(TimeSet::from_set(make_cantor(0.25, 3)), make_cantor(0.25, 3));
    EXPECT_FALSE(temporal_section(s, 0.25).empty());
    EXPECT_TRUE(temporal_section(s, 0.5).empty());
    EXPECT_DOUBLE_EQ(*s.product()->time.theoretical_dim, 0.5);
}

TEST(Product, RejectsEmptyFactors) {
    InitialSet empty;
    EXPECT_THROW(make_product(TimeSet::interval(0, 1), empty), Error);
    EXPECT_THROW(TimeSet::sampled({}), Error);
}

TEST(Cloud, SnapToleranceIsHalfMedianSpacing) {
    std::vector<SpaceTimePoint> pts;
    for (int k = 0; k <= 10; ++k) pts.push_back({0.1 * k, Vec{double(k)}});
    const SpaceTimeSet c = make_cloud(pts, 1.0);
    EXPECT_NEAR(c.cloud()->snap_tolerance, 0.05, 1e-12);
    const auto sec = temporal_section(c, 0.31);
    ASSERT_EQ(sec.size(), 1u);
    EXPECT_EQ(sec[0][0], 3.0);
    EXPECT_TRUE(temporal_section(c, 0.35 + 1e-3).empty() || temporal_section(c, 0.35 + 1e-3).size() == 1u);
}

TEST(Export, CsvHeaders) {
    std::ostringstream a;
    write_csv(a, make_cantor(0.25, 0));
    EXPECT_EQ(a.str(), "x1\n0\n0.25\n0.75\n1\n");

    std::ostringstream b;
    write_csv(b, make_product(TimeSet::interval(0, 1), make_singleton(Vec{0.0, 0.0})), 3);
    EXPECT_EQ(b.str(), "t,x1,x2\n0,0,0\n0.5,0,0\n1,0,0\n");
}
