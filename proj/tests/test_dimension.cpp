#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sfl/dimension.hpp"

using namespace sfl;

namespace {

// Level-k intervals of the keep-1/4 Cantor construction on [0,1].
void cantor_intervals(double a, double len, int level, std::vector<std::pair<double, double>>& out) {
    if (level == 0) {
        out.emplace_back(a, a + len);
        return;
    }
    cantor_intervals(a, len / 4, level - 1, out);
    cantor_intervals(a + 3 * len / 4, len / 4, level - 1, out);
}

// Brute-force oracle: level-k intervals have length 4^-k and gaps of at
// least 2 * 4^-k, so the minimal eps-cover uses one box per interval that
// contains a point.
std::size_t oracle_cantor_count(const InitialSet& c, int k) {
    std::vector<std::pair<double, double>> iv;
    cantor_intervals(0.0, 1.0, k, iv);
    std::size_t occupied = 0;
    for (const auto& [lo, hi] : iv) {
        bool any = false;
        for (const auto& p : c.points) any = any || (p[0] >= lo - 1e-15 && p[0] <= hi + 1e-15);
        occupied += any;
    }
    return occupied;
}

std::vector<double> xs_of(const InitialSet& s) {
    std::vector<double> xs;
    for (const auto& p : s.points) xs.push_back(p[0]);
    return xs;
}

}  // namespace

TEST(BoxCount, EquispacedPoints) {
    const InitialSet s = make_segment(Vec{0.0}, Vec{1.0}, 1000);
    EXPECT_EQ(box_count(s.points, 0.1), 10u);
}

TEST(BoxCount, SinglePoint) {
    const std::vector<Vec> p{Vec{0.3, 0.7}};
    for (double eps : {1.0, 1e-3, 1e-9}) EXPECT_EQ(box_count(p, eps), 1u);
}

TEST(BoxCount, LargerThanDiameterIsOne) {
    EXPECT_EQ(box_count(make_cantor(0.25, 5).points, 2.0), 1u);
}

TEST(BoxCount, CantorMatchesIntervalOracle) {
    const InitialSet c = make_cantor(0.25, 12);
    for (int k = 0; k <= 8; ++k) {
        const std::size_t expect = oracle_cantor_count(c, k);
        EXPECT_EQ(expect, std::size_t{1} << k);
        EXPECT_EQ(box_count(c.points, std::pow(4.0, -k)), expect) << "k=" << k;
    }
    for (int k = 9; k <= 12; ++k) EXPECT_EQ(box_count(c.points, std::pow(4.0, -k)), std::size_t{1} << k);
}

TEST(BoxCount, GridCellsHaveDiameterEps) {
    // Two points at distance exactly eps along a diagonal never share a cell
    // of diameter eps unless they are its opposite corners.
    const std::vector<Vec> pts{Vec{0.0, 0.0}, Vec{0.3, 0.4}};
    EXPECT_EQ(box_count(pts, 0.49), 2u);
}

TEST(BoxDimension, Cantor) {
    const auto est = estimate_box_dimension(make_cantor(0.25, 12), power_ladder(4.0, 2, 10));
    EXPECT_NEAR(est.fitted_dim, 0.5, 0.05);
    EXPECT_LE(est.lower_proxy, est.fitted_dim + 1e-12);
    EXPECT_GE(est.upper_proxy, est.fitted_dim - 1e-12);
    EXPECT_EQ(est.method, DimensionMethod::grid_count);
}

TEST(BoxDimension, CantorThirdsAgainstSimilarityDimension) {
    const InitialSet c = make_cantor(1.0 / 3.0, 12);
    const auto est = estimate_box_dimension(c, power_ladder(3.0, 2, 11));
    EXPECT_NEAR(est.fitted_dim, *c.theoretical_dim, 0.02);
}

TEST(BoxDimension, ReciprocalPowers) {
    EXPECT_NEAR(estimate_box_dimension(make_reciprocal_powers(1.0, 10000), geometric_ladder(1e-2, 1e-6, 9)).fitted_dim,
                0.5, 0.05);
    EXPECT_NEAR(estimate_box_dimension(make_reciprocal_powers(2.0, 10000), geometric_ladder(1e-2, 1e-7, 9)).fitted_dim,
                1.0 / 3.0, 0.05);
}

TEST(BoxDimension, ProductWithInterval) {
    // [0,1] x Cantor(1/4, 8) in the plane, time sampled finely enough for the ladder.
    const InitialSet c = make_cantor(0.25, 8);
    std::vector<double> ts;
    for (int k = 0; k <= 4096; ++k) ts.push_back(k / 4096.0);
    const auto pts = lifted_points(make_product(TimeSet::sampled(ts), c));
    const auto est = estimate_box_dimension(pts, power_ladder(2.0, 3, 11));
    EXPECT_NEAR(est.fitted_dim, 1.5, 0.05);
}

TEST(BoxDimension, DegenerateLadderRejected) {
    const std::vector<Vec> p{Vec{0.0}};
    EXPECT_THROW(estimate_box_dimension(p, power_ladder(2.0, 1, 6)), Error);
    EXPECT_THROW(estimate_box_dimension(make_cantor(0.25, 3).points, power_ladder(2.0, 1, 3)), Error);
}

TEST(BoxDimension, ValidityWindowEnforced) {
    const InitialSet c = make_cantor(0.25, 2);  // finest scale 4^-3
    EXPECT_THROW(estimate_box_dimension(c, power_ladder(4.0, 3, 8)), Error);
    const auto ladder = default_ladder(1.0, c.finest_scale);
    for (double eps : ladder) EXPECT_GE(eps, 4 * c.finest_scale);
}

TEST(BoxDimension, SupersetNotSmaller) {
    const InitialSet c = make_cantor(0.25, 10);
    InitialSet sup = c;
    for (const auto& p : make_segment(Vec{0.0}, Vec{0.25}, 4000).points) sup.points.push_back(p);
    const auto ladder = power_ladder(2.0, 3, 12);
    EXPECT_GE(estimate_box_dimension(sup.points, ladder).fitted_dim,
              estimate_box_dimension(c.points, ladder).fitted_dim - 0.02);
    for (double eps : ladder) EXPECT_GE(box_count(sup.points, eps), box_count(c.points, eps));
}

TEST(Minkowski, SingletonInPlane) {
    const DistanceEvaluator e(make_graph(make_singleton(Vec{0.0, 0.0}), identity_bundle()));
    const auto est = estimate_minkowski_dimension(e, 0.5, power_ladder(2.0, 2, 7), Box::cube(2, -1, 1), {.seed = 1});
    EXPECT_NEAR(est.fitted_dim, 0.0, 0.1);
}

TEST(Minkowski, SegmentInPlane) {
    const InitialSet seg = make_segment(Vec{0.0, 0.0}, Vec{1.0, 0.0}, 20001);
    const auto est =
        estimate_minkowski_dimension(seg.points, power_ladder(2.0, 3, 9), Box({-0.5, -0.5}, {1.5, 0.5}), {.seed = 2});
    EXPECT_NEAR(est.fitted_dim, 1.0, 0.1);
}

TEST(Minkowski, CantorAgreesWithBoxCount) {
    const InitialSet c = make_cantor(0.25, 12);
    const auto ladder = power_ladder(4.0, 2, 10);
    const auto mk = estimate_minkowski_dimension(c.points, ladder, Box::cube(1, -0.1, 1.1), {.seed = 3});
    const auto bc = estimate_box_dimension(c, ladder);
    EXPECT_NEAR(mk.fitted_dim, 0.5, 0.05);
    EXPECT_NEAR(mk.fitted_dim, bc.fitted_dim, 0.1);
    EXPECT_EQ(mk.method, DimensionMethod::minkowski);

    // Deterministic counterpart from exact interval-union lengths.
    std::vector<double> lx, ly;
    for (double eps : ladder) {
        lx.push_back(std::log(eps));
        ly.push_back(std::log(interval_union_length(xs_of(c), eps)));
    }
    EXPECT_NEAR(1.0 - least_squares(lx, ly).slope, mk.fitted_dim, 0.02);
}

TEST(Minkowski, SectionOfProductMatchesPointSet) {
    const InitialSet c = make_cantor(0.25, 10);
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), c));
    const auto ladder = power_ladder(4.0, 2, 8);
    const Box dom = Box::cube(1, -0.1, 1.1);
    const auto a = estimate_minkowski_dimension(e, 0.5, ladder, dom, {.seed = 4});
    EXPECT_NEAR(a.fitted_dim, 0.5, 0.05);
}

TEST(PredictedRegion, Examples) {
    EXPECT_EQ(predicted_print_region(1.0, 0.0, 2, 1.5, kInf), Region::member);
    EXPECT_EQ(predicted_print_region(0.5, 0.5, 1, 1.0, 1.0), Region::undecided);
    EXPECT_EQ(predicted_print_region(0.5, 0.5, 1, 4.0, 1.05), Region::nonmember);
    EXPECT_EQ(predicted_print_region(0.5, 0.5, 1, 2.0, 2.0), Region::nonmember);
    EXPECT_EQ(predicted_print_region(1.0, 0.0, 2, 2.5, kInf), Region::nonmember);
    EXPECT_EQ(predicted_print_region(0.0, 1.0, 2, 3.0, 1.5), Region::undecided);  // 4.5 = 3 + 1.5
    EXPECT_EQ(predicted_print_region(0.0, 1.0, 2, 0.5, 4.0), Region::member);
    EXPECT_THROW(predicted_print_region(1.5, 0.0, 2, 1.0, 1.0), Error);
}

TEST(PredictedRegion, InequalityMatchesArithmetic) {
    // alpha beta vs alpha (1 - dT) + beta (n - dA) on a grid.
    for (double a = 1.0; a <= 4.0; a += 0.25)
        for (double b = 1.0; b <= 4.0; b += 0.25) {
            const double lhs = a * b, rhs = a * 0.5 + b * 0.5;
            const Region r = predicted_print_region(0.5, 0.5, 1, a, b);
            if (lhs < rhs) EXPECT_EQ(r, Region::member);
            if (lhs > rhs) EXPECT_EQ(r, Region::nonmember);
        }
}

TEST(IsotropicBound, Examples) {
    EXPECT_EQ(isotropic_print_bound(1.5, 1.5, 2, 0.4), Region::member);
    EXPECT_EQ(isotropic_print_bound(1.5, 1.5, 2, 0.6), Region::nonmember);
    EXPECT_EQ(isotropic_print_bound(1.5, 1.5, 2, 0.5), Region::undecided);
    EXPECT_EQ(isotropic_print_bound(1.5, 1.2, 2, 0.6), Region::undecided);
    EXPECT_THROW(isotropic_print_bound(1.0, 1.2, 2, 0.6), Error);
}

namespace {

PrintOptions print_options(std::vector<double> ladder) {
    PrintOptions o;
    o.ladder = std::move(ladder);
    o.time_points = 3;
    o.measure.seed = 9;
    return o;
}

}  // namespace

TEST(PrintMembership, PointVortexAxis) {
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), make_singleton(Vec{0.0, 0.0})));
    const auto opt = print_options(power_ladder(2.0, 2, 7));
    const Box dom = Box::cube(2, -1, 1);
    const auto v1 = print_membership(e, 1.5, kInf, dom, opt);
    EXPECT_EQ(v1.verdict, Verdict::member) << v1.reason;
    EXPECT_NEAR(v1.gamma_min, 2.0, 0.1);
    const auto v2 = print_membership(e, 2.5, kInf, dom, opt);
    EXPECT_EQ(v2.verdict, Verdict::non_member) << v2.reason;
    const auto v3 = print_membership(e, 2.0, kInf, dom, opt);
    EXPECT_EQ(v3.verdict, Verdict::inconclusive);
}

TEST(PrintMembership, HolderGraphOverCantor) {
    const DistanceEvaluator e(make_graph(embed(make_cantor(0.25, 8), 2), holder_drift_bundle(0.5)));
    const auto opt = print_options(power_ladder(2.0, 3, 9));
    const Box dom({-0.2, -0.5}, {2.2, 0.5});
    const auto v = print_membership(e, 0.6, kInf, dom, opt);
    EXPECT_EQ(v.verdict, Verdict::member) << v.reason;
    EXPECT_NEAR(v.gamma_min, 1.5, 0.1);
    // a_H (gamma - margin) = 0.7 sits on the band edge
    EXPECT_NE(print_membership(e, 0.7, kInf, dom, opt).verdict, Verdict::non_member);
    const auto w = print_membership(e, 1.8, kInf, dom, opt);
    EXPECT_EQ(w.verdict, Verdict::non_member) << w.reason;
}

TEST(PrintMembership, NeverContradictsProductPrediction) {
    const InitialSet c = make_cantor(0.25, 10);
    const DistanceEvaluator e(make_product(TimeSet::from_set(c), c));
    const auto opt = print_options(power_ladder(4.0, 2, 7));
    for (double a : {1.0, 1.5, 3.0})
        for (double b : {1.0, 2.0, kInf}) {
            const auto v = print_membership(e, a, b, Box::cube(1, -0.1, 1.1), opt);
            const Region r = predicted_print_region(0.5, 0.5, 1, a, b);
            if (r == Region::member) EXPECT_NE(v.verdict, Verdict::non_member);
            if (r == Region::nonmember) EXPECT_NE(v.verdict, Verdict::member);
            EXPECT_NEAR(v.kappa, 0.5, 0.05);
        }
}

TEST(PrintMembership, RejectsBadInputs) {
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), make_singleton(Vec{0.0})));
    auto opt = print_options(power_ladder(2.0, 2, 7));
    EXPECT_THROW(print_membership(e, 0.0, 1.0, Box::cube(1, -1, 1), opt), Error);
    EXPECT_THROW(print_membership(e, 1.5, -1.0, Box::cube(1, -1, 1), opt), Error);
    opt.eps_floor = 0.1;
    EXPECT_THROW(print_membership(e, 1.5, 1.0, Box::cube(1, -1, 1), opt), Error);  // ladder too short
}

TEST(WeakChebyshev, HoldsSampleBySample) {
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), make_cantor(0.25, 8)));
    for (double q : {0.25, 0.5, 1.0})
        for (double eps : {0.1, 0.01}) {
            const auto c = weak_chebyshev_check(e, 0.5, eps, q, Box::cube(1, -0.1, 1.1), 50000, 4);
            EXPECT_TRUE(c.holds);
            EXPECT_LE(c.lhs, c.rhs);
            EXPECT_GT(c.lhs, 0.0);
        }
}

TEST(DimensionCsv, Headers) {
    const auto est = estimate_box_dimension(make_cantor(0.25, 6), power_ladder(4.0, 1, 5));
    std::ostringstream a, b;
    write_box_counts_csv(a, est);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "epsilon,count");
    EXPECT_NE(a.str().find("0.25,2\n"), std::string::npos);
    write_fit_csv(b, {{"cantor", est}});
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')),
              "set,method,fitted_dim,upper_proxy,lower_proxy,r_squared,eps_min,eps_max,low_confidence");
}
