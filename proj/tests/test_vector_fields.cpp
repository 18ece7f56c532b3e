#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "sfl/vector_fields.hpp"

using namespace sfl;

namespace {

// Independent oracle: i Gamma (x - z) / |x - z|^2 in complex form is the
// perp kernel.
Vec complex_kernel(double gamma, const Vec& z, const Vec& x) {
    const std::complex<double> r(x[0] - z[0], x[1] - z[1]);
    const std::complex<double> w = std::complex<double>(0, gamma) * r / std::norm(r);
    return Vec{w.real(), w.imag()};
}

DistanceEvaluator static_axis() {
    return DistanceEvaluator(make_product(TimeSet::interval(0, 1), make_singleton(Vec{0.0, 0.0})));
}

}  // namespace

TEST(PointVortex, OffsetVortexAtOrigin) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{1.0, 0.0}), 1.0);
    const Vec v = eval_field(b, 0.3, Vec{0.0, 0.0});
    EXPECT_DOUBLE_EQ(v[0], 0.0);
    EXPECT_DOUBLE_EQ(v[1], -1.0);
}

TEST(PointVortex, SpeedIsReciprocalRadius) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0);
    for (double r : {0.1, 0.5, 2.0}) {
        const Vec v = eval_field(b, 0.0, Vec{r, 0.0});
        EXPECT_NEAR(v[0], 0.0, 1e-15);
        EXPECT_NEAR(v[1], 1.0 / r, 1e-14);
    }
}

TEST(PointVortex, NormalizedKernel) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0, zero_background(), true);
    EXPECT_NEAR(eval_field(b, 0.0, Vec{0.5, 0.0})[1], 1.0 / (2 * std::numbers::pi * 0.5), 1e-15);
}

TEST(PointVortex, DivergenceFreeByFiniteDifferences) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0);
    EXPECT_NEAR(fd_divergence(b, 0.0, Vec{0.3, 0.4}), 0.0, 1e-6);
}

TEST(PointVortex, SingularPoint) {
    const FieldSpec b = make_point_vortex_field(circular_trajectory(Vec{0.0, 0.0}, 1.0, 2.0), 1.0);
    try {
        eval_field(b, 0.0, Vec{1.0, 0.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "singular point");
    }
}

TEST(PointVortex, DivergenceFreeOnRandomPoints) {
    const FieldSpec b = make_point_vortex_field(circular_trajectory(Vec{0.0, 0.0}, 0.5, 1.0), 1.3);
    CounterRng rng(2, 0);
    int checked = 0;
    while (checked < 10000) {
        const double t = rng.uniform();
        const Vec x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        if (distance(x, b.vortices[0].path.position(t)) < 0.1) continue;
        ASSERT_LT(std::abs(fd_divergence(b, t, x, 1e-4)), 1e-5);
        ++checked;
    }
}

TEST(EvalField, RotationBackground) {
    const FieldSpec b = make_field(rotation_background());
    const Vec v = eval_field(b, 0.0, Vec{1.0, 0.0});
    EXPECT_DOUBLE_EQ(v[0], 0.0);
    EXPECT_DOUBLE_EQ(v[1], 1.0);
}

TEST(EvalField, OppositeVorticesSuperpose) {
    const double d = 0.7, g = 1.9;
    const FieldSpec b = make_field(zero_background(), {{fixed_trajectory(Vec{-d, 0.0}), g, false},
                                                       {fixed_trajectory(Vec{d, 0.0}), -g, false}});
    const Vec v = eval_field(b, 0.0, Vec{0.0, 0.0});
    EXPECT_NEAR(v[0], 0.0, 1e-15);
    EXPECT_NEAR(v[1], 2 * g / d, 1e-14);

    CounterRng rng(1, 0);
    for (int i = 0; i < 200; ++i) {
        const Vec x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec w = complex_kernel(g, Vec{-d, 0.0}, x) + complex_kernel(-g, Vec{d, 0.0}, x);
        const Vec u = eval_field(b, 0.0, x);
        EXPECT_NEAR(u[0], w[0], 1e-12 * (1 + w.norm()));
        EXPECT_NEAR(u[1], w[1], 1e-12 * (1 + w.norm()));
    }
}

TEST(EvalField, TableReproducesAffineField) {
    // v = (0.5 x + 0.2 y, -y + 1) sampled on a 5 x 4 grid.
    const Box box({-1, -1}, {1, 2});
    std::vector<Vec> vals;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 5; ++i) {
            const double x = -1 + 2.0 * i / 4, y = -1 + 3.0 * j / 3;
            vals.push_back(Vec{0.5 * x + 0.2 * y, -y + 1});
        }
    const Background tb = table_background(box, 5, 4, vals);
    CounterRng rng(3, 0);
    for (int k = 0; k < 100; ++k) {
        const Vec x = rng.uniform_in(box);
        const Vec v = tb.eval(0.0, x);
        EXPECT_NEAR(v[0], 0.5 * x[0] + 0.2 * x[1], 1e-13);
        EXPECT_NEAR(v[1], -x[1] + 1, 1e-13);
        EXPECT_NEAR(tb.divergence(0.0, x), -0.5, 1e-12);
    }
    EXPECT_NEAR(*tb.sup_norm, std::hypot(0.7, 2.0), 1e-12);  // node (-1, -1)
}

TEST(EvalField, RejectsMismatchedInputs) {
    EXPECT_THROW(make_field(zero_background(3), {{fixed_trajectory(Vec{0.0, 0.0}), 1.0, false}}), Error);
    EXPECT_THROW(eval_field(make_field(zero_background()), 0.0, Vec{1.0}), Error);
    EXPECT_THROW(piecewise_linear_trajectory({0.0, 0.0}, {Vec{0.0, 0.0}, Vec{1.0, 0.0}}), Error);
}

TEST(Trajectories, PositionsAndConstants) {
    const Trajectory c = circular_trajectory(Vec{1.0, 0.0}, 0.5, std::numbers::pi);
    EXPECT_NEAR(c.position(1.0)[0], 0.5, 1e-15);
    EXPECT_NEAR(c.holder_constant(), 0.5 * std::numbers::pi, 1e-15);

    const Trajectory p = piecewise_linear_trajectory({0.0, 0.5, 1.0}, {Vec{0, 0}, Vec{1, 0}, Vec{1, 2}});
    EXPECT_DOUBLE_EQ(p.position(0.25)[0], 0.5);
    EXPECT_DOUBLE_EQ(p.position(0.75)[1], 1.0);
    EXPECT_DOUBLE_EQ(p.holder_constant(), 4.0);

    const Trajectory d = drift_trajectory(Vec{0, 0}, Vec{0, 2}, 0.5);
    EXPECT_DOUBLE_EQ(d.position(0.25)[1], 1.0);
    EXPECT_EQ(d.holder_exponent(), 0.5);
}

TEST(Trajectories, SweepBoundsTheMotion) {
    for (const Trajectory& z : {circular_trajectory(Vec{0, 0}, 1.0, 3.0),
                                piecewise_linear_trajectory({0.0, 0.3, 1.0}, {Vec{0, 0}, Vec{1, 1}, Vec{0, 2}}),
                                drift_trajectory(Vec{0, 0}, Vec{1, 1}, 0.3)}) {
        CounterRng rng(4, 0);
        for (int i = 0; i < 500; ++i) {
            double a = rng.uniform(), b = rng.uniform();
            if (a > b) std::swap(a, b);
            const Vec mid = z.position(0.5 * (a + b));
            const double s = z.sweep(a, b);
            for (int k = 0; k <= 20; ++k)
                EXPECT_LE(distance(z.position(a + (b - a) * k / 20.0), mid), s + 1e-12);
        }
    }
}

TEST(VortexSet, SectionsFollowTrajectories) {
    const FieldSpec b = make_field(zero_background(), {{circular_trajectory(Vec{0, 0}, 1.0, 2.0), 1.0, false},
                                                       {fixed_trajectory(Vec{0.0, 0.0}), -1.0, false}});
    const SpaceTimeSet s = vortex_set(b);
    const auto sec = temporal_section(s, 0.4);
    ASSERT_EQ(sec.size(), 2u);
    EXPECT_NEAR(distance(sec[0], b.vortices[0].path.position(0.4)), 0.0, 1e-15);
    EXPECT_EQ(sec[1], (Vec{0.0, 0.0}));

    const DistanceEvaluator e(vortex_set(make_point_vortex_field(circular_trajectory(Vec{0, 0}, 1.0, 2.0), 1.0)));
    EXPECT_NEAR(e.dist_section(0.4, Vec{0.0, 0.0}), 1.0, 1e-14);
    EXPECT_LE(e.dist_spacetime(0.4, Vec{0.0, 0.0}), 1.0);
}

TEST(NormalComponent, StaticVortexCancels) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0);
    const DistanceEvaluator e = static_axis();
    CounterRng rng(5, 0);
    int checked = 0;
    double worst = 0.0;
    while (checked < 10000) {
        const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (x.norm() < 0.1) continue;
        const auto nc = normal_component(b, e, rng.uniform(), x);
        worst = std::max(worst, std::abs(nc.value));
        EXPECT_FALSE(nc.one_sided);
        ++checked;
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(NormalComponent, RadialFieldIsParallel) {
    const FieldSpec b = make_field(radial_background());
    const DistanceEvaluator e = static_axis();
    CounterRng rng(6, 0);
    for (int i = 0; i < 500; ++i) {
        const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (x.norm() < 0.01) continue;
        EXPECT_NEAR(normal_component(b, e, 0.5, x).value, 1.0, 1e-6);
    }
}

TEST(NormalComponent, BoundedByBackgroundAndFieldNorm) {
    const Vec c{0.3, -0.4};
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 2.0, uniform_background(c));
    const DistanceEvaluator e = static_axis();
    CounterRng rng(7, 0);
    for (int i = 0; i < 2000; ++i) {
        const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (x.norm() < 0.05) continue;
        const double v = normal_component(b, e, 0.5, x).value;
        EXPECT_LE(std::abs(v), 0.5 + 1e-5);
        EXPECT_LE(std::abs(v), eval_field(b, 0.5, x).norm() * (1 + 1e-3));
    }
}

TEST(NormalComponent, EquidistantPointIsFlagged) {
    InitialSet two;
    two.ambient_dim = 2;
    two.points = {Vec{-1.0, 0.0}, Vec{1.0, 0.0}};
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), two));
    const FieldSpec b = make_field(uniform_background(Vec{1.0, 0.0}));
    const auto nc = normal_component(b, e, 0.5, Vec{0.0, 0.5});
    EXPECT_TRUE(nc.one_sided);
    EXPECT_NEAR(std::abs(nc.value), 1.0 / std::hypot(1.0, 0.5), 1e-2);  // one-sided, O(h)
    EXPECT_FALSE(normal_component(b, e, 0.5, Vec{0.3, 0.5}).one_sided);
}

TEST(NormalComponent, DistanceFloor) {
    const FieldSpec b = make_field(zero_background());
    NormalOptions opt;
    opt.delta_min = 0.2;
    EXPECT_THROW(normal_component(b, static_axis(), 0.5, Vec{0.1, 0.0}, opt), Error);
}

TEST(MixedNorm, ConstantFunction) {
    const Box dom({0, 0}, {2, 1.5});
    const std::vector<double> ts{0.0, 0.5, 1.0, 2.0};
    const double c = 1.7;
    auto f = [c](double, const Vec&) { return c; };
    for (auto [p, q] : {std::pair{1.0, 1.0}, {2.0, 3.0}, {kInf, 2.0}, {1.5, kInf}}) {
        const MixedNorm m = mixed_norm_estimate(f, p, q, dom, ts, nullptr, {.samples = 1000});
        const double vq = std::isinf(q) ? 1.0 : std::pow(3.0, 1.0 / q);
        const double tp = std::isinf(p) ? 1.0 : std::pow(2.0, 1.0 / p);
        EXPECT_NEAR(m.value, c * vq * tp, 1e-12 * c * vq * tp) << p << " " << q;
        EXPECT_EQ(m.relative_growth, 0.0);
    }
}

TEST(MixedNorm, ReciprocalDistanceTrend) {
    const DistanceEvaluator e = static_axis();
    const Box dom = Box::cube(2, -1, 1);
    auto f = [&](double t, const Vec& x) { return 1.0 / e.dist_section(t, x); };
    const Excision ex{&e, 1e-2, 1e-3, DistanceKind::section};
    const std::vector<double> ts{0.25, 0.75};
    for (double q : {1.5, 2.5}) {
        const MixedNorm m = mixed_norm_estimate(f, kInf, q, dom, ts, &ex, {.samples = 100000, .seed = 3});
        // analytic annulus integral of |x|^-q between the two radii
        const double annulus = 2 * std::numbers::pi * (std::pow(1e-2, 2 - q) - std::pow(1e-3, 2 - q)) / (2 - q);
        EXPECT_NEAR(std::pow(m.value_inner, q) - std::pow(m.value, q), annulus, 0.05 * annulus + 0.02) << q;
        if (q < 2) {
            EXPECT_LT(m.relative_growth, 0.05);
        } else {
            EXPECT_GT(m.relative_growth, 0.25);
        }
    }
}

TEST(MixedNorm, NonFiniteInsideRegionThrows) {
    auto f = [](double, const Vec& x) { return 1.0 / x[0] - 1.0 / x[0]; };
    EXPECT_THROW(mixed_norm_estimate([](double, const Vec&) { return kInf; }, 1.0, 1.0, Box::cube(2, 0, 1), {0.0}),
                 Error);
    EXPECT_NO_THROW(mixed_norm_estimate(f, 1.0, 1.0, Box::cube(2, 0.5, 1), {0.0}));
}

TEST(Threshold, LipschitzVortexIsTwo) {
    const auto r = trajectory_threshold(1.0, 2, 0.0);
    EXPECT_TRUE(r.satisfiable);
    EXPECT_EQ(r.q_bar, 2.0);
}

TEST(Threshold, HolderCantorUnsatisfiable) {
    EXPECT_FALSE(trajectory_threshold(0.5, 2, 0.5).satisfiable);
}

TEST(Threshold, Monotone) {
    for (double a = 0.55; a <= 1.0; a += 0.05)
        for (double d = 0.0; d <= 0.2; d += 0.05) {
            const auto base = trajectory_threshold(a, 2, d);  // q_bar = inf when unsatisfiable
            EXPECT_LE(trajectory_threshold(std::min(1.0, a + 0.05), 2, d).q_bar, base.q_bar);
            if (d >= 0.05) EXPECT_LE(trajectory_threshold(a, 2, d - 0.05).q_bar, base.q_bar);
        }
}

namespace {
WellposednessOptions quick_options() {
    WellposednessOptions o;
    o.norm.samples = 20000;
    o.norm.seed = 1;
    o.t_grid = {0.0, 0.5, 1.0};
    o.print.ladder = power_ladder(2.0, 2, 7);
    o.print.time_points = 3;
    return o;
}
}  // namespace

TEST(Wellposedness, StaticVortex) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0);
    const DistanceEvaluator e(vortex_set(b));
    const ConditionReport r = wellposedness_check(b, e, kInf, kInf, {1.0, 0.0}, quick_options());
    EXPECT_EQ(r.at("local_integrability").status, ConditionStatus::satisfied);
    EXPECT_EQ(r.at("bounded_divergence").status, ConditionStatus::satisfied);
    EXPECT_EQ(r.at("growth").status, ConditionStatus::satisfied);
    EXPECT_EQ(r.at("bv_off_singular_set").status, ConditionStatus::unverifiable_numerically);
    const auto& v = r.at("normal_component_and_print");
    EXPECT_EQ(v.status, ConditionStatus::satisfied) << v.note;
    EXPECT_LT(v.value, 1e-5);
    EXPECT_EQ(r.threshold.q_bar, 2.0);
    EXPECT_EQ(r.at("trajectory_threshold").status, ConditionStatus::satisfied);
    EXPECT_TRUE(r.all_hold());

    std::ostringstream csv;
    write_report_csv(csv, r);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "condition,status,value,value_inner,p,q,note");
}

TEST(Wellposedness, ThresholdRejectsSmallQ) {
    const FieldSpec b = make_point_vortex_field(fixed_trajectory(Vec{0.0, 0.0}), 1.0);
    const DistanceEvaluator e(vortex_set(b));
    const ConditionReport r = wellposedness_check(b, e, 1.0, 1.5, {1.0, 0.0}, quick_options());
    EXPECT_EQ(r.at("trajectory_threshold").status, ConditionStatus::violated);
    const ConditionReport u = wellposedness_check(b, e, 1.0, 3.0, {0.5, 0.5}, quick_options());
    EXPECT_EQ(u.at("trajectory_threshold").note, "condition unsatisfiable");
}

TEST(Wellposedness, RadialFieldFailsNormalCondition) {
    // b = x/|x| has |b . grad d| = 1, but d^-1 is not in L^inf_loc, so (q, p) = (1, 1) fails the print.
    const FieldSpec b = make_field(radial_background());
    const DistanceEvaluator e = static_axis();
    const ConditionReport r = wellposedness_check(b, e, 1.0, 1.0, {1.0, 0.0}, quick_options());
    EXPECT_EQ(r.at("normal_component_and_print").status, ConditionStatus::violated);
}
