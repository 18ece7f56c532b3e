// Randomized properties over many generated cases. Cases come from a
// counter-based generator, so failures reproduce from the printed index.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "sfl/scenario.hpp"

using namespace sfl;

namespace {

constexpr std::uint64_t kSeed = 0x5eed;

CounterRng case_rng(std::uint64_t suite, int i) { return CounterRng(kSeed, suite, std::uint64_t(i)); }

std::vector<Vec> random_cloud(CounterRng& rng, int n, int count) {
    std::vector<Vec> pts;
    for (int k = 0; k < count; ++k) pts.push_back(rng.uniform_in(Box::cube(n, -1, 1)));
    return pts;
}

InitialSet as_set(std::vector<Vec> pts) {
    InitialSet s;
    s.ambient_dim = pts.front().dim();
    s.points = std::move(pts);
    s.generator_tag = "random";
    return s;
}

}  // namespace

TEST(Property, DistanceIsLipschitzAndSectionDominates) {
    for (int i = 0; i < 40; ++i) {
        CounterRng rng = case_rng(1, i);
        const auto cloud = random_cloud(rng, 2, 1 + int(rng.uniform() * 30));
        const DistanceEvaluator e(make_product(TimeSet::interval(0.2, 0.6), as_set(cloud)));
        for (int k = 0; k < 20; ++k) {
            const double t = rng.uniform(0, 1), s = rng.uniform(0, 1);
            const Vec x = rng.uniform_in(Box::cube(2, -2, 2)), y = rng.uniform_in(Box::cube(2, -2, 2));
            const double dx = e.distance(DistanceKind::spacetime, t, x);
            const double dy = e.distance(DistanceKind::spacetime, s, y);
            EXPECT_LE(std::abs(dx - dy), spacetime_distance(t, x, s, y) + 1e-12) << "case " << i;
            const double tc = std::clamp(t, 0.2, 0.6);
            EXPECT_GE(e.distance(DistanceKind::section, tc, x) + 1e-12, e.distance(DistanceKind::spacetime, tc, x))
                << "case " << i;
        }
    }
}

TEST(Property, BoxCountMonotone) {
    for (int i = 0; i < 30; ++i) {
        CounterRng rng = case_rng(2, i);
        const int n = 1 + i % 3;
        auto b = random_cloud(rng, n, 50 + i * 7);
        const std::vector<Vec> a(b.begin(), b.begin() + std::ptrdiff_t(b.size() / 2));
        std::size_t prev = 0;
        for (double eps : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
            const std::size_t nb = box_count(b, eps);
            EXPECT_GE(nb, prev) << "case " << i;
            EXPECT_LE(box_count(a, eps), nb) << "case " << i;
            EXPECT_LE(nb, b.size());
            prev = nb;
        }
    }
}

TEST(Property, OneDimensionalCoverTranslationInvariant) {
    for (int i = 0; i < 50; ++i) {
        CounterRng rng = case_rng(3, i);
        std::vector<double> xs, ys;
        const double shift = std::ldexp(std::floor(rng.uniform(-64, 64)), -4);  // exact in binary
        for (int k = 0; k < 40; ++k) {
            xs.push_back(std::ldexp(std::floor(rng.uniform(0, 1024)), -10));
            ys.push_back(xs.back() + shift);
        }
        for (double eps : {0.3, 0.1, 0.02})
            EXPECT_EQ(detail::cover_count_1d(xs, eps), detail::cover_count_1d(ys, eps)) << "case " << i;
    }
}

TEST(Property, RotationFlowMatchesExactSolution) {
    const FieldSpec b = make_field(rotation_background(1.0));
    const DistanceEvaluator e(make_product(TimeSet::interval(0, 1), make_singleton(Vec{5.0, 5.0})));
    FlowOptions o;
    for (int i = 0; i < 25; ++i) {
        CounterRng rng = case_rng(4, i);
        const Vec x = rng.uniform_in(Box::cube(2, -1, 1));
        const Vec y = flow_map(b, e, x, o);
        const double c = std::cos(1.0), s = std::sin(1.0);
        EXPECT_NEAR(y[0], c * x[0] - s * x[1], 1e-7) << "case " << i;
        EXPECT_NEAR(y[1], s * x[0] + c * x[1], 1e-7) << "case " << i;
        EXPECT_NEAR(y.norm(), x.norm(), 1e-7);
    }
}

TEST(Property, BilinearTransportIsLinearAndBounded) {
    const FieldSpec b = make_field(rotation_background(1.0));
    TransportGrid g;
    g.nx = g.ny = 24;
    g.steps = 6;
    for (int i = 0; i < 6; ++i) {
        CounterRng rng = case_rng(5, i);
        const Vec c1 = rng.uniform_in(Box::cube(2, -0.5, 0.5)), c2 = rng.uniform_in(Box::cube(2, -0.5, 0.5));
        const double a = rng.uniform(-2, 2), w = rng.uniform(-2, 2);
        auto f1 = [c1](const Vec& x) { return std::exp(-(x - c1).norm2() / 0.05); };
        auto f2 = [c2](const Vec& x) { return std::cos(3 * (x - c2).norm()); };
        const ScalarField u = solve_transport(b, f1, g), v = solve_transport(b, f2, g);
        const ScalarField s = solve_transport(b, [&](const Vec& x) { return a * f1(x) + w * f2(x); }, g);
        double lo = kInf, hi = -kInf;
        for (double z : v.values[0]) lo = std::min(lo, z), hi = std::max(hi, z);
        for (std::size_t k = 0; k < u.nodes(); ++k) {
            EXPECT_NEAR(s.values.back()[k], a * u.values.back()[k] + w * v.values.back()[k], 1e-12) << "case " << i;
            EXPECT_GE(v.values.back()[k], lo - 1e-15);
            EXPECT_LE(v.values.back()[k], hi + 1e-15);
        }
    }
}

TEST(Property, VortexWaveConservesCirculationAndCentroid) {
    for (int i = 0; i < 8; ++i) {
        CounterRng rng = case_rng(6, i);
        ParticleSet s;
        const int n = 2 + i;
        for (int k = 0; k < n; ++k) {
            s.p.push_back(rng.uniform_in(Box::cube(2, 0.3, 1.0)));
            s.omega.push_back(rng.uniform(0.1, 1.0));
            s.area.push_back(0.0);
        }
        s.spacing = 0.1;
        VortexWaveOptions o;
        o.gamma = rng.uniform(0.5, 1.5);
        o.horizon = 0.2;
        o.snapshots = 4;
        o.blob_radius = 0.05;
        const Vec z0 = rng.uniform_in(Box::cube(2, -0.6, -0.3));
        const auto r = simulate_vortex_wave(s, z0, o);
        const Vec c0 = vorticity_centroid(r.snapshots.front(), o.gamma);
        for (const auto& st : r.snapshots) {
            EXPECT_EQ(total_vorticity(st), total_vorticity(r.snapshots.front())) << "case " << i;
            // the mutual interactions are antisymmetric; RK4 keeps the
            // centroid up to rounding and truncation
            EXPECT_LT(distance(vorticity_centroid(st, o.gamma), c0), 1e-6) << "case " << i;
        }
    }
}

TEST(Property, KernelAntisymmetryRandom) {
    for (int i = 0; i < 200; ++i) {
        CounterRng rng = case_rng(7, i);
        const Vec x = rng.uniform_in(Box::cube(2, -3, 3));
        const double rho = rng.uniform(0, 0.5);
        EXPECT_EQ(detail::blob_kernel(x, rho, 1.0), -detail::blob_kernel(-x, rho, 1.0));
    }
}

TEST(Property, PredictedPrintRegionIsDownwardClosed) {
    for (int i = 0; i < 300; ++i) {
        CounterRng rng = case_rng(8, i);
        const int n = 1 + i % 3;
        const double dt = rng.uniform(0, 1), da = rng.uniform(0, n);
        const double a = rng.uniform(0.05, 5), b = rng.uniform(0.05, 5);
        if (predicted_print_region(dt, da, n, a, b) == Region::member) {
            EXPECT_EQ(predicted_print_region(dt, da, n, a * 0.9, b), Region::member) << "case " << i;
            EXPECT_EQ(predicted_print_region(dt, da, n, a, b * 0.9), Region::member) << "case " << i;
        }
    }
}

TEST(Property, ThresholdMatchesInequality) {
    for (int i = 0; i < 300; ++i) {
        CounterRng rng = case_rng(9, i);
        const int n = 2 + i % 2;
        const double ah = rng.uniform(0.05, 1.0), dim = rng.uniform(0, n), q = rng.uniform(1.0, 20.0);
        const auto th = trajectory_threshold(ah, n, dim);
        const bool holds = 1.0 / q + 1.0 / (ah * (n - dim)) < 1.0;
        if (std::abs(q - th.q_bar) > 1e-9) EXPECT_EQ(th.satisfiable && q > th.q_bar, holds) << "case " << i;
    }
}

TEST(Property, AvoidanceLadderNestedForRandomVortices) {
    for (int i = 0; i < 4; ++i) {
        CounterRng rng = case_rng(10, i);
        const FieldSpec b = make_point_vortex_field(
            circular_trajectory(Vec{0.0, 0.0}, rng.uniform(0.2, 0.6), rng.uniform(0.5, 1.5)), rng.uniform(0.005, 0.05),
            uniform_background(Vec{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}));
        const DistanceEvaluator e(vortex_set(b));
        InitialSample s;
        s.per_axis = 40;
        const FlowEnsemble f = integrate_flow(b, e, s);
        AvoidanceOptions a;
        a.tube.samples = 4000;
        const auto rep = avoidance_statistics(f, b, e, a);
        EXPECT_TRUE(rep.nested) << "case " << i;
        EXPECT_TRUE(rep.monotone) << "case " << i;
    }
}

TEST(Property, CsvNumbersRoundTrip) {
    for (int i = 0; i < 1000; ++i) {
        CounterRng rng = case_rng(11, i);
        const double v = std::ldexp(rng.uniform(-1, 1), int(rng.uniform(-60, 60)));
        const std::string s = format_double(v);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
        EXPECT_EQ(s.find(','), std::string::npos);
    }
}

TEST(Property, ConfigNumbersSurviveEcho) {
    for (int i = 0; i < 50; ++i) {
        CounterRng rng = case_rng(12, i);
        json j = {{"name", "p"}, {"seed", rng.next_u64()}, {"horizon", rng.uniform(0.1, 10)}};
        const Scenario s = parse_scenario(json::parse(j.dump()));
        EXPECT_EQ(s.seed, j["seed"].get<std::uint64_t>());
        EXPECT_EQ(s.horizon, j["horizon"].get<double>());
    }
}
