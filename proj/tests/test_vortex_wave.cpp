#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sfl/vortex_wave.hpp"

using namespace sfl;

namespace {

ParticleSet single(const Vec& p, double omega) {
    ParticleSet s;
    s.p = {p};
    s.omega = {omega};
    s.area = {0.0};
    return s;
}

ParticleSet gaussian_blob(const Vec& c, double var, int n) {
    return particles_from_grid(Box::cube(2, -1, 1), n, [c, var](const Vec& x) {
        const double r2 = (x - c).norm2();
        return r2 < 9 * var ? std::exp(-r2 / (2 * var)) : 0.0;
    });
}

}  // namespace

TEST(VortexWave, NoVorticityKeepsVortexStill) {
    VortexWaveOptions o;
    o.snapshots = 4;
    const auto r = simulate_vortex_wave(ParticleSet{}, Vec{0.2, -0.1}, o);
    for (const auto& s : r.snapshots) {
        EXPECT_TRUE(s.p.empty());
        EXPECT_EQ(s.z, (Vec{0.2, -0.1}));
    }
}

TEST(VortexWave, TwoVortexPeriod) {
    VortexWaveOptions o;
    o.gamma = 1.0;
    const double period = two_vortex_period(1.0, 1.0, 0.5, false);
    EXPECT_NEAR(period, 2 * std::numbers::pi / 1.5, 1e-14);
    o.horizon = 1.2 * period;
    o.snapshots = 60;
    const auto r = simulate_vortex_wave(single(Vec{1.0, 0.0}, 0.5), Vec{0.0, 0.0}, o);
    EXPECT_NEAR(relative_rotation_period(r, 0) / period, 1.0, 0.01);
    for (const auto& s : r.snapshots) {
        EXPECT_NEAR(distance(s.p[0], s.z), 1.0, 1e-6);
        EXPECT_LT(distance(vorticity_centroid(s, o.gamma), vorticity_centroid(r.snapshots[0], o.gamma)), 1e-6);
    }
    // normalized kernel slows the orbit by 2 pi
    o.normalized = true;
    o.horizon = 1.2 * two_vortex_period(1.0, 1.0, 0.5, true);
    const auto n = simulate_vortex_wave(single(Vec{1.0, 0.0}, 0.5), Vec{0.0, 0.0}, o);
    EXPECT_NEAR(relative_rotation_period(n, 0) / two_vortex_period(1.0, 1.0, 0.5, true), 1.0, 0.01);
}

TEST(VortexWave, KernelAntisymmetry) {
    for (const Vec& x : {Vec{0.3, -0.2}, Vec{-1.0, 2.0}, Vec{1e-3, 0.0}})
        for (double rho : {0.0, 0.1}) {
            EXPECT_EQ(detail::blob_kernel(x, rho, 1.0), -detail::blob_kernel(-x, rho, 1.0));
            EXPECT_NEAR(detail::blob_kernel(x, rho, 1.0).dot(x), 0.0, 1e-15);
        }
}

TEST(VortexWave, SymmetricBlobHoldsVortex) {
    const ParticleSet s = gaussian_blob(Vec{0.0, 0.0}, 0.05, 20);
    VortexWaveOptions o;
    o.horizon = 0.5;
    o.snapshots = 5;
    const auto r = simulate_vortex_wave(s, Vec{0.0, 0.0}, o);
    EXPECT_GT(r.blob_radius, 0.0);
    for (const auto& st : r.snapshots) EXPECT_LT(st.z.norm(), 0.1 * r.blob_radius);
    // weights never change
    for (const auto& st : r.snapshots) EXPECT_EQ(st.omega, s.omega);
    EXPECT_EQ(total_vorticity(r.snapshots.back()), total_vorticity(r.snapshots.front()));
}

TEST(VortexWave, CentroidDriftOffsetBlob) {
    const ParticleSet s = gaussian_blob(Vec{0.3, 0.1}, 0.02, 24);
    VortexWaveOptions o;
    o.gamma = 0.5;
    o.horizon = 0.5;
    o.snapshots = 5;
    const auto r = simulate_vortex_wave(s, Vec{-0.3, 0.0}, o);
    const Vec c0 = vorticity_centroid(r.snapshots.front(), o.gamma);
    for (const auto& st : r.snapshots) EXPECT_LT(distance(vorticity_centroid(st, o.gamma), c0), 0.01 * 2 * st.t + 1e-12);
    EXPECT_EQ(total_vorticity(r.snapshots.back()), total_vorticity(r.snapshots.front()));
}

TEST(VortexWave, RejectsVortexOnParticle) {
    EXPECT_THROW(simulate_vortex_wave(single(Vec{0.0, 0.0}, 1.0), Vec{0.0, 0.0}, {}), Error);
}

TEST(VortexAvoidance, SymmetricConfigurationNoEntry) {
    const ParticleSet s = gaussian_blob(Vec{0.0, 0.0}, 0.05, 20);
    VortexWaveOptions o;
    o.horizon = 0.5;
    o.snapshots = 10;
    const auto r = simulate_vortex_wave(s, Vec{0.0, 0.0}, o);
    AvoidanceOptions a;
    a.r0 = 0.05;
    a.deltas = power_ladder(2.0, 5, 10);
    a.tube.samples = 4000;
    const auto rep = vortex_avoidance_report(r, a);
    double clearance = kInf;
    for (double d : r.initial_distance) clearance = std::min(clearance, d);
    for (std::size_t k = 0; k < rep.report.rows.size(); ++k) {
        if (rep.report.rows[k].delta < clearance) {
            EXPECT_EQ(rep.report.rows[k].mu, 0.0);
            EXPECT_EQ(rep.vorticity_fraction[k], 0.0);
        }
    }
    EXPECT_LT(rep.lipschitz, 1e-6);
}

TEST(VortexAvoidance, TwoVortexOrbitNoEntry) {
    ParticleSet s = single(Vec{0.5, 0.0}, 0.5);
    s.area = {1e-3};
    VortexWaveOptions o;
    o.horizon = 1.0;
    o.snapshots = 20;
    const auto r = simulate_vortex_wave(s, Vec{0.0, 0.0}, o);
    AvoidanceOptions a;
    a.r0 = 0.25;
    a.tube.samples = 4000;
    const auto rep = vortex_avoidance_report(r, a);
    for (const auto& row : rep.report.rows) EXPECT_EQ(row.mu, 0.0);
    // |dz/dt| = omega / d
    EXPECT_NEAR(rep.lipschitz, 1.0, 1e-3);
}

TEST(VortexAvoidance, OffsetBlobBounded) {
    const ParticleSet s = gaussian_blob(Vec{0.3, 0.0}, 0.02, 24);
    VortexWaveOptions o;
    o.gamma = 0.3;
    o.horizon = 0.5;
    o.snapshots = 20;
    const auto r = simulate_vortex_wave(s, Vec{-0.2, 0.0}, o);
    AvoidanceOptions a;
    a.r0 = 0.25;
    a.tube.samples = 4000;
    const auto rep = vortex_avoidance_report(r, a);
    EXPECT_TRUE(rep.report.nested);
    EXPECT_TRUE(rep.report.monotone);
    EXPECT_TRUE(rep.report.bound_holds);
    for (std::size_t k = 1; k < rep.vorticity_fraction.size(); ++k)
        EXPECT_LE(rep.vorticity_fraction[k], rep.vorticity_fraction[k - 1]);
}

TEST(VortexWave, CsvSchemas) {
    VortexWaveOptions o;
    o.snapshots = 1;
    const auto r = simulate_vortex_wave(single(Vec{1.0, 0.0}, 0.5), Vec{0.0, 0.0}, o);
    std::ostringstream a, b;
    write_snapshots_csv(a, r);
    write_vortex_path_csv(b, r);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "t,id,x1,x2,omega");
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "t,z1,z2");
    EXPECT_EQ(a.str().substr(a.str().find('\n') + 1, 12), "0,0,1,0,0.5\n");
}
