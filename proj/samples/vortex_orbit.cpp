// A point vortex and one vorticity particle orbit their common centroid.
#include <cstdio>

#include "sfl/vortex_wave.hpp"

using namespace sfl;

int main() {
    ParticleSet s;
    s.p = {Vec{1.0, 0.0}};
    s.omega = {0.5};
    s.area = {0.0};

    VortexWaveOptions o;
    o.gamma = 1.0;
    const double period = two_vortex_period(1.0, o.gamma, 0.5, false);
    o.horizon = period;
    o.snapshots = 8;
    const auto r = simulate_vortex_wave(s, Vec{0.0, 0.0}, o);

    std::printf("%8s %10s %10s %10s %10s\n", "t", "z1", "z2", "x1", "x2");
    for (const auto& st : r.snapshots)
        std::printf("%8.4f %10.6f %10.6f %10.6f %10.6f\n", st.t, st.z[0], st.z[1], st.p[0][0], st.p[0][1]);
    std::printf("period: fitted %.6f, closed form %.6f\n", relative_rotation_period(r, 0), period);
}
