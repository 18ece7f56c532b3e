#pragma once

// Vortex-wave system: vorticity carried by particles (blob kernel among
// themselves) plus one point vortex z(t). Particles move with v + Gamma K(x - z),
// the vortex with v alone. Direct O(N^2) sums in fixed index order.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"
#include "sfl/distance.hpp"
#include "sfl/flow.hpp"
#include "sfl/vector_fields.hpp"

namespace sfl {

struct ParticleState {
    double t = 0.0;
    std::vector<Vec> p;
    std::vector<double> omega;
    Vec z{0.0, 0.0};
};

struct ParticleSet {
    std::vector<Vec> p;
    std::vector<double> omega;
    /// Lebesgue measure carried by each particle (its grid cell).
    std::vector<double> area;
    double spacing = 0.0;
};

/// Particles at cell centres of an n x n grid with omega_i = w(x_i) h^2;
/// cells where w vanishes carry no particle.
inline ParticleSet particles_from_grid(const Box& box, int n, const std::function<double(const Vec&)>& w) {
    if (box.dim() != 2 || n < 1) throw Error("particle grid must be planar and non-empty");
    ParticleSet s;
    const double hx = box.width(0) / n, hy = box.width(1) / n;
    s.spacing = std::min(hx, hy);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec x{box.lo[0] + (i + 0.5) * hx, box.lo[1] + (j + 0.5) * hy};
            const double v = w(x);
            if (v == 0.0) continue;
            s.p.push_back(x);
            s.omega.push_back(v * hx * hy);
            s.area.push_back(hx * hy);
        }
    return s;
}

struct VortexWaveOptions {
    double gamma = 1.0;
    bool normalized = false;
    double horizon = 1.0;
    double dt = 1e-2;
    int snapshots = 20;
    /// Negative means twice the particle spacing.
    double blob_radius = -1.0;
    double delta_min = 1e-6;
    double c_step = 0.1;
    double h_floor = 1e-12;
};

struct VortexWaveResult {
    VortexWaveOptions options;
    double blob_radius = 0.0;
    std::vector<ParticleState> snapshots;
    std::vector<double> z_times;
    std::vector<Vec> z_path;
    std::vector<double> area;
    std::vector<double> initial_distance, min_distance;
    std::vector<std::uint8_t> absorbed;
    /// Accepted steps where the vortex sat inside some particle's blob core.
    std::size_t core_warnings = 0;
    std::size_t steps = 0;
    bool underflow = false;
};

namespace detail {

inline double kernel_scale(bool normalized) { return normalized ? 1.0 / (2 * std::numbers::pi) : 1.0; }

/// c x^perp / (|x|^2 + rho^2)
inline Vec blob_kernel(const Vec& x, double rho, double c) { return (c / (x.norm2() + rho * rho)) * perp(x); }

struct WaveSystem {
    const std::vector<double>& omega;
    const std::vector<std::uint8_t>& frozen;
    double gamma, rho, c;

    // d/dt of (p_1..p_N, z)
    void rates(const std::vector<Vec>& p, const Vec& z, std::vector<Vec>& dp, Vec& dz) const {
        const std::size_t N = p.size();
        dp.resize(N);
        parallel_for(N, [&](std::size_t i) {
            if (frozen[i]) {
                dp[i] = Vec::zeros(2);
                return;
            }
            Vec v = Vec::zeros(2);
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) v += omega[j] * blob_kernel(p[i] - p[j], rho, c);
            dp[i] = v + gamma * blob_kernel(p[i] - z, 0.0, c);
        });
        dz = Vec::zeros(2);
        for (std::size_t j = 0; j < N; ++j) dz += omega[j] * blob_kernel(z - p[j], 0.0, c);
    }
};

inline double nearest_clearance(const std::vector<Vec>& p, const std::vector<std::uint8_t>& frozen, const Vec& z) {
    double d = kInf;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!frozen[i]) d = std::min(d, distance(p[i], z));
    return d;
}

}  // namespace detail

inline VortexWaveResult simulate_vortex_wave(const ParticleSet& init, const Vec& z0, const VortexWaveOptions& opt) {
    const std::size_t N = init.p.size();
    if (init.omega.size() != N || (!init.area.empty() && init.area.size() != N))
        throw Error("particle arrays disagree in length");
    if (z0.dim() != 2) throw Error("vortex-wave system is planar");
    if (!(opt.horizon > 0 && opt.dt > 0) || opt.snapshots < 1) throw Error("invalid vortex-wave time grid");
    VortexWaveResult r;
    r.options = opt;
    r.blob_radius = opt.blob_radius >= 0 ? opt.blob_radius : 2 * init.spacing;
    r.area = init.area.empty() ? std::vector<double>(N, 0.0) : init.area;
    r.absorbed.assign(N, 0);
    r.initial_distance.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        r.initial_distance[i] = distance(init.p[i], z0);
        if (!(r.initial_distance[i] > opt.delta_min)) throw Error("vortex starts inside the particle support floor");
    }
    r.min_distance = r.initial_distance;

    const detail::WaveSystem sys{init.omega, r.absorbed, opt.gamma, r.blob_radius, detail::kernel_scale(opt.normalized)};
    std::vector<Vec> p = init.p;
    Vec z = z0;
    double t = 0.0;
    r.snapshots.push_back({0.0, p, init.omega, z});
    r.z_times.push_back(0.0);
    r.z_path.push_back(z);

    std::vector<Vec> k1, k2, k3, k4, tmp(N);
    Vec l1, l2, l3, l4;
    for (int s = 1; s <= opt.snapshots; ++s) {
        const double t_next = opt.horizon * s / opt.snapshots;
        while (t < t_next) {
            sys.rates(p, z, k1, l1);
            double vmax = l1.norm();
            for (std::size_t i = 0; i < N; ++i) vmax = std::max(vmax, k1[i].norm());
            double h = std::min(opt.dt, t_next - t);
            const double clear = detail::nearest_clearance(p, r.absorbed, z);
            if (std::isfinite(clear)) h = std::min(h, opt.c_step * clear / (1.0 + vmax));
            if (h >= 0.99 * (t_next - t)) h = t_next - t;
            if (h < opt.h_floor) {
                r.underflow = true;
                for (std::size_t i = 0; i < N; ++i)
                    if (!r.absorbed[i] && distance(p[i], z) <= clear) r.absorbed[i] = 1;
                continue;
            }
            auto stage = [&](const std::vector<Vec>& k, const Vec& l, double a, std::vector<Vec>& kout, Vec& lout) {
                for (std::size_t i = 0; i < N; ++i) tmp[i] = p[i] + (a * h) * k[i];
                sys.rates(tmp, z + (a * h) * l, kout, lout);
            };
            stage(k1, l1, 0.5, k2, l2);
            stage(k2, l2, 0.5, k3, l3);
            stage(k3, l3, 1.0, k4, l4);
            for (std::size_t i = 0; i < N; ++i) p[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            z += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            t = (h == t_next - t) ? t_next : t + h;
            ++r.steps;
            bool in_core = false;
            for (std::size_t i = 0; i < N; ++i) {
                const double d = distance(p[i], z);
                if (d < r.blob_radius) in_core = true;
                if (r.absorbed[i]) continue;
                r.min_distance[i] = std::min(r.min_distance[i], d);
                if (d < opt.delta_min) r.absorbed[i] = 1;
            }
            if (in_core) ++r.core_warnings;
            r.z_times.push_back(t);
            r.z_path.push_back(z);
        }
        r.snapshots.push_back({t, p, init.omega, z});
    }
    return r;
}

inline double total_vorticity(const ParticleState& s) {
    double w = 0.0;
    for (double o : s.omega) w += o;
    return w;
}

/// Circulation-weighted centre of particles and vortex.
inline Vec vorticity_centroid(const ParticleState& s, double gamma) {
    Vec c = gamma * s.z;
    double w = gamma;
    for (std::size_t i = 0; i < s.p.size(); ++i) {
        c += s.omega[i] * s.p[i];
        w += s.omega[i];
    }
    if (w == 0.0) throw Error("zero total circulation has no centroid");
    return (1.0 / w) * c;
}

/// Period of the relative rotation of particle i about the vortex, from a
/// least-squares fit of the unwrapped angle over the snapshots.
inline double relative_rotation_period(const VortexWaveResult& r, std::size_t i) {
    std::vector<double> ts, angles;
    double prev = 0.0, offset = 0.0;
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        const Vec d = r.snapshots[k].p.at(i) - r.snapshots[k].z;
        double a = std::atan2(d[1], d[0]);
        if (k > 0) {
            while (a + offset - prev > std::numbers::pi) offset -= 2 * std::numbers::pi;
            while (a + offset - prev < -std::numbers::pi) offset += 2 * std::numbers::pi;
        }
        prev = a + offset;
        ts.push_back(r.snapshots[k].t);
        angles.push_back(prev);
    }
    const double w = least_squares(ts, angles).slope;
    return 2 * std::numbers::pi / std::abs(w);
}

/// 2 pi d^2 / (c (Gamma_1 + Gamma_2))
inline double two_vortex_period(double separation, double gamma_1, double gamma_2, bool normalized) {
    const double s = detail::kernel_scale(normalized) * (gamma_1 + gamma_2);
    if (s == 0.0) throw Error("a zero-total pair translates instead of rotating");
    return 2 * std::numbers::pi * separation * separation / std::abs(s);
}

/// Largest difference quotient of the computed vortex path.
inline double vortex_lipschitz(const VortexWaveResult& r) {
    double k = 0.0;
    for (std::size_t i = 1; i < r.z_path.size(); ++i)
        k = std::max(k, distance(r.z_path[i], r.z_path[i - 1]) / (r.z_times[i] - r.z_times[i - 1]));
    return k;
}

// ---------------------------------------------------------------------------
// Avoidance of the vortex path by particles: the flow-module statistics
// with S the graph of z(t), the sectional distance |x - z(t)|, weights the
// particle areas, and the field rebuilt from snapshots (linear in time).

struct VortexAvoidance {
    AvoidanceReport report;
    std::vector<double> vorticity_fraction;  // per ladder row
    double lipschitz = 0.0;
};

inline FieldSpec snapshot_field(const VortexWaveResult& r) {
    auto snaps = std::make_shared<const std::vector<ParticleState>>(r.snapshots);
    const double rho = r.blob_radius, c = detail::kernel_scale(r.options.normalized);
    Background v;
    v.name = "particles";
    v.dim = 2;
    v.eval = [snaps, rho, c](double t, const Vec& x) {
        const auto& s = *snaps;
        std::size_t k = 0;
        while (k + 2 < s.size() && s[k + 1].t <= t) ++k;
        const double span = s.size() > 1 ? s[k + 1].t - s[k].t : 1.0;
        const double a = s.size() > 1 ? std::clamp((t - s[k].t) / span, 0.0, 1.0) : 0.0;
        const ParticleState& lo = s[k];
        const ParticleState& hi = s.size() > 1 ? s[k + 1] : s[k];
        Vec out = Vec::zeros(2);
        for (std::size_t i = 0; i < lo.p.size(); ++i)
            out += lo.omega[i] * detail::blob_kernel(x - (lo.p[i] + a * (hi.p[i] - lo.p[i])), rho, c);
        return out;
    };
    v.divergence = [](double, const Vec&) { return 0.0; };
    return make_field(std::move(v), {VortexTerm{piecewise_linear_trajectory(r.z_times, r.z_path), r.options.gamma,
                                                r.options.normalized}},
                      r.options.horizon);
}

inline VortexAvoidance vortex_avoidance_report(const VortexWaveResult& r, AvoidanceOptions opt) {
    if (r.z_path.size() < 2) throw Error("vortex path has a single point");
    VortexAvoidance out;
    const FieldSpec b = snapshot_field(r);
    const DistanceEvaluator e(vortex_set(b));
    out.lipschitz = vortex_lipschitz(r);

    FlowEnsemble f;
    f.dim = 2;
    f.options.horizon = r.options.horizon;
    f.options.kind = DistanceKind::section;
    f.delta_min = r.options.delta_min;
    f.distance_speed = distance_time_speed(e, DistanceKind::section);
    const std::size_t N = r.snapshots.front().p.size();
    f.initial = r.snapshots.front().p;
    f.weights = r.area;
    for (const auto& s : r.snapshots) f.times.push_back(s.t);
    f.positions.assign(N, {});
    f.distances.assign(N, {});
    f.records.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        for (const auto& s : r.snapshots) {
            f.positions[i].push_back(s.p[i]);
            f.distances[i].push_back(distance(s.p[i], s.z));
        }
        auto& rec = f.records[i];
        rec.initial_distance = r.initial_distance[i];
        rec.min_distance = r.min_distance[i];
        if (r.absorbed[i]) rec.status = TrajectoryStatus::absorbed;
    }
    // the particle flow is divergence free
    if (!opt.compressibility) opt.compressibility = 1.0;
    out.report = avoidance_statistics(f, b, e, opt);

    double total = 0.0;
    for (double w : r.snapshots.front().omega) total += std::abs(w);
    for (const auto& row : out.report.rows) {
        double w = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            if (r.initial_distance[i] >= opt.r0 && (r.min_distance[i] < row.delta || r.absorbed[i]))
                w += std::abs(r.snapshots.front().omega[i]);
        out.vorticity_fraction.push_back(total > 0 ? w / total : 0.0);
    }
    return out;
}

inline void write_snapshots_csv(std::ostream& os, const VortexWaveResult& r) {
    CsvWriter csv(os, {"t", "id", "x1", "x2", "omega"});
    for (const auto& s : r.snapshots)
        for (std::size_t i = 0; i < s.p.size(); ++i) csv.row({s.t, (long long)i, s.p[i][0], s.p[i][1], s.omega[i]});
}

inline void write_vortex_path_csv(std::ostream& os, const VortexWaveResult& r) {
    CsvWriter csv(os, {"t", "z1", "z2"});
    for (std::size_t k = 0; k < r.z_path.size(); ++k) csv.row({r.z_times[k], r.z_path[k][0], r.z_path[k][1]});
}

}  // namespace sfl
