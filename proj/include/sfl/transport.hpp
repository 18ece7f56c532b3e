#pragma once

// Backward semi-Lagrangian solver for u_t + b . grad u = 0 on a planar
// cell-centred grid, weak-form (renormalization) residuals against bumps,
// and the L^2 growth check d/dt int u^2 <= |div b|_inf int u^2.

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"
#include "sfl/distance.hpp"
#include "sfl/flow.hpp"
#include "sfl/vector_fields.hpp"

namespace sfl {

enum class Boundary { periodic, constant_extension };
enum class Interpolation { bilinear, cubic_limited };

struct TransportGrid {
    Box domain = Box::cube(2, -1, 1);
    int nx = 128, ny = 128;
    double horizon = 1.0;
    int steps = 64;
    Boundary boundary = Boundary::constant_extension;
    Interpolation interp = Interpolation::bilinear;
    /// max|b| h_t / h_x must not exceed this.
    double cfl_bound = 16.0;
    int store_every = 1;
    double delta_min = 1e-6;
    double c_step = 0.1;
    double h_floor = 1e-12;
};

struct ScalarField {
    Box domain;
    int nx = 0, ny = 0;
    double hx = 0, hy = 0;
    Boundary boundary = Boundary::constant_extension;
    Interpolation interp = Interpolation::bilinear;
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // [level][j * nx + i]
    /// Step at which a node was first held because its foot met the
    /// delta_min tube, -1 if never.
    std::vector<int> contaminated_at;
    std::vector<int> level_step;  // solver step of each stored level
    double dt = 0.0;

    std::size_t nodes() const { return std::size_t(nx) * std::size_t(ny); }
    Vec node(std::size_t k) const {
        const int i = int(k % std::size_t(nx)), j = int(k / std::size_t(nx));
        return Vec{domain.lo[0] + (i + 0.5) * hx, domain.lo[1] + (j + 0.5) * hy};
    }
    bool contaminated(std::size_t k, std::size_t level) const {
        return contaminated_at[k] >= 0 && contaminated_at[k] <= level_step[level];
    }
    std::size_t contaminated_count() const {
        return std::size_t(std::count_if(contaminated_at.begin(), contaminated_at.end(), [](int s) { return s >= 0; }));
    }
    double at(const std::vector<double>& v, int i, int j) const {
        if (boundary == Boundary::periodic) {
            i = ((i % nx) + nx) % nx;
            j = ((j % ny) + ny) % ny;
        } else {
            i = std::clamp(i, 0, nx - 1);
            j = std::clamp(j, 0, ny - 1);
        }
        return v[std::size_t(j) * std::size_t(nx) + std::size_t(i)];
    }
    double interpolate(const std::vector<double>& v, const Vec& p) const;
    double interpolate(std::size_t level, const Vec& p) const { return interpolate(values[level], p); }
};

namespace detail {

inline double catmull_rom(double p0, double p1, double p2, double p3, double f) {
    return p1 + 0.5 * f * (p2 - p0 + f * (2 * p0 - 5 * p1 + 4 * p2 - p3 + f * (3 * (p1 - p2) + p3 - p0)));
}

}  // namespace detail

inline double ScalarField::interpolate(const std::vector<double>& v, const Vec& p) const {
    double gx = (p[0] - domain.lo[0]) / hx - 0.5, gy = (p[1] - domain.lo[1]) / hy - 0.5;
    // feet that land on a node read it exactly
    if (std::abs(gx - std::round(gx)) < 1e-9) gx = std::round(gx);
    if (std::abs(gy - std::round(gy)) < 1e-9) gy = std::round(gy);
    const int i = int(std::floor(gx)), j = int(std::floor(gy));
    const double fx = gx - i, fy = gy - j;
    const double a = at(v, i, j), b = at(v, i + 1, j), c = at(v, i, j + 1), d = at(v, i + 1, j + 1);
    if (interp == Interpolation::bilinear) return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
    double rows[4];
    for (int r = 0; r < 4; ++r)
        rows[r] = detail::catmull_rom(at(v, i - 1, j - 1 + r), at(v, i, j - 1 + r), at(v, i + 1, j - 1 + r),
                                      at(v, i + 2, j - 1 + r), fx);
    const double cubic = detail::catmull_rom(rows[0], rows[1], rows[2], rows[3], fy);
    return std::clamp(cubic, std::min({a, b, c, d}), std::max({a, b, c, d}));
}

/// Foot of the characteristic through (t1, x) at time t0 < t1: RK4 substeps
/// under the same distance cap as the flow integrator. Returns false when
/// the path meets the delta_min tube or the step underflows.
inline bool characteristic_foot(const FieldSpec& b, const DistanceEvaluator* e, double t1, double t0, Vec& x,
                                const TransportGrid& g, double distance_speed) {
    double t = t1;
    while (t > t0) {
        double h = t - t0;
        if (e) {
            const double d = e->distance(DistanceKind::section, t, x);
            if (!(d > g.delta_min)) return false;
            Vec v;
            try {
                v = eval_field(b, t, x);
            } catch (const Error&) {
                return false;
            }
            const double cap = g.c_step * d / (std::max(1.0, distance_speed) + v.norm());
            if (cap < 0.99 * h) h = cap;
            if (h < g.h_floor) return false;
        }
        try {
            const Vec k1 = eval_field(b, t, x);
            const Vec k2 = eval_field(b, t - 0.5 * h, x - (0.5 * h) * k1);
            const Vec k3 = eval_field(b, t - 0.5 * h, x - (0.5 * h) * k2);
            const Vec k4 = eval_field(b, t - h, x - h * k3);
            x = x - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } catch (const Error&) {
            return false;
        }
        t = (h == t - t0) ? t0 : t - h;
    }
    if (e && !(e->distance(DistanceKind::section, t0, x) > g.delta_min)) return false;
    return true;
}

/// `singular` is the vortex set (or any set the field blows up on); pass
/// nullptr for smooth fields.
inline ScalarField solve_transport(const FieldSpec& b, const std::function<double(const Vec&)>& u0,
                                   const TransportGrid& g, const DistanceEvaluator* singular = nullptr) {
    if (b.dim != 2 || g.domain.dim() != 2) throw Error("transport solver is planar");
    if (g.nx < 2 || g.ny < 2 || g.steps < 1 || !(g.horizon > 0) || g.store_every < 1)
        throw Error("invalid transport grid");
    ScalarField u;
    u.domain = g.domain;
    u.nx = g.nx;
    u.ny = g.ny;
    u.hx = g.domain.width(0) / g.nx;
    u.hy = g.domain.width(1) / g.ny;
    u.boundary = g.boundary;
    u.interp = g.interp;
    u.dt = g.horizon / g.steps;
    const std::size_t N = u.nodes();
    u.contaminated_at.assign(N, -1);

    // cfl check on nodes clear of the singular set
    double vmax = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        const Vec x = u.node(k);
        for (int s = 0; s <= g.steps; s += std::max(1, g.steps / 8)) {
            const double t = s * u.dt;
            if (singular && singular->distance(DistanceKind::section, t, x) < 2 * std::max(u.hx, u.hy)) continue;
            try {
                vmax = std::max(vmax, eval_field(b, t, x).norm());
            } catch (const Error&) {
            }
        }
    }
    const double cfl = vmax * u.dt / std::min(u.hx, u.hy);
    if (cfl > g.cfl_bound)
        throw Error("cfl number " + format_double(cfl) + " exceeds the bound " + format_double(g.cfl_bound));
    const double speed = singular ? distance_time_speed(*singular, DistanceKind::section) : 1.0;

    std::vector<double> cur(N);
    for (std::size_t k = 0; k < N; ++k) cur[k] = u0(u.node(k));
    u.times.push_back(0.0);
    u.values.push_back(cur);
    u.level_step.push_back(0);
    std::vector<double> next(N);
    for (int s = 1; s <= g.steps; ++s) {
        const double t1 = s * u.dt, t0 = (s - 1) * u.dt;
        parallel_for(N, [&](std::size_t k) {
            if (u.contaminated_at[k] >= 0) {
                next[k] = cur[k];
                return;
            }
            Vec x = u.node(k);
            if (!characteristic_foot(b, singular, t1, t0, x, g, speed)) {
                u.contaminated_at[k] = s;
                next[k] = cur[k];
                return;
            }
            next[k] = u.interpolate(cur, x);
        });
        std::swap(cur, next);
        if (s % g.store_every == 0 || s == g.steps) {
            u.times.push_back(t1);
            u.values.push_back(cur);
            u.level_step.push_back(s);
        }
    }
    return u;
}

// ---------------------------------------------------------------------------
// Test functions: phi = eta(s), s = ((t - t0)/rt)^2 + |x - x0|^2 / rx^2,
// eta(s) = exp(-1 / (1 - s)) for s < 1.

struct TestFunction {
    double t0 = 0.5, rt = 0.4;
    Vec x0{0.0, 0.0};
    double rx = 0.5;
    std::string id = "phi";

    double s(double t, const Vec& x) const {
        const double a = (t - t0) / rt;
        return a * a + (x - x0).norm2() / (rx * rx);
    }
    double operator()(double t, const Vec& x) const {
        const double q = s(t, x);
        return q < 1 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
    }
    /// eta'(s) = -eta / (1 - s)^2
    double deta(double t, const Vec& x) const {
        const double q = s(t, x);
        if (q >= 1) return 0.0;
        return -std::exp(-1.0 / (1.0 - q)) / ((1 - q) * (1 - q));
    }
    double dt(double t, const Vec& x) const { return deta(t, x) * 2 * (t - t0) / (rt * rt); }
    Vec grad(double t, const Vec& x) const { return (deta(t, x) * 2 / (rx * rx)) * (x - x0); }
    bool supported(double t, const Vec& x) const { return s(t, x) < 1; }
};

struct Renormalizer {
    std::string name;
    std::function<double(double)> f, df;
};

inline Renormalizer beta_identity() {
    return {"z", [](double z) { return z; }, [](double) { return 1.0; }};
}
inline Renormalizer beta_square() {
    return {"z^2", [](double z) { return z * z; }, [](double z) { return 2 * z; }};
}
inline Renormalizer beta_cos() {
    return {"cos(z)", [](double z) { return std::cos(z); }, [](double z) { return -std::sin(z); }};
}

inline void check_test_function(const TestFunction& phi, const Box& domain, double horizon) {
    if (!(phi.rt > 0 && phi.rx > 0)) throw Error("test function radii must be positive");
    for (int i = 0; i < 2; ++i)
        if (!(phi.x0[i] - phi.rx > domain.lo[i] && phi.x0[i] + phi.rx < domain.hi[i]))
            throw Error("test function " + phi.id + " is not supported inside the domain");
    if (!(phi.t0 + phi.rt < horizon)) throw Error("test function " + phi.id + " reaches the final time");
}

/// | int int beta(u) (phi_t + b . grad phi + div b phi) + int beta(u0) phi(0) |
inline double renormalization_residual(const ScalarField& u, const FieldSpec& b, const Renormalizer& beta,
                                       const TestFunction& phi) {
    check_test_function(phi, u.domain, u.times.back());
    const std::size_t N = u.nodes(), L = u.times.size();
    std::vector<std::string> bad;
    std::vector<double> slab(L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        const double t = u.times[l];
        double acc = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const Vec x = u.node(k);
            if (!phi.supported(t, x)) continue;
            if (u.contaminated(k, l)) {
                if (bad.size() < 10) bad.push_back(std::to_string(k) + "@" + format_double(t));
                continue;
            }
            const double w = phi.dt(t, x) + eval_field(b, t, x).dot(phi.grad(t, x)) + field_divergence(b, t, x) * phi(t, x);
            acc += beta.f(u.values[l][k]) * w;
        }
        slab[l] = acc * u.hx * u.hy;
    }
    if (!bad.empty()) {
        std::string msg = "test function " + phi.id + " overlaps contaminated nodes:";
        for (const auto& s : bad) msg += " " + s;
        throw Error(msg);
    }
    double total = 0.0;
    for (std::size_t l = 0; l + 1 < L; ++l) total += 0.5 * (u.times[l + 1] - u.times[l]) * (slab[l] + slab[l + 1]);
    double initial = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        const Vec x = u.node(k);
        if (phi.supported(0.0, x)) initial += beta.f(u.values[0][k]) * phi(0.0, x);
    }
    return std::abs(total + initial * u.hx * u.hy);
}

// ---------------------------------------------------------------------------

struct GronwallRow {
    double t = 0.0, energy = 0.0, derivative = 0.0, rhs = 0.0, div_sup = 0.0;
};

struct GronwallReport {
    std::vector<GronwallRow> rows;
    /// max over stored intervals of E(t') / (E(t) exp(int |div b|_inf)) - 1,
    /// floored at 0.
    double max_violation = 0.0;
    bool contaminated = false;
};

inline GronwallReport gronwall_check(const ScalarField& u, const FieldSpec& b) {
    GronwallReport rep;
    rep.contaminated = u.contaminated_count() > 0;
    const std::size_t N = u.nodes(), L = u.times.size();
    for (std::size_t l = 0; l < L; ++l) {
        GronwallRow r;
        r.t = u.times[l];
        for (std::size_t k = 0; k < N; ++k) {
            if (u.contaminated(k, l)) continue;
            r.energy += u.values[l][k] * u.values[l][k];
            try {
                r.div_sup = std::max(r.div_sup, std::abs(field_divergence(b, r.t, u.node(k))));
            } catch (const Error&) {
            }
        }
        r.energy *= u.hx * u.hy;
        r.rhs = r.div_sup * r.energy;
        rep.rows.push_back(r);
    }
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t a = l == 0 ? 0 : l - 1, c = l + 1 < L ? l + 1 : l;
        if (c > a) rep.rows[l].derivative = (rep.rows[c].energy - rep.rows[a].energy) / (u.times[c] - u.times[a]);
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const auto &p = rep.rows[l], &q = rep.rows[l + 1];
        if (p.energy == 0.0) continue;
        const double allowed = p.energy * std::exp(0.5 * (q.t - p.t) * (p.div_sup + q.div_sup));
        rep.max_violation = std::max(rep.max_violation, q.energy / allowed - 1.0);
    }
    return rep;
}

/// Relative L^2 distance between a stored level and an exact solution.
inline double relative_l2_error(const ScalarField& u, std::size_t level, const std::function<double(const Vec&)>& exact) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < u.nodes(); ++k) {
        const double e = exact(u.node(k));
        num += (u.values[level][k] - e) * (u.values[level][k] - e);
        den += e * e;
    }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------------

struct RefinementRow {
    std::string beta, phi;
    double h = 0.0, residual = 0.0;
};

struct RefinementStudy {
    std::vector<RefinementRow> rows;
    double order = 0.0;       // least-squares slope of log residual vs log h
    double worst_order = kInf;  // smallest consecutive order
    bool decreasing = true;
};

/// Solves on grids refined by 2 in h_x and h_t together, starting at
/// `coarse`, and fits the residual decay for one (beta, phi) pair.
inline RefinementStudy refinement_study(const FieldSpec& b, const std::function<double(const Vec&)>& u0,
                                        TransportGrid coarse, int levels, const Renormalizer& beta,
                                        const TestFunction& phi, const DistanceEvaluator* singular = nullptr) {
    if (levels < 2) throw Error("refinement study needs two levels");
    RefinementStudy st;
    std::vector<double> lh, lr;
    for (int l = 0; l < levels; ++l) {
        const ScalarField u = solve_transport(b, u0, coarse, singular);
        RefinementRow row{beta.name, phi.id, u.hx, renormalization_residual(u, b, beta, phi)};
        if (!st.rows.empty()) {
            const auto& prev = st.rows.back();
            st.decreasing = st.decreasing && row.residual < prev.residual;
            st.worst_order = std::min(st.worst_order, std::log2(prev.residual / row.residual));
        }
        st.rows.push_back(row);
        lh.push_back(std::log(row.h));
        lr.push_back(std::log(std::max(row.residual, 1e-300)));
        coarse.nx *= 2;
        coarse.ny *= 2;
        coarse.steps *= 2;
        coarse.store_every = std::max(1, coarse.store_every);
    }
    st.order = least_squares(lh, lr).slope;
    return st;
}

inline void write_field_csv(std::ostream& os, const ScalarField& u, std::size_t stride = 1) {
    CsvWriter csv(os, {"t", "x1", "x2", "u"});
    stride = std::max<std::size_t>(1, stride);
    for (std::size_t l = 0; l < u.times.size(); ++l)
        for (int j = 0; j < u.ny; j += int(stride))
            for (int i = 0; i < u.nx; i += int(stride)) {
                const std::size_t k = std::size_t(j) * std::size_t(u.nx) + std::size_t(i);
                const Vec x = u.node(k);
                csv.row({u.times[l], x[0], x[1], u.values[l][k]});
            }
}

inline void write_residual_csv(std::ostream& os, const std::vector<RefinementRow>& rows) {
    CsvWriter csv(os, {"beta", "phi_id", "h", "residual"});
    for (const auto& r : rows) csv.row({r.beta, r.phi, r.h, r.residual});
}

inline void write_gronwall_csv(std::ostream& os, const GronwallReport& r) {
    CsvWriter csv(os, {"t", "integral_u2", "derivative", "rhs_bound"});
    for (const auto& row : r.rows) csv.row({row.t, row.energy, row.derivative, row.rhs});
}

}  // namespace sfl
