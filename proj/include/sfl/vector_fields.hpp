#pragma once

// Singular vector fields b = v + sum of point-vortex terms, the normal
// component b . grad d_S, mixed Lebesgue norms with excision around S and
// the well-posedness checks built from them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"
#include "sfl/dimension.hpp"
#include "sfl/distance.hpp"
#include "sfl/fractal_sets.hpp"

namespace sfl {

// ---------------------------------------------------------------------------
// Vortex trajectories t -> z(t) in the plane.

enum class TrajectoryKind { fixed, circular, piecewise_linear, drift };

struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::fixed;
    Vec origin{0.0, 0.0};  // fixed point, circle centre, or drift start
    double radius = 0.0;
    double angular_speed = 0.0;
    double phase = 0.0;
    std::vector<double> knot_times;  // piecewise linear
    std::vector<Vec> knots;
    Vec direction{1.0, 0.0};  // drift: origin + t^exponent * direction
    double exponent = 1.0;

    Vec position(double t) const {
        switch (kind) {
            case TrajectoryKind::fixed: return origin;
            case TrajectoryKind::circular: {
                const double a = angular_speed * t + phase;
                return origin + radius * Vec{std::cos(a), std::sin(a)};
            }
            case TrajectoryKind::piecewise_linear: {
                if (t <= knot_times.front()) return knots.front();
                if (t >= knot_times.back()) return knots.back();
                const auto it = std::upper_bound(knot_times.begin(), knot_times.end(), t);
                const std::size_t k = std::size_t(it - knot_times.begin());
                const double s = (t - knot_times[k - 1]) / (knot_times[k] - knot_times[k - 1]);
                return knots[k - 1] + s * (knots[k] - knots[k - 1]);
            }
            case TrajectoryKind::drift: return origin + std::pow(std::max(t, 0.0), exponent) * direction;
        }
        return origin;
    }

    double holder_exponent() const { return kind == TrajectoryKind::drift ? exponent : 1.0; }

    double holder_constant() const {
        switch (kind) {
            case TrajectoryKind::fixed: return 0.0;
            case TrajectoryKind::circular: return radius * std::abs(angular_speed);
            case TrajectoryKind::piecewise_linear: {
                double k = 0.0;
                for (std::size_t i = 1; i < knots.size(); ++i)
                    k = std::max(k, distance(knots[i], knots[i - 1]) / (knot_times[i] - knot_times[i - 1]));
                return k;
            }
            case TrajectoryKind::drift: return direction.norm();
        }
        return 0.0;
    }

    /// Bound on |z(s) - z((a+b)/2)| for s in [a, b].
    double sweep(double a, double b) const {
        if (kind == TrajectoryKind::drift) {
            const double lo = std::max(a, 0.0), hi = std::max(b, 0.0), c = 0.5 * (lo + hi);
            const double e = exponent, m = direction.norm();
            return m * std::max(std::pow(c, e) - std::pow(lo, e), std::pow(hi, e) - std::pow(c, e));
        }
        return holder_constant() * 0.5 * (b - a);
    }
};

inline Trajectory fixed_trajectory(const Vec& p) {
    Trajectory z;
    z.origin = p;
    return z;
}

inline Trajectory circular_trajectory(const Vec& centre, double radius, double angular_speed, double phase = 0.0) {
    if (!(radius >= 0)) throw Error("circle radius must be non-negative");
    Trajectory z;
    z.kind = TrajectoryKind::circular;
    z.origin = centre;
    z.radius = radius;
    z.angular_speed = angular_speed;
    z.phase = phase;
    return z;
}

inline Trajectory piecewise_linear_trajectory(std::vector<double> times, std::vector<Vec> points) {
    if (times.size() < 2 || times.size() != points.size()) throw Error("piecewise-linear path needs >= 2 knots");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw Error("knot times must increase");
    for (const auto& p : points)
        if (p.dim() != 2) throw Error("vortex trajectories live in the plane");
    Trajectory z;
    z.kind = TrajectoryKind::piecewise_linear;
    z.knot_times = std::move(times);
    z.knots = std::move(points);
    z.origin = z.knots.front();
    return z;
}

inline Trajectory drift_trajectory(const Vec& start, const Vec& direction, double exponent) {
    if (!(exponent > 0 && exponent <= 1)) throw Error("drift exponent must lie in (0, 1]");
    Trajectory z;
    z.kind = TrajectoryKind::drift;
    z.origin = start;
    z.direction = direction;
    z.exponent = exponent;
    return z;
}

// ---------------------------------------------------------------------------
// Background fields.

struct Background {
    std::string name = "zero";
    int dim = 2;
    std::function<Vec(double, const Vec&)> eval;
    std::function<double(double, const Vec&)> divergence;
    /// sup |v| over space-time when known.
    std::optional<double> sup_norm;
};

inline Background zero_background(int n = 2) {
    return {"zero", n, [n](double, const Vec&) { return Vec::zeros(n); }, [](double, const Vec&) { return 0.0; },
            0.0};
}

/// v = omega (-x2, x1).
inline Background rotation_background(double omega = 1.0) {
    return {"rotation", 2, [omega](double, const Vec& x) { return omega * perp(x); },
            [](double, const Vec&) { return 0.0; }, std::nullopt};
}

inline Background uniform_background(const Vec& c) {
    return {"uniform", c.dim(), [c](double, const Vec&) { return c; }, [](double, const Vec&) { return 0.0; },
            c.norm()};
}

/// v = (a x1, 0, ..., 0); divergence a.
inline Background linear_background(double a, int n = 2) {
    return {"linear", n,
            [a](double, const Vec& x) {
                Vec v = Vec::zeros(x.dim());
                v[0] = a * x[0];
                return v;
            },
            [a](double, const Vec&) { return a; }, std::nullopt};
}

/// v = x / |x|; divergence (n - 1) / |x|.
inline Background radial_background(int n = 2) {
    return {"radial", n,
            [](double, const Vec& x) {
                const double r = x.norm();
                if (r == 0.0) throw Error("singular point");
                return (1.0 / r) * x;
            },
            [n](double, const Vec& x) {
                const double r = x.norm();
                if (r == 0.0) throw Error("singular point");
                return double(n - 1) / r;
            },
            1.0};
}

/// Values on an (nx x ny) grid over a box, bilinear in between, clamped to
/// the box outside. values[j * nx + i] is the vector at node (i, j).
inline Background table_background(const Box& box, int nx, int ny, std::vector<Vec> values) {
    if (box.dim() != 2) throw Error("table background is planar");
    if (nx < 2 || ny < 2 || values.size() != std::size_t(nx) * std::size_t(ny))
        throw Error("table background needs nx*ny >= 4 values");
    struct Cell {
        int i, j;
        double s, u;
    };
    const double hx = box.width(0) / (nx - 1), hy = box.width(1) / (ny - 1);
    auto locate = [=](const Vec& x) {
        const double gx = std::clamp((x[0] - box.lo[0]) / hx, 0.0, double(nx - 1));
        const double gy = std::clamp((x[1] - box.lo[1]) / hy, 0.0, double(ny - 1));
        const int i = std::min(int(gx), nx - 2), j = std::min(int(gy), ny - 2);
        return Cell{i, j, gx - i, gy - j};
    };
    auto at = [values, nx](int i, int j) { return values[std::size_t(j) * std::size_t(nx) + std::size_t(i)]; };
    double sup = 0.0;
    for (const auto& v : values) sup = std::max(sup, v.norm());
    Background b;
    b.name = "table";
    b.dim = 2;
    b.sup_norm = sup;
    b.eval = [=](double, const Vec& x) {
        const Cell c = locate(x);
        return (1 - c.s) * (1 - c.u) * at(c.i, c.j) + c.s * (1 - c.u) * at(c.i + 1, c.j) +
               (1 - c.s) * c.u * at(c.i, c.j + 1) + c.s * c.u * at(c.i + 1, c.j + 1);
    };
    b.divergence = [=](double, const Vec& x) {
        const Cell c = locate(x);
        const bool in_x = x[0] > box.lo[0] && x[0] < box.hi[0];
        const bool in_y = x[1] > box.lo[1] && x[1] < box.hi[1];
        const double dvx = ((1 - c.u) * (at(c.i + 1, c.j)[0] - at(c.i, c.j)[0]) +
                            c.u * (at(c.i + 1, c.j + 1)[0] - at(c.i, c.j + 1)[0])) / hx;
        const double dvy = ((1 - c.s) * (at(c.i, c.j + 1)[1] - at(c.i, c.j)[1]) +
                            c.s * (at(c.i + 1, c.j + 1)[1] - at(c.i + 1, c.j)[1])) / hy;
        return (in_x ? dvx : 0.0) + (in_y ? dvy : 0.0);
    };
    return b;
}

// ---------------------------------------------------------------------------
// Field specification.

struct VortexTerm {
    Trajectory path;
    double circulation = 1.0;
    /// Multiply the kernel by 1 / (2 pi).
    bool normalized = false;
};

struct FieldSpec {
    Background background = zero_background();
    std::vector<VortexTerm> vortices;
    int dim = 2;
    double horizon = 1.0;
    /// Structural assertion that b is BV away from the vortex trajectories;
    /// set by the construction recipe, never computed.
    bool bv_off_singular_set = true;
};

inline FieldSpec make_field(Background v, std::vector<VortexTerm> vortices = {}, double horizon = 1.0) {
    if (!v.eval || !v.divergence) throw Error("background needs a value and a divergence evaluator");
    if (!vortices.empty() && v.dim != 2) throw Error("vortex terms need n = 2");
    for (const auto& w : vortices)
        if (w.path.origin.dim() != 2) throw Error("vortex trajectories live in the plane");
    if (!(horizon > 0)) throw Error("horizon must be positive");
    FieldSpec b;
    b.dim = v.dim;
    b.background = std::move(v);
    b.vortices = std::move(vortices);
    b.horizon = horizon;
    return b;
}

inline FieldSpec make_point_vortex_field(const Trajectory& z, double circulation, Background v = zero_background(),
                                         bool normalized = false, double horizon = 1.0) {
    return make_field(std::move(v), {VortexTerm{z, circulation, normalized}}, horizon);
}

/// Gamma c (x - z)^perp / |x - z|^2 with c = 1 or 1 / (2 pi).
inline Vec vortex_velocity(const VortexTerm& w, double t, const Vec& x) {
    const Vec r = x - w.path.position(t);
    const double r2 = r.norm2();
    if (r2 == 0.0) throw Error("singular point");
    const double c = w.normalized ? 0.5 / std::numbers::pi : 1.0;
    return (w.circulation * c / r2) * perp(r);
}

inline Vec eval_field(const FieldSpec& b, double t, const Vec& x) {
    if (x.dim() != b.dim) throw Error("field evaluated at a point of the wrong dimension");
    Vec v = b.background.eval(t, x);
    for (const auto& w : b.vortices) v += vortex_velocity(w, t, x);
    return v;
}

/// Analytic divergence: the vortex kernels are divergence-free off their
/// trajectories.
inline double field_divergence(const FieldSpec& b, double t, const Vec& x) {
    for (const auto& w : b.vortices)
        if (x == w.path.position(t)) throw Error("singular point");
    return b.background.divergence(t, x);
}

/// Fourth-order central-difference divergence with step h.
inline double fd_divergence(const FieldSpec& b, double t, const Vec& x, double h = 1e-4) {
    double div = 0.0;
    for (int i = 0; i < b.dim; ++i) {
        const Vec e = Vec::unit(b.dim, i);
        const double p1 = eval_field(b, t, x + h * e)[i], m1 = eval_field(b, t, x - h * e)[i];
        const double p2 = eval_field(b, t, x + 2 * h * e)[i], m2 = eval_field(b, t, x - 2 * h * e)[i];
        div += (8 * (p1 - m1) - (p2 - m2)) / (12 * h);
    }
    return div;
}

/// Space-time set traced by the vortex trajectories over [0, horizon].
inline SpaceTimeSet vortex_set(const FieldSpec& b, GraphOptions opt = {}) {
    if (b.vortices.empty()) throw Error("field has no vortices");
    InitialSet s0;
    s0.generator_tag = "vortex_origins";
    s0.ambient_dim = 2;
    double alpha = 1.0, k = 0.0;
    for (const auto& w : b.vortices) alpha = std::min(alpha, w.path.holder_exponent());
    for (const auto& w : b.vortices) {
        s0.points.push_back(w.path.position(0.0));
        // |dt| <= |dt|^alpha T^(1 - alpha) for |dt| <= T
        k = std::max(k, w.path.holder_constant() * std::pow(b.horizon, w.path.holder_exponent() - alpha));
    }
    for (std::size_t i = 0; i < s0.points.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (s0.points[i] == s0.points[j]) throw Error("vortices start at the same point");
    s0.theoretical_dim = 0.0;
    s0.finest_scale = 0.0;

    const std::vector<Trajectory> paths = [&] {
        std::vector<Trajectory> p;
        for (const auto& w : b.vortices) p.push_back(w.path);
        return p;
    }();
    const std::vector<Vec> starts = s0.points;
    auto which = [starts](const Vec& x) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < starts.size(); ++i)
            if (distance(x, starts[i]) < distance(x, starts[best])) best = i;
        return best;
    };
    TrajectoryBundle bundle;
    bundle.map = [paths, which](double t, const Vec& x) { return paths[which(x)].position(t); };
    bundle.holder_exponent = alpha;
    bundle.holder_constant = k;
    bundle.horizon = b.horizon;
    bundle.tag = "vortex";
    bundle.sweep = [paths, which](double lo, double hi, const Vec& x) { return paths[which(x)].sweep(lo, hi); };
    if (paths.size() == 1) {
        const Trajectory z = paths.front();
        const Vec z0 = z.position(0.0);
        bundle.shift = [z, z0](double t, int) { return z.position(t) - z0; };
    }
    return make_graph(s0, bundle, opt);
}

// ---------------------------------------------------------------------------
// Normal component b . grad d.

struct NormalOptions {
    DistanceKind kind = DistanceKind::section;
    /// Finite-difference step; 0 means d / 100. Explicit steps are capped at d / 4.
    double step = 0.0;
    double delta_min = 0.0;
    /// Accepted deviation of |grad d| from 1.
    double gradient_tolerance = 1e-3;
};

struct NormalComponent {
    double value = 0.0;
    double distance = 0.0;
    Vec gradient;
    /// grad d looked non-differentiable; value is the smaller one-sided choice.
    bool one_sided = false;
};

inline NormalComponent normal_component(const FieldSpec& b, const DistanceEvaluator& e, double t, const Vec& x,
                                        const NormalOptions& opt = {}) {
    const int n = b.dim;
    auto d = [&](const Vec& y) { return e.distance(opt.kind, t, y); };
    NormalComponent out;
    out.distance = d(x);
    if (!(out.distance > opt.delta_min)) throw Error("distance floor breached");
    const Vec v = eval_field(b, t, x);
    const double h = opt.step > 0 ? std::min(opt.step, out.distance / 4) : out.distance / 100;

    // fourth-order central differences
    Vec g(n), fwd(n), bwd(n);
    for (int i = 0; i < n; ++i) {
        const Vec ei = Vec::unit(n, i);
        const double p1 = d(x + h * ei), m1 = d(x - h * ei);
        const double p2 = d(x + 2 * h * ei), m2 = d(x - 2 * h * ei);
        g[i] = (8 * (p1 - m1) - (p2 - m2)) / (12 * h);
        fwd[i] = (p1 - out.distance) / h;
        bwd[i] = (out.distance - m1) / h;
    }
    out.gradient = g;
    out.value = v.dot(g);
    if (std::abs(g.norm() - 1.0) > opt.gradient_tolerance) {
        out.one_sided = true;
        const double a = v.dot(fwd), c = v.dot(bwd);
        if (std::abs(a) <= std::abs(c)) {
            out.value = a;
            out.gradient = fwd;
        } else {
            out.value = c;
            out.gradient = bwd;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixed norms (int (int |f|^q dx)^(p/q) dt)^(1/p) over domain minus the tube
// {d < excision}. Spatial integrals use Monte Carlo with a defensive mixture:
// uniform over the domain plus log-uniform radii around section points.

struct Excision {
    const DistanceEvaluator* set = nullptr;
    double outer = 1e-2;
    double inner = 1e-3;
    DistanceKind kind = DistanceKind::section;
};

struct MixedNormOptions {
    std::size_t samples = 40000;  // per time
    std::uint64_t seed = 0;
    double uniform_share = 0.5;
    std::size_t max_anchors = 64;
};

struct MixedNorm {
    double p = 1.0, q = 1.0;
    double value = 0.0;           // at the outer excision radius
    double value_inner = 0.0;     // at the inner radius
    double outer = 0.0, inner = 0.0;
    double relative_growth = 0.0; // value_inner / value - 1
    double standard_error = 0.0;  // of value, propagated from the spatial sums
};

namespace detail {

struct SpatialSums {
    double outer = 0.0, inner = 0.0;        // integral of |f|^q or sup |f|
    double outer_se = 0.0, inner_se = 0.0;
};

template <class F>
SpatialSums spatial_norm(F& f, double q, double t, const Box& domain, const Excision* ex, const MixedNormOptions& opt,
                         std::uint64_t stream) {
    const int n = domain.dim();
    const double V = domain.volume();
    std::vector<Vec> anchors;
    if (ex && ex->set) {
        if (ex->set->section_nonempty(t)) anchors = temporal_section(ex->set->set(), t);
    }
    const bool use_anchors = !anchors.empty() && anchors.size() <= opt.max_anchors;
    const double wu = use_anchors ? opt.uniform_share : 1.0;
    const double lo_r = ex ? ex->inner : 0.0;
    const double hi_r = std::max(domain.width(0), 1e-300);
    const double log_span = use_anchors ? std::log(hi_r / lo_r) : 1.0;
    const double sphere = use_anchors ? unit_sphere_area(n) : 1.0;

    std::vector<double> c_out(opt.samples, 0.0), c_in(opt.samples, 0.0);
    parallel_for(opt.samples, [&](std::size_t i) {
        CounterRng rng(opt.seed, stream, i);
        Vec x;
        if (rng.uniform() < wu) {
            x = rng.uniform_in(domain);
        } else {
            const Vec& a = anchors[std::size_t(rng.uniform() * double(anchors.size())) % anchors.size()];
            const double r = lo_r * std::exp(log_span * rng.uniform());
            Vec dir(n);
            double nn = 0;
            while (nn < 1e-12) {
                for (int k = 0; k < n; ++k) dir[k] = rng.normal();
                nn = dir.norm();
            }
            x = a + (r / nn) * dir;
        }
        if (!domain.contains(x)) return;
        double dist = kInf;
        if (ex && ex->set) {
            dist = ex->set->distance(ex->kind, t, x);
            if (dist < ex->inner) return;
        }
        const double fx = std::abs(f(t, x));
        if (!std::isfinite(fx)) throw Error("non-finite integrand outside the excised tube");
        if (std::isinf(q)) {
            c_in[i] = fx;
            if (dist >= (ex ? ex->outer : 0.0)) c_out[i] = fx;
            return;
        }
        double dens = wu / V;
        if (use_anchors) {
            double qa = 0.0;
            for (const auto& a : anchors) {
                const double r = distance(x, a);
                if (r >= lo_r && r <= hi_r) qa += 1.0 / (log_span * sphere * std::pow(r, double(n)));
            }
            dens += (1.0 - wu) * qa / double(anchors.size());
        }
        const double w = std::pow(fx, q) / dens;
        c_in[i] = w;
        if (dist >= (ex ? ex->outer : 0.0)) c_out[i] = w;
    });
    SpatialSums s;
    const double N = double(opt.samples);
    if (std::isinf(q)) {
        for (std::size_t i = 0; i < opt.samples; ++i) {
            s.outer = std::max(s.outer, c_out[i]);
            s.inner = std::max(s.inner, c_in[i]);
        }
        return s;
    }
    auto mean_se = [N](const std::vector<double>& c, double& m, double& se) {
        double a = 0, b = 0;
        for (double v : c) {
            a += v;
            b += v * v;
        }
        m = a / N;
        se = std::sqrt(std::max(0.0, b / N - m * m) / N);
    };
    mean_se(c_out, s.outer, s.outer_se);
    mean_se(c_in, s.inner, s.inner_se);
    return s;
}

// (int g(t)^(p/q) dt)^(1/p) by the trapezoid rule on the grid; g holds
// spatial integrals of |f|^q (or sups when q = inf).
inline double time_norm(const std::vector<double>& t, const std::vector<double>& g, double p, double q) {
    std::vector<double> s(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) s[k] = std::isinf(q) ? g[k] : std::pow(g[k], 1.0 / q);
    if (std::isinf(p)) return *std::max_element(s.begin(), s.end());
    if (t.size() == 1) return s.front();
    double acc = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        acc += 0.5 * (t[k] - t[k - 1]) * (std::pow(s[k - 1], p) + std::pow(s[k], p));
    return std::pow(acc, 1.0 / p);
}

}  // namespace detail

template <class F>
MixedNorm mixed_norm_estimate(F&& f, double p, double q, const Box& domain, const std::vector<double>& t_grid,
                              const Excision* excise = nullptr, const MixedNormOptions& opt = {}) {
    if (!(p >= 1 && q >= 1)) throw Error("mixed norm exponents must lie in [1, inf]");
    if (t_grid.empty()) throw Error("empty time grid");
    for (std::size_t k = 1; k < t_grid.size(); ++k)
        if (!(t_grid[k] > t_grid[k - 1])) throw Error("time grid must increase");
    if (excise && !(excise->outer > excise->inner && excise->inner > 0)) throw Error("excision needs outer > inner > 0");
    std::vector<double> g_out, g_in, se_out;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const auto s = detail::spatial_norm(f, q, t_grid[k], domain, excise, opt, mix_keys(0x3a0d, key_of(t_grid[k])));
        g_out.push_back(s.outer);
        g_in.push_back(s.inner);
        se_out.push_back(s.outer_se);
    }
    MixedNorm m;
    m.p = p;
    m.q = q;
    m.value = detail::time_norm(t_grid, g_out, p, q);
    m.value_inner = detail::time_norm(t_grid, g_in, p, q);
    if (excise) {
        m.outer = excise->outer;
        m.inner = excise->inner;
    } else {
        m.value_inner = m.value;
    }
    m.relative_growth = m.value > 0 ? m.value_inner / m.value - 1.0 : (m.value_inner > 0 ? kInf : 0.0);
    if (!std::isinf(q)) {
        // first-order propagation through the q-th root, worst time sample
        double rel = 0.0;
        for (std::size_t k = 0; k < g_out.size(); ++k)
            if (g_out[k] > 0) rel = std::max(rel, se_out[k] / g_out[k] / q);
        m.standard_error = rel * m.value;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Well-posedness report.

enum class ConditionStatus { satisfied, violated, unverifiable_numerically };

inline const char* to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::satisfied: return "satisfied";
        case ConditionStatus::violated: return "violated";
        case ConditionStatus::unverifiable_numerically: return "unverifiable_numerically";
    }
    return "?";
}

struct ConditionEntry {
    std::string name;
    ConditionStatus status = ConditionStatus::unverifiable_numerically;
    double value = 0.0;
    double value_inner = 0.0;
    double p = 0.0, q = 0.0;
    std::string note;
};

struct TrajectoryThreshold {
    /// 1/q + 1/(a_H (n - sup dim)) < 1 holds iff q > q_bar.
    double q_bar = kInf;
    bool satisfiable = false;
};

/// Exact threshold; a_H (n - dim) <= 1 leaves no admissible q.
inline TrajectoryThreshold trajectory_threshold(double holder_exponent, int n, double sup_section_dim) {
    if (!(holder_exponent > 0 && holder_exponent <= 1)) throw Error("hoelder exponent must lie in (0, 1]");
    if (!(sup_section_dim >= 0 && sup_section_dim <= n)) throw Error("section dimension outside [0, n]");
    const double s = holder_exponent * (double(n) - sup_section_dim);
    TrajectoryThreshold r;
    if (s <= 1.0) return r;
    r.satisfiable = true;
    r.q_bar = s / (s - 1.0);
    return r;
}

struct ConditionReport {
    std::vector<ConditionEntry> entries;
    TrajectoryThreshold threshold;

    const ConditionEntry& at(const std::string& name) const {
        for (const auto& c : entries)
            if (c.name == name) return c;
        throw Error("no condition named " + name);
    }
    bool all_hold() const {
        for (const auto& c : entries)
            if (c.status == ConditionStatus::violated) return false;
        return true;
    }
};

struct WellposednessOptions {
    Box domain = Box::cube(2, -1, 1);
    std::vector<double> t_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    double excision_outer = 1e-2;
    double excision_inner = 1e-3;
    /// A norm whose value grows by more than this between the two excision
    /// radii is read as divergent.
    double growth_tolerance = 0.25;
    /// Norm values below this are finite-difference noise and count as zero.
    double noise_floor = 1e-4;
    MixedNormOptions norm;
    PrintOptions print;
    NormalOptions normal;
};

struct KnownDims {
    double holder_exponent = 1.0;
    double sup_section_dim = 0.0;
};

namespace detail {
inline ConditionEntry norm_entry(std::string name, const MixedNorm& m, double tol, double floor, std::string note) {
    ConditionEntry c;
    c.name = std::move(name);
    c.value = m.value;
    c.value_inner = m.value_inner;
    c.p = m.p;
    c.q = m.q;
    const bool finite = std::isfinite(m.value) && std::isfinite(m.value_inner);
    const bool stable = m.relative_growth <= tol || m.value_inner - m.value <= floor;
    c.status = finite && stable ? ConditionStatus::satisfied : ConditionStatus::violated;
    c.note = std::move(note);
    return c;
}
}  // namespace detail

inline ConditionReport wellposedness_check(const FieldSpec& b, const DistanceEvaluator& s, double p, double q,
                                           const KnownDims& dims, const WellposednessOptions& opt = {}) {
    if (!(p >= 1 && q >= 1)) throw Error("exponents must lie in [1, inf]");
    ConditionReport rep;
    const Excision ex{&s, opt.excision_outer, opt.excision_inner, opt.normal.kind};
    auto field_norm = [&](double t, const Vec& x) { return eval_field(b, t, x).norm(); };

    const MixedNorm l1 = mixed_norm_estimate(field_norm, 1.0, 1.0, opt.domain, opt.t_grid, &ex, opt.norm);
    rep.entries.push_back(detail::norm_entry("local_integrability", l1, opt.growth_tolerance, opt.noise_floor, "L1 on the domain"));

    {
        ConditionEntry c;
        c.name = "bounded_divergence";
        c.p = 1.0;
        c.q = kInf;
        std::vector<double> sups;
        for (double t : opt.t_grid) {
            double m = 0.0;
            for (std::size_t i = 0; i < opt.norm.samples / 8; ++i) {
                CounterRng rng(opt.norm.seed, mix_keys(0xd1f, key_of(t)), i);
                const Vec x = rng.uniform_in(opt.domain);
                if (s.distance(ex.kind, t, x) < ex.inner) continue;
                m = std::max(m, std::abs(field_divergence(b, t, x)));
            }
            sups.push_back(m);
        }
        c.value = c.value_inner = detail::time_norm(opt.t_grid, sups, 1.0, kInf);
        c.status = std::isfinite(c.value) ? ConditionStatus::satisfied : ConditionStatus::violated;
        c.note = "vortex kernels divergence-free; background divergence sampled";
        rep.entries.push_back(c);
    }

    auto damped = [&](double t, const Vec& x) { return eval_field(b, t, x).norm() / (1.0 + x.norm()); };
    const MixedNorm gr = mixed_norm_estimate(damped, 1.0, 1.0, opt.domain, opt.t_grid, &ex, opt.norm);
    rep.entries.push_back(detail::norm_entry("growth", gr, opt.growth_tolerance, opt.noise_floor,
                                             "checked on the configured domain only"));

    {
        ConditionEntry c;
        c.name = "bv_off_singular_set";
        c.status = ConditionStatus::unverifiable_numerically;
        c.note = b.bv_off_singular_set ? "declared by the field recipe" : "not declared by the field recipe";
        rep.entries.push_back(c);
    }

    {
        auto normal = [&](double t, const Vec& x) { return normal_component(b, s, t, x, opt.normal).value; };
        const MixedNorm nm = mixed_norm_estimate(normal, p, q, opt.domain, opt.t_grid, &ex, opt.norm);
        ConditionEntry c = detail::norm_entry("normal_component_and_print", nm, opt.growth_tolerance, opt.noise_floor, "");
        const double qs = conjugate_exponent(q), ps = conjugate_exponent(p);
        const PrintVerdict pv = print_membership(s, qs, ps, opt.domain, opt.print);
        c.note = "print alpha=" + format_double(qs) + " beta=" + format_double(ps) + " " + to_string(pv.verdict);
        if (pv.verdict == Verdict::non_member) c.status = ConditionStatus::violated;
        if (pv.verdict == Verdict::inconclusive && c.status == ConditionStatus::satisfied)
            c.status = ConditionStatus::unverifiable_numerically;
        rep.entries.push_back(c);
    }

    {
        rep.threshold = trajectory_threshold(dims.holder_exponent, b.dim, dims.sup_section_dim);
        ConditionEntry c;
        c.name = "trajectory_threshold";
        c.value = rep.threshold.q_bar;
        c.value_inner = rep.threshold.q_bar;
        c.p = 1.0;
        c.q = q;
        if (!rep.threshold.satisfiable) {
            c.status = ConditionStatus::violated;
            c.note = "condition unsatisfiable";
        } else {
            c.status = q > rep.threshold.q_bar ? ConditionStatus::satisfied : ConditionStatus::violated;
            c.note = "holds iff q > " + format_double(rep.threshold.q_bar);
        }
        rep.entries.push_back(c);
    }
    return rep;
}

inline void write_report_csv(std::ostream& os, const ConditionReport& r) {
    CsvWriter csv(os, {"condition", "status", "value", "value_inner", "p", "q", "note"});
    for (const auto& c : r.entries)
        csv.row({c.name, std::string(to_string(c.status)), c.value, c.value_inner, c.p, c.q, c.note});
}

inline void write_report_text(std::ostream& os, const ConditionReport& r) {
    for (const auto& c : r.entries) {
        os << c.name << ": " << to_string(c.status) << " (p=" << format_double(c.p) << ", q=" << format_double(c.q)
           << ", value=" << format_double(c.value) << ", inner=" << format_double(c.value_inner) << ")";
        if (!c.note.empty()) os << " " << c.note;
        os << "\n";
    }
}

}  // namespace sfl
