#pragma once

// Lagrangian flow ensembles X(t, x) for singular fields: adaptive RK4 with a
// distance-aware step cap and an absorption floor, compressibility
// estimates, and the avoidance functional mu(F(delta)) against its bound.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"
#include "sfl/distance.hpp"
#include "sfl/vector_fields.hpp"

namespace sfl {

enum class TrajectoryStatus { alive, absorbed, escaped };

inline const char* to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::alive: return "alive";
        case TrajectoryStatus::absorbed: return "absorbed";
        case TrajectoryStatus::escaped: return "escaped";
    }
    return "?";
}

/// Initial points: a cell-centred grid (weight = cell volume) or a uniform
/// Monte Carlo sample (weight = V / N).
struct InitialSample {
    Box domain = Box::cube(2, -1, 1);
    bool grid = true;
    int per_axis = 100;
    std::size_t count = 10000;
    std::uint64_t seed = 0;
};

inline std::vector<Vec> initial_points(const InitialSample& s, double& weight) {
    const int n = s.domain.dim();
    std::vector<Vec> pts;
    if (s.grid) {
        if (s.per_axis < 1) throw Error("grid needs at least one point per axis");
        std::size_t total = 1;
        for (int i = 0; i < n; ++i) total *= std::size_t(s.per_axis);
        pts.reserve(total);
        for (std::size_t k = 0; k < total; ++k) {
            Vec u(n);
            std::size_t r = k;
            for (int i = 0; i < n; ++i) {
                u[i] = (double(r % std::size_t(s.per_axis)) + 0.5) / double(s.per_axis);
                r /= std::size_t(s.per_axis);
            }
            pts.push_back(s.domain.at(u));
        }
    } else {
        if (s.count == 0) throw Error("empty initial sample");
        for (std::size_t k = 0; k < s.count; ++k) {
            CounterRng rng(s.seed, 0x1a17, k);
            pts.push_back(rng.uniform_in(s.domain));
        }
    }
    weight = s.domain.volume() / double(pts.size());
    return pts;
}

struct FlowOptions {
    double horizon = 1.0;
    int output_steps = 20;
    /// Local error per unit time accepted by step doubling.
    double tolerance = 1e-8;
    double h_max = 0.05;
    double h_floor = 1e-12;
    double c_step = 0.1;
    /// Absorption floor; 0 means 1e-6 times the initial domain diameter.
    double delta_min = 0.0;
    DistanceKind kind = DistanceKind::section;
    std::optional<Box> escape;
    bool check_residual = true;
};

struct TrajectoryRecord {
    TrajectoryStatus status = TrajectoryStatus::alive;
    /// Absorbed because of step underflow or a failed field evaluation.
    bool flagged = false;
    double event_time = 0.0;
    double initial_distance = 0.0;
    double min_distance = kInf;
    double min_time = 0.0;
    /// max over t of |X(t) - x - int_0^t b| / t from an independent
    /// Simpson re-quadrature with Hermite midpoints.
    double residual = 0.0;
    std::size_t steps = 0, rejected = 0;
};

struct FlowEnsemble {
    int dim = 2;
    FlowOptions options;
    double delta_min = 0.0;
    /// Time-Lipschitz constant of the distance used by the step cap and the
    /// Lyapunov bound: 1 for space-time distances, K for sections.
    double distance_speed = 1.0;
    std::vector<Vec> initial;
    std::vector<double> weights;
    std::vector<double> times;
    std::vector<std::vector<Vec>> positions;      // [trajectory][output]
    std::vector<std::vector<double>> distances;   // [trajectory][output]
    std::vector<TrajectoryRecord> records;

    std::size_t size() const { return initial.size(); }
    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

/// Bound on |d/dt d(t, x)| for fixed x: 1 for the space-time distance, the
/// Lipschitz constant of the trajectories for sections of Lipschitz graphs,
/// 0 for static sets. Sections of Hoelder graphs have no such bound.
inline double distance_time_speed(const DistanceEvaluator& e, DistanceKind kind) {
    if (kind == DistanceKind::spacetime) return 1.0;
    const SpaceTimeSet& s = e.set();
    if (const auto* p = s.product()) {
        if (!p->time.is_interval) throw Error("sections of this product are not continuous in time");
        return 0.0;
    }
    if (const auto* g = s.graph()) {
        if (g->bundle.holder_constant == 0.0) return 0.0;
        if (g->bundle.holder_exponent < 1.0) throw Error("section distance of a hoelder graph is not lipschitz in time");
        return g->bundle.holder_constant;
    }
    throw Error("section distance needs a product or graph set");
}

namespace detail {

struct StepSample {
    double t, d;
    Vec x;
    double normal_bound;  // speed + |b . grad d| at (t, x), filled on request
};

inline Vec rk4_step(const FieldSpec& b, double t, const Vec& x, const Vec& k1, double h, int& evals) {
    const Vec k2 = eval_field(b, t + 0.5 * h, x + (0.5 * h) * k1);
    const Vec k3 = eval_field(b, t + 0.5 * h, x + (0.5 * h) * k2);
    const Vec k4 = eval_field(b, t + h, x + h * k3);
    evals += 3;
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates one trajectory over the output grid. `on_step` sees every
// accepted state (including t = 0).
template <class OnStep>
void integrate_one(const FieldSpec& b, const DistanceEvaluator& e, const FlowEnsemble& ens, const Vec& x0,
                   std::vector<Vec>& pos, std::vector<double>& dist, TrajectoryRecord& rec, OnStep&& on_step) {
    const FlowOptions& o = ens.options;
    const std::size_t m = ens.times.size();
    pos.assign(m, x0);
    dist.assign(m, 0.0);
    auto distance_at = [&](double t, const Vec& x) { return e.distance(o.kind, t, x); };

    double t = 0.0;
    Vec x = x0;
    double d = distance_at(t, x);
    rec.initial_distance = d;
    rec.min_distance = d;
    dist[0] = d;
    on_step(t, x, d);
    auto freeze = [&](std::size_t from, TrajectoryStatus s, bool flagged) {
        rec.status = s;
        rec.flagged = flagged;
        rec.event_time = t;
        for (std::size_t k = from; k < m; ++k) {
            pos[k] = x;
            dist[k] = d;
        }
    };
    if (!(d > ens.delta_min)) {
        freeze(0, TrajectoryStatus::absorbed, false);
        return;
    }

    Vec k1;
    try {
        k1 = eval_field(b, t, x);
    } catch (const Error&) {
        freeze(0, TrajectoryStatus::absorbed, true);
        return;
    }
    Vec integral = Vec::zeros(x.dim());
    double h = o.h_max;
    int evals = 1;
    for (std::size_t k = 1; k < m; ++k) {
        const double t_next = ens.times[k];
        while (t < t_next) {
            const double cap = o.c_step * d / (std::max(1.0, ens.distance_speed) + k1.norm());
            h = std::min({h, cap, o.h_max});
            bool last = false;
            if (h >= 0.99 * (t_next - t)) {
                h = t_next - t;
                last = true;
            }
            if (h < o.h_floor && !last) {
                freeze(k, TrajectoryStatus::absorbed, true);
                return;
            }
            Vec full, half;
            double err = 0.0;
            try {
                full = rk4_step(b, t, x, k1, h, evals);
                const Vec mid = rk4_step(b, t, x, k1, 0.5 * h, evals);
                const Vec k1m = eval_field(b, t + 0.5 * h, mid);
                ++evals;
                half = rk4_step(b, t + 0.5 * h, mid, k1m, 0.5 * h, evals);
                err = (half - full).norm() / 15.0;
            } catch (const Error&) {
                // a stage landed on the singularity; retry with a smaller step
                err = kInf;
            }
            const double allowed = o.tolerance * h;
            if (!(err <= allowed)) {
                ++rec.rejected;
                h *= std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(allowed / err, 0.25)) : 0.25;
                continue;
            }
            const double t_new = last ? t_next : t + h;
            Vec k1_new;
            try {
                k1_new = eval_field(b, t_new, half);
                ++evals;
                if (o.check_residual) {
                    const Vec xm = 0.5 * (x + half) + (h / 8.0) * (k1 - k1_new);
                    const Vec bm = eval_field(b, t + 0.5 * h, xm);
                    ++evals;
                    integral += (h / 6.0) * (k1 + 4.0 * bm + k1_new);
                    rec.residual = std::max(rec.residual, (half - x0 - integral).norm() / t_new);
                }
            } catch (const Error&) {
                t = t_new;
                x = half;
                freeze(k, TrajectoryStatus::absorbed, true);
                return;
            }
            ++rec.steps;
            t = t_new;
            x = half;
            k1 = k1_new;
            d = distance_at(t, x);
            on_step(t, x, d);
            if (d < rec.min_distance) {
                rec.min_distance = d;
                rec.min_time = t;
            }
            if (d < ens.delta_min) {
                freeze(k, TrajectoryStatus::absorbed, false);
                return;
            }
            if (o.escape && !o.escape->contains(x)) {
                freeze(k, TrajectoryStatus::escaped, false);
                return;
            }
            const double grow = err > 0 ? 0.9 * std::pow(allowed / err, 0.25) : 4.0;
            if (!last) h *= std::clamp(grow, 0.2, 4.0);
        }
        pos[k] = x;
        dist[k] = d;
    }
}

inline FlowEnsemble prepare_ensemble(const DistanceEvaluator& e, std::vector<Vec> pts, double weight,
                                     const FlowOptions& opt, const Box& domain) {
    if (!(opt.horizon > 0) || opt.output_steps < 1) throw Error("flow needs a positive horizon and output grid");
    if (!(opt.tolerance > 0 && opt.h_max > 0 && opt.c_step > 0)) throw Error("invalid integrator tolerances");
    FlowEnsemble ens;
    ens.dim = domain.dim();
    ens.options = opt;
    double diam = 0.0;
    for (int i = 0; i < domain.dim(); ++i) diam += domain.width(i) * domain.width(i);
    ens.delta_min = opt.delta_min > 0 ? opt.delta_min : 1e-6 * std::sqrt(diam);
    ens.distance_speed = distance_time_speed(e, opt.kind);
    for (int k = 0; k <= opt.output_steps; ++k) ens.times.push_back(opt.horizon * double(k) / opt.output_steps);
    ens.weights.assign(pts.size(), weight);
    ens.initial = std::move(pts);
    return ens;
}

}  // namespace detail

inline FlowEnsemble integrate_flow(const FieldSpec& b, const DistanceEvaluator& e, const InitialSample& init,
                                   const FlowOptions& opt = {}) {
    if (init.domain.dim() != b.dim || e.ambient_dim() != b.dim) throw Error("flow dimension mismatch");
    double w = 0.0;
    auto pts = initial_points(init, w);
    FlowEnsemble ens = detail::prepare_ensemble(e, std::move(pts), w, opt, init.domain);
    const std::size_t N = ens.size();
    ens.positions.resize(N);
    ens.distances.resize(N);
    ens.records.resize(N);
    parallel_for(N, [&](std::size_t i) {
        detail::integrate_one(b, e, ens, ens.initial[i], ens.positions[i], ens.distances[i], ens.records[i],
                              [](double, const Vec&, double) {});
    });
    return ens;
}

/// X(T, x) for one starting point, with its record.
inline Vec flow_map(const FieldSpec& b, const DistanceEvaluator& e, const Vec& x, const FlowOptions& opt,
                    TrajectoryRecord* record = nullptr) {
    const FlowEnsemble ens = detail::prepare_ensemble(e, {x}, 0.0, opt, Box(x, x));
    std::vector<Vec> pos;
    std::vector<double> dist;
    TrajectoryRecord rec;
    detail::integrate_one(b, e, ens, x, pos, dist, rec, [](double, const Vec&, double) {});
    if (record) *record = rec;
    return pos.back();
}

/// det DX(T, x) by central differences of the flow map.
inline double flow_jacobian(const FieldSpec& b, const DistanceEvaluator& e, const Vec& x, const FlowOptions& opt,
                            double h = 1e-5) {
    const int n = x.dim();
    double m[kMaxDim][kMaxDim];
    for (int j = 0; j < n; ++j) {
        const Vec dx = h * Vec::unit(n, j);
        const Vec col = (1.0 / (2 * h)) * (flow_map(b, e, x + dx, opt) - flow_map(b, e, x - dx, opt));
        for (int i = 0; i < n; ++i) m[i][j] = col[i];
    }
    double det = 1.0;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (m[piv][c] == 0.0) return 0.0;
        if (piv != c) {
            for (int k = 0; k < n; ++k) std::swap(m[c][k], m[piv][k]);
            det = -det;
        }
        det *= m[c][c];
        for (int r = c + 1; r < n; ++r) {
            const double f = m[r][c] / m[c][c];
            for (int k = c; k < n; ++k) m[r][k] -= f * m[c][k];
        }
    }
    return det;
}

// ---------------------------------------------------------------------------
// Compressibility: weighted measure of initial points whose image lies in B,
// divided by |B|, maximised over boxes and output times.

struct CompressibilityEstimate {
    double L = 0.0;
    double standard_error = 0.0;
    std::size_t min_count = 0;
    bool low_count = false;  // some box saw fewer than 100 endpoints
    std::vector<std::string> notes;
};

inline CompressibilityEstimate compressibility_estimate(const FlowEnsemble& f, const std::vector<Box>& boxes,
                                                        const std::vector<double>& times) {
    CompressibilityEstimate out;
    out.min_count = std::size_t(-1);
    Box swept = bounding_box(f.initial);
    for (const auto& row : f.positions)
        for (const auto& x : row)
            for (int i = 0; i < f.dim; ++i) {
                swept.lo[i] = std::min(swept.lo[i], x[i]);
                swept.hi[i] = std::max(swept.hi[i], x[i]);
            }
    for (double t : times) {
        const auto it = std::min_element(f.times.begin(), f.times.end(),
                                         [t](double a, double b) { return std::abs(a - t) < std::abs(b - t); });
        const std::size_t k = std::size_t(it - f.times.begin());
        for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
            const Box& B = boxes[bi];
            bool overlaps = true;
            for (int i = 0; i < f.dim; ++i)
                overlaps = overlaps && B.lo[i] <= swept.hi[i] && B.hi[i] >= swept.lo[i];
            if (!overlaps) {
                out.notes.push_back("box " + std::to_string(bi) + " outside the swept region, skipped");
                continue;
            }
            double mass = 0.0, w2 = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < f.size(); ++j)
                if (B.contains(f.positions[j][k])) {
                    mass += f.weights[j];
                    w2 += f.weights[j] * f.weights[j];
                    ++count;
                }
            out.min_count = std::min(out.min_count, count);
            const double ratio = mass / B.volume();
            if (ratio > out.L) {
                out.L = ratio;
                out.standard_error = std::sqrt(w2) / B.volume();
            }
        }
    }
    if (out.min_count == std::size_t(-1)) out.min_count = 0;
    out.low_count = out.min_count < 100;
    return out;
}

// ---------------------------------------------------------------------------
// Avoidance: F(delta) = {x : d(0,x) >= r0, tau_delta(x) < T}; tau_delta < T
// exactly when the per-step minimum distance drops below delta, so the sets
// nest for free. The bound is
//   B = L int_0^T int_{delta_min < d < r0} d^-1 (c + |b . grad d|) dx dt
// with c the time-Lipschitz constant of d.

struct AvoidanceOptions {
    double r0 = 0.25;
    std::vector<double> deltas = power_ladder(2.0, 4, 10);
    double bound_tolerance = 0.1;
    TubeOptions tube;
    /// Compressibility fed to the bound; unset means estimate it from the
    /// ensemble on a 4^n grid of boxes over the initial domain.
    std::optional<double> compressibility;
    NormalOptions normal;
};

struct AvoidanceRow {
    double delta = 0.0;
    double mu = 0.0;
    double standard_error = 0.0;
    double product = 0.0;
    bool within_bound = true;
    std::size_t entering = 0;
};

struct AvoidanceReport {
    double r0 = 0.0;
    double L = 0.0;
    double tube_integral = 0.0;
    double tube_stderr = 0.0;
    double bound = 0.0;
    double distance_speed = 1.0;
    std::size_t eligible = 0;
    std::size_t flagged = 0;
    bool nested = true;
    bool monotone = true;
    bool bound_holds = true;
    std::vector<AvoidanceRow> rows;
};

inline Box default_test_box_domain(const FlowEnsemble& f) { return bounding_box(f.initial); }

inline std::vector<Box> box_grid(const Box& domain, int per_axis) {
    std::vector<Box> out;
    const int n = domain.dim();
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= std::size_t(per_axis);
    for (std::size_t k = 0; k < total; ++k) {
        Vec lo(n), hi(n);
        std::size_t r = k;
        for (int i = 0; i < n; ++i) {
            const double c = double(r % std::size_t(per_axis));
            r /= std::size_t(per_axis);
            lo[i] = domain.lo[i] + domain.width(i) * c / per_axis;
            hi[i] = domain.lo[i] + domain.width(i) * (c + 1) / per_axis;
        }
        out.emplace_back(lo, hi);
    }
    return out;
}

/// Box holding {d < r0} over [0, T]: sections sampled on a fine time grid,
/// grown by r0 plus the largest section motion between grid times.
inline Box tube_box(const DistanceEvaluator& e, double r0) {
    const SpaceTimeSet& s = e.set();
    const int steps = 512;
    const auto pts = sample_points(s, steps + 1);
    if (pts.empty()) throw Error("empty singular set");
    std::vector<Vec> xs;
    for (const auto& p : pts) xs.push_back(p.x);
    double motion = 0.0;
    if (const auto* g = s.graph())
        motion = g->bundle.holder_constant * std::pow(0.5 * s.horizon() / steps, g->bundle.holder_exponent);
    return bounding_box(xs).expanded(r0 + motion);
}

inline AvoidanceReport avoidance_statistics(const FlowEnsemble& f, const FieldSpec& b, const DistanceEvaluator& e,
                                            const AvoidanceOptions& opt) {
    if (opt.deltas.empty()) throw Error("empty delta ladder");
    for (double dl : opt.deltas)
        if (!(dl > 0 && dl < opt.r0)) throw Error("r0 must exceed every delta");
    AvoidanceReport rep;
    rep.r0 = opt.r0;
    rep.distance_speed = f.distance_speed;

    std::vector<double> deltas = opt.deltas;
    std::sort(deltas.begin(), deltas.end(), std::greater<>());
    const double N = double(f.size());
    std::vector<bool> prev;
    for (double delta : deltas) {
        AvoidanceRow row;
        row.delta = delta;
        std::vector<bool> in(f.size(), false);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto& r = f.records[i];
            if (r.initial_distance < opt.r0) continue;
            const bool enters = r.min_distance < delta || (r.status == TrajectoryStatus::absorbed) ||
                                (r.status == TrajectoryStatus::escaped);
            if (enters) {
                in[i] = true;
                row.mu += f.weights[i];
                ++row.entering;
            }
        }
        if (!prev.empty())
            for (std::size_t i = 0; i < f.size(); ++i) rep.nested = rep.nested && (!in[i] || prev[i]);
        if (!rep.rows.empty()) rep.monotone = rep.monotone && row.mu <= rep.rows.back().mu;
        const double V = f.total_weight();
        const double p = row.mu / V;
        row.standard_error = V * std::sqrt(p * (1 - p) / N);
        row.product = row.mu * std::log(opt.r0 / delta);
        rep.rows.push_back(row);
        prev = std::move(in);
    }
    for (const auto& r : f.records) {
        if (r.initial_distance >= opt.r0) ++rep.eligible;
        if (r.flagged) ++rep.flagged;
    }

    if (opt.compressibility) {
        rep.L = *opt.compressibility;
    } else {
        rep.L = compressibility_estimate(f, box_grid(default_test_box_domain(f), 4), f.times).L;
    }
    TubeOptions tube = opt.tube;
    tube.t_begin = 0.0;
    tube.t_end = f.options.horizon;
    tube.kind = f.options.kind;
    NormalOptions nopt = opt.normal;
    nopt.kind = f.options.kind;
    const double c = f.distance_speed;
    const TubeIntegral I = integrate_tube(
        e, tube_box(e, opt.r0), opt.r0, f.delta_min,
        [&](double t, const Vec& x, double d) {
            double nb = 0.0;
            try {
                nb = std::abs(normal_component(b, e, t, x, nopt).value);
            } catch (const Error&) {
                nb = 0.0;  // measure-zero singular points
            }
            return (c + nb) / d;
        },
        tube);
    rep.tube_integral = I.value;
    rep.tube_stderr = I.standard_error;
    rep.bound = rep.L * I.value;
    for (auto& row : rep.rows) {
        row.within_bound = row.product <= rep.bound * (1 + opt.bound_tolerance);
        rep.bound_holds = rep.bound_holds && row.within_bound;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Lyapunov trace of one trajectory: every accepted step, with the discrete
// difference quotient of d against c + |b . grad d|.

struct LyapunovRow {
    double t = 0.0, d = 0.0, g = 0.0;
    double quotient = 0.0;
    double bound = 0.0;
    bool holds = true;
    bool one_sided = false;
};

struct LyapunovTrace {
    std::vector<LyapunovRow> rows;
    std::size_t failures = 0;
    std::size_t flagged_failures = 0;
};

/// g(y) = log(r0 / y) on [delta, r0], 0 above r0.
inline double avoidance_g(double y, double r0) { return y > r0 ? 0.0 : std::log(r0 / y); }

inline LyapunovTrace lyapunov_trace(const FlowEnsemble& f, const DistanceEvaluator& e, const FieldSpec& b,
                                    std::size_t index, double r0, double slack = 0.0) {
    if (index >= f.size()) throw Error("trajectory index out of range");
    NormalOptions nopt;
    nopt.kind = f.options.kind;
    nopt.delta_min = 0.0;
    const double tol = slack > 0 ? slack : std::max(1e-6, 10 * f.options.tolerance);
    std::vector<Vec> pos;
    std::vector<double> dist;
    TrajectoryRecord rec;
    LyapunovTrace tr;
    auto on_step = [&](double t, const Vec& x, double d) {
        LyapunovRow row;
        row.t = t;
        row.d = d;
        row.g = avoidance_g(d, r0);
        const NormalComponent nc = normal_component(b, e, t, x, nopt);
        row.bound = f.distance_speed + std::abs(nc.value);
        row.one_sided = nc.one_sided;
        if (!tr.rows.empty()) {
            const LyapunovRow& prev = tr.rows.back();
            row.quotient = (d - prev.d) / (t - prev.t);
            row.holds = std::abs(row.quotient) <= std::max(row.bound, prev.bound) + tol;
            if (!row.holds) {
                ++tr.failures;
                if (row.one_sided || prev.one_sided) ++tr.flagged_failures;
            }
        }
        tr.rows.push_back(row);
    };
    detail::integrate_one(b, e, f, f.initial[index], pos, dist, rec, on_step);
    return tr;
}

// ---------------------------------------------------------------------------
// CSV output.

inline void write_trajectories_csv(std::ostream& os, const FlowEnsemble& f, std::size_t max_trajectories = 0) {
    std::vector<std::string> header{"id", "t"};
    for (int i = 0; i < f.dim; ++i) header.push_back("x" + std::to_string(i + 1));
    header.push_back("d_S");
    header.push_back("status");
    CsvWriter csv(os, header);
    const std::size_t n = max_trajectories ? std::min(max_trajectories, f.size()) : f.size();
    for (std::size_t j = 0; j < n; ++j) {
        const auto& r = f.records[j];
        for (std::size_t k = 0; k < f.times.size(); ++k) {
            std::vector<CsvWriter::Cell> row{(long long)j, f.times[k]};
            for (int i = 0; i < f.dim; ++i) row.push_back(f.positions[j][k][i]);
            row.push_back(f.distances[j][k]);
            const bool done = r.status != TrajectoryStatus::alive && f.times[k] >= r.event_time;
            row.push_back(std::string(to_string(done ? r.status : TrajectoryStatus::alive)));
            csv.row(row);
        }
    }
}

inline void write_avoidance_csv(std::ostream& os, const AvoidanceReport& r) {
    CsvWriter csv(os, {"delta", "mu_F", "stderr", "product", "bound"});
    for (const auto& row : r.rows) csv.row({row.delta, row.mu, row.standard_error, row.product, r.bound});
}

inline void write_lyapunov_csv(std::ostream& os, const LyapunovTrace& tr) {
    CsvWriter csv(os, {"t", "d_S", "g", "quotient", "bound", "holds"});
    for (const auto& r : tr.rows) csv.row({r.t, r.d, r.g, r.quotient, r.bound, (long long)r.holds});
}

}  // namespace sfl
