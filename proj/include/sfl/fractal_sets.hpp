#pragma once

// Singular sets S in [0,T] x R^n: initial point sets with known box-counting
// dimension, Hoelder trajectory bundles, and the three space-time
// representations (product, trajectory graph, sample cloud).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"

namespace sfl {

/// Finite point set in R^n standing in for a (possibly fractal) limit set.
struct InitialSet {
    std::vector<Vec> points;
    int ambient_dim = 1;
    std::optional<double> theoretical_dim;
    std::string generator_tag;
    /// Scale below which the finite representation stops resembling the
    /// limit set (finest generation length or smallest gap); 0 when exact.
    double finest_scale = 0.0;

    void validate() const {
        if (points.empty()) throw Error("initial set is empty");
        if (ambient_dim < 1 || ambient_dim >= kMaxDim) throw Error("unsupported ambient dimension");
        for (const auto& p : points) {
            if (p.dim() != ambient_dim) throw Error("initial set point has wrong dimension");
            if (!p.finite()) throw Error("initial set point is not finite");
        }
        if (theoretical_dim && (*theoretical_dim < 0 || *theoretical_dim > ambient_dim))
            throw Error("theoretical dimension outside [0, ambient_dim]");
    }
};

struct CantorOptions {
    int max_depth = 16;
};

/// Depth-th prefractal of the Cantor set on [0,1] that keeps the two end
/// subintervals of relative length keep_ratio at every step. Depth d holds
/// 2^(d+1) intervals of length keep_ratio^(d+1); the returned points are
/// their 2^(d+2) endpoints in increasing order.
inline InitialSet make_cantor(double keep_ratio, int depth, CantorOptions opt = {}) {
    if (!(keep_ratio > 0.0 && keep_ratio < 0.5)) throw Error("cantor keep_ratio must lie in (0, 1/2)");
    if (depth < 0) throw Error("cantor depth must be nonnegative");
    if (depth > opt.max_depth) throw Error("cantor depth exceeds the point-count budget");

    std::vector<double> lefts{0.0};
    double len = 1.0;
    for (int level = 0; level <= depth; ++level) {
        std::vector<double> next;
        next.reserve(lefts.size() * 2);
        const double shift = len * (1.0 - keep_ratio);
        for (double a : lefts) {
            next.push_back(a);
            next.push_back(a + shift);
        }
        lefts = std::move(next);
        len *= keep_ratio;
    }
    InitialSet s;
    s.ambient_dim = 1;
    s.points.reserve(lefts.size() * 2);
    for (double a : lefts) {
        s.points.push_back(Vec{a});
        s.points.push_back(Vec{a + len});
    }
    s.theoretical_dim = std::log(2.0) / std::log(1.0 / keep_ratio);
    s.finest_scale = len;
    std::ostringstream tag;
    tag << "cantor(keep_ratio=" << keep_ratio << ",depth=" << depth << ")";
    s.generator_tag = tag.str();
    return s;
}

/// {n^-p : 1 <= n <= N} together with the accumulation point 0.
inline InitialSet make_reciprocal_powers(double power, int count) {
    if (!(power >= 1.0)) throw Error("reciprocal power must be >= 1");
    if (count < 2) throw Error("reciprocal powers need count >= 2");
    InitialSet s;
    s.ambient_dim = 1;
    s.points.reserve(std::size_t(count) + 1);
    s.points.push_back(Vec{0.0});
    for (int n = 1; n <= count; ++n) s.points.push_back(Vec{std::pow(double(n), -power)});
    s.theoretical_dim = 1.0 / (1.0 + power);
    s.finest_scale = std::pow(double(count - 1), -power) - std::pow(double(count), -power);
    std::ostringstream tag;
    tag << "reciprocal_powers(power=" << power << ",count=" << count << ")";
    s.generator_tag = tag.str();
    return s;
}

/// Single point in R^n.
inline InitialSet make_singleton(const Vec& p) {
    InitialSet s;
    s.ambient_dim = p.dim();
    s.points = {p};
    s.theoretical_dim = 0.0;
    s.generator_tag = "point";
    return s;
}

/// Equispaced samples of the segment [a, b] in R^n (dimension 1).
inline InitialSet make_segment(const Vec& a, const Vec& b, int count) {
    if (count < 2) throw Error("segment needs at least two samples");
    InitialSet s;
    s.ambient_dim = a.dim();
    for (int i = 0; i < count; ++i) s.points.push_back(a + (double(i) / double(count - 1)) * (b - a));
    s.theoretical_dim = 1.0;
    s.finest_scale = distance(a, b) / double(count - 1);
    s.generator_tag = "segment";
    return s;
}

/// Embeds a set from R^m into R^n (n >= m) as A x {0}.
inline InitialSet embed(const InitialSet& a, int n) {
    if (n < a.ambient_dim || n >= kMaxDim) throw Error("invalid embedding dimension");
    InitialSet s = a;
    s.ambient_dim = n;
    for (auto& p : s.points) {
        Vec q(n);
        for (int i = 0; i < p.dim(); ++i) q[i] = p[i];
        p = q;
    }
    s.generator_tag = a.generator_tag + "x{0}";
    return s;
}

/// Cartesian product A x B as a point set in R^(m+k).
inline InitialSet cartesian_product(const InitialSet& a, const InitialSet& b) {
    const int n = a.ambient_dim + b.ambient_dim;
    if (n >= kMaxDim) throw Error("product dimension too large");
    InitialSet s;
    s.ambient_dim = n;
    s.points.reserve(a.points.size() * b.points.size());
    for (const auto& p : a.points)
        for (const auto& q : b.points) {
            Vec r(n);
            for (int i = 0; i < p.dim(); ++i) r[i] = p[i];
            for (int i = 0; i < q.dim(); ++i) r[p.dim() + i] = q[i];
            s.points.push_back(r);
        }
    if (a.theoretical_dim && b.theoretical_dim) s.theoretical_dim = *a.theoretical_dim + *b.theoretical_dim;
    s.finest_scale = std::max(a.finest_scale, b.finest_scale);
    s.generator_tag = a.generator_tag + "*" + b.generator_tag;
    return s;
}

// ---------------------------------------------------------------------------

/// x -> Z(t, x), uniformly alpha-Hoelder in t with constant K.
struct TrajectoryBundle {
    std::function<Vec(double, const Vec&)> map;
    double holder_exponent = 1.0;
    double holder_constant = 1.0;
    double horizon = 1.0;
    std::string tag;
    /// Optional sharper bound on max |Z(s,x) - Z((a+b)/2, x)| over s in
    /// [a, b]; distance queries fall back to K ((b-a)/2)^alpha.
    std::function<double(double, double, const Vec&)> sweep;
    /// Set when Z(t,x) = x + shift(t, n); distance queries then search one
    /// curve against a spatial index of S0 instead of one curve per point.
    std::function<Vec(double, int)> shift;
};

inline double sweep_bound(const TrajectoryBundle& b, double lo, double hi, const Vec& x) {
    if (b.sweep) return b.sweep(lo, hi, x);
    return b.holder_constant * std::pow(0.5 * (hi - lo), b.holder_exponent);
}

/// Z(t,x) = x.
inline TrajectoryBundle identity_bundle(double horizon = 1.0) {
    return {[](double, const Vec& x) { return x; }, 1.0, 0.0, horizon, "identity",
            [](double, double, const Vec&) { return 0.0; }};
}

/// Z(t,x) = x + t(x^2 - x) acting on the first coordinate; on [0,1] the
/// velocity x^2 - x is bounded by 1/4, so the bundle is Lipschitz with K = 1/4.
inline TrajectoryBundle quadratic_contraction_bundle(double horizon = 1.0) {
    return {[](double t, const Vec& x) {
                Vec z = x;
                z[0] = x[0] + t * (x[0] * x[0] - x[0]);
                return z;
            },
            1.0, 0.25, horizon, "quadratic_contraction",
            [](double a, double b, const Vec& x) { return 0.5 * (b - a) * std::abs(x[0] * x[0] - x[0]); }};
}

/// Z(t,x) = x + (t^alpha, 0, ..., 0), alpha-Hoelder with K = 1.
inline TrajectoryBundle holder_drift_bundle(double alpha, double horizon = 1.0) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("hoelder exponent must lie in (0, 1]");
    auto shift = [alpha](double t, int n) {
        Vec v = Vec::zeros(n);
        v[0] = std::pow(std::max(t, 0.0), alpha);
        return v;
    };
    TrajectoryBundle b{[shift](double t, const Vec& x) { return x + shift(t, x.dim()); },
                       alpha,
                       1.0,
                       horizon,
                       "holder_drift",
                       [alpha](double a, double b, const Vec&) {
                           // t^alpha is monotone, so the extremes sit at the interval ends
                           const double lo = std::max(a, 0.0), hi = std::max(b, 0.0), c = 0.5 * (lo + hi);
                           return std::max(std::pow(c, alpha) - std::pow(lo, alpha),
                                           std::pow(hi, alpha) - std::pow(c, alpha));
                       }};
    b.shift = shift;
    return b;
}

struct HolderReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  ///< max |Z(t1,x)-Z(t2,x)| / (K |t1-t2|^alpha)
    double worst_t1 = 0.0, worst_t2 = 0.0;
    Vec worst_x;
};

/// Samples (t1, t2, x) and tests |Z(t1,x) - Z(t2,x)| <= K |t1-t2|^alpha.
/// Half of the pairs are drawn at small separations, where a wrong exponent
/// shows up first.
inline HolderReport check_holder(const InitialSet& initial, const TrajectoryBundle& bundle, std::size_t samples,
                                 std::uint64_t seed) {
    HolderReport rep;
    const double T = bundle.horizon;
    const double a = bundle.holder_exponent, K = bundle.holder_constant;
    CounterRng rng(seed, 0x401de5);
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = std::size_t(rng.uniform() * double(initial.points.size())) % initial.points.size();
        const Vec& x = initial.points[i];
        const double t1 = rng.uniform(0.0, T);
        double t2;
        if (s % 2 == 0) {
            t2 = rng.uniform(0.0, T);
        } else {
            const double sep = T * std::pow(10.0, -rng.uniform(0.0, 8.0));
            t2 = std::clamp(t1 + (rng.uniform() < 0.5 ? -sep : sep), 0.0, T);
        }
        if (t1 == t2) continue;
        const double lhs = distance(bundle.map(t1, x), bundle.map(t2, x));
        const double rhs = K * std::pow(std::abs(t1 - t2), a);
        ++rep.checked;
        const double slack = 1e-12 * (1.0 + rhs);
        const double ratio = rhs > 0 ? lhs / rhs : (lhs > slack ? kInf : 0.0);
        if (lhs > rhs + slack) ++rep.violations;
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.worst_t1 = t1;
            rep.worst_t2 = t2;
            rep.worst_x = x;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

/// Time factor of a product set: an interval [a, b] or a finite sample.
struct TimeSet {
    bool is_interval = true;
    double a = 0.0, b = 1.0;
    std::vector<double> samples;  ///< sorted, used when !is_interval
    std::optional<double> theoretical_dim;
    double finest_scale = 0.0;
    std::string tag;

    static TimeSet interval(double lo, double hi) {
        if (!(hi >= lo)) throw Error("time interval has hi < lo");
        TimeSet s;
        s.a = lo;
        s.b = hi;
        s.theoretical_dim = hi > lo ? 1.0 : 0.0;
        s.tag = "interval";
        return s;
    }
    static TimeSet sampled(std::vector<double> times, std::optional<double> dim = std::nullopt) {
        if (times.empty()) throw Error("time set is empty");
        std::sort(times.begin(), times.end());
        TimeSet s;
        s.is_interval = false;
        s.samples = std::move(times);
        s.a = s.samples.front();
        s.b = s.samples.back();
        s.theoretical_dim = dim;
        s.tag = "samples";
        return s;
    }
    /// Time set from a one-dimensional initial set (e.g. a Cantor set).
    static TimeSet from_set(const InitialSet& set) {
        if (set.ambient_dim != 1) throw Error("time set must come from a set in R^1");
        std::vector<double> t;
        t.reserve(set.points.size());
        for (const auto& p : set.points) t.push_back(p[0]);
        TimeSet s = sampled(std::move(t), set.theoretical_dim);
        s.finest_scale = set.finest_scale;
        s.tag = set.generator_tag;
        return s;
    }

    /// Distance from t to the time set.
    double distance_to(double t) const {
        if (is_interval) return t < a ? a - t : (t > b ? t - b : 0.0);
        auto it = std::lower_bound(samples.begin(), samples.end(), t);
        double d = kInf;
        if (it != samples.end()) d = *it - t;
        if (it != samples.begin()) d = std::min(d, t - *std::prev(it));
        return d;
    }
};

struct ProductRep {
    TimeSet time;
    InitialSet space;
};

struct GraphRep {
    InitialSet initial;
    TrajectoryBundle bundle;
};

struct CloudRep {
    std::vector<SpaceTimePoint> points;
    double snap_tolerance = 0.0;
};

class SpaceTimeSet {
public:
    using Rep = std::variant<ProductRep, GraphRep, CloudRep>;

    SpaceTimeSet(Rep rep, int ambient_dim, double horizon)
        : rep_(std::move(rep)), ambient_dim_(ambient_dim), horizon_(horizon) {}

    int ambient_dim() const { return ambient_dim_; }
    double horizon() const { return horizon_; }
    const Rep& rep() const { return rep_; }
    const ProductRep* product() const { return std::get_if<ProductRep>(&rep_); }
    const GraphRep* graph() const { return std::get_if<GraphRep>(&rep_); }
    const CloudRep* cloud() const { return std::get_if<CloudRep>(&rep_); }

private:
    Rep rep_;
    int ambient_dim_;
    double horizon_;
};

struct GraphOptions {
    std::size_t holder_samples = 20000;
    std::uint64_t seed = 0;
};

/// S = {(t, Z(t,x)) : t in [0,T], x in S0}. Rejects bundles whose sampled
/// Hoelder check fails, naming the violating pair.
inline SpaceTimeSet make_graph(const InitialSet& initial, const TrajectoryBundle& bundle, GraphOptions opt = {}) {
    initial.validate();
    if (!bundle.map) throw Error("trajectory bundle has no evaluator");
    if (!(bundle.horizon > 0)) throw Error("trajectory horizon must be positive");
    if (!(bundle.holder_exponent > 0 && bundle.holder_exponent <= 1)) throw Error("hoelder exponent must lie in (0,1]");
    if (!(bundle.holder_constant >= 0)) throw Error("hoelder constant must be nonnegative");
    for (const auto& x : initial.points) {
        const Vec z = bundle.map(0.0, x);
        if (z.dim() != initial.ambient_dim || !z.finite()) throw Error("trajectory evaluator undefined on S0");
    }
    if (opt.holder_samples > 0) {
        const HolderReport rep = check_holder(initial, bundle, opt.holder_samples, opt.seed);
        if (rep.violations > 0) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "hoelder check failed: " << rep.violations << " violations; worst pair t1=" << rep.worst_t1
                << " t2=" << rep.worst_t2 << " x0=" << rep.worst_x[0] << " ratio=" << rep.worst_ratio;
            throw Error(msg.str());
        }
    }
    return SpaceTimeSet(GraphRep{initial, bundle}, initial.ambient_dim, bundle.horizon);
}

inline SpaceTimeSet make_product(const TimeSet& time, const InitialSet& space, double horizon = 1.0) {
    if (!time.is_interval && time.samples.empty()) throw Error("product time factor is empty");
    if (space.points.empty()) throw Error("product space factor is empty");
    space.validate();
    if (time.a < 0 || time.b > horizon) throw Error("product time factor must lie in [0, T]");
    return SpaceTimeSet(ProductRep{time, space}, space.ambient_dim, horizon);
}

/// Cloud of sampled (t, x) points; snap tolerance defaults to half the
/// median spacing of the distinct sample times.
inline SpaceTimeSet make_cloud(std::vector<SpaceTimePoint> pts, double horizon,
                               std::optional<double> snap_tolerance = std::nullopt) {
    if (pts.empty()) throw Error("cloud is empty");
    const int n = pts.front().x.dim();
    for (const auto& p : pts) {
        if (p.x.dim() != n) throw Error("cloud points differ in dimension");
        if (p.t < 0 || p.t > horizon) throw Error("cloud point outside [0, T]");
    }
    double snap = 0.0;
    if (snap_tolerance) {
        snap = *snap_tolerance;
    } else {
        std::vector<double> ts;
        for (const auto& p : pts) ts.push_back(p.t);
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        if (ts.size() > 1) {
            std::vector<double> gaps;
            for (std::size_t i = 1; i < ts.size(); ++i) gaps.push_back(ts[i] - ts[i - 1]);
            std::nth_element(gaps.begin(), gaps.begin() + std::ptrdiff_t(gaps.size() / 2), gaps.end());
            snap = 0.5 * gaps[gaps.size() / 2];
        }
    }
    return SpaceTimeSet(CloudRep{std::move(pts), snap}, n, horizon);
}

/// S(t) = {x : (t, x) in S}.
inline std::vector<Vec> temporal_section(const SpaceTimeSet& s, double t) {
    std::vector<Vec> out;
    if (const auto* g = s.graph()) {
        out.reserve(g->initial.points.size());
        for (const auto& x : g->initial.points) out.push_back(g->bundle.map(t, x));
    } else if (const auto* p = s.product()) {
        const double tol = 1e-12 * std::max(1.0, s.horizon());
        if (p->time.distance_to(t) <= tol) out = p->space.points;
    } else if (const auto* c = s.cloud()) {
        for (const auto& q : c->points)
            if (std::abs(q.t - t) <= c->snap_tolerance) out.push_back(q.x);
    }
    return out;
}

/// Representative space-time points of S for export: products and graphs are
/// sampled on `time_samples` equispaced times in [0,T].
inline std::vector<SpaceTimePoint> sample_points(const SpaceTimeSet& s, int time_samples) {
    std::vector<SpaceTimePoint> out;
    const double T = s.horizon();
    auto grid_time = [&](int k) { return time_samples > 1 ? T * double(k) / double(time_samples - 1) : 0.0; };
    if (const auto* c = s.cloud()) return c->points;
    if (const auto* p = s.product(); p && !p->time.is_interval) {
        for (double t : p->time.samples)
            for (const auto& x : p->space.points) out.push_back({t, x});
        return out;
    }
    for (int k = 0; k < time_samples; ++k) {
        const double t = grid_time(k);
        if (const auto* p = s.product(); p && p->time.distance_to(t) > 0) continue;
        for (const auto& x : temporal_section(s, t)) out.push_back({t, x});
    }
    return out;
}

inline void write_csv(std::ostream& os, const InitialSet& set) {
    std::vector<std::string> header;
    for (int i = 0; i < set.ambient_dim; ++i) header.push_back("x" + std::to_string(i + 1));
    CsvWriter csv(os, header);
    for (const auto& p : set.points) {
        std::vector<CsvWriter::Cell> row;
        for (int i = 0; i < set.ambient_dim; ++i) row.emplace_back(p[i]);
        csv.row(row);
    }
}

inline void write_csv(std::ostream& os, const SpaceTimeSet& s, int time_samples = 101) {
    std::vector<std::string> header{"t"};
    for (int i = 0; i < s.ambient_dim(); ++i) header.push_back("x" + std::to_string(i + 1));
    CsvWriter csv(os, header);
    for (const auto& p : sample_points(s, time_samples)) {
        std::vector<CsvWriter::Cell> row{p.t};
        for (int i = 0; i < s.ambient_dim(); ++i) row.emplace_back(p.x[i]);
        csv.row(row);
    }
}

}  // namespace sfl
