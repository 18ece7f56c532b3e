#pragma once

// Space-time distance d_S, sectional distance d_{S(t)}, Monte Carlo estimates
// of neighbourhood measures, and the comparison inequalities between the two
// distances for Hoelder trajectory graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/fractal_sets.hpp"
#include "sfl/kd_tree.hpp"

namespace sfl {

enum class DistanceMode { exact_parametric, sampled };

/// Which distance a neighbourhood is taken in: the space-time d_S(t, .) or
/// the sectional d_{S(t)}.
enum class DistanceKind { spacetime, section };

struct DistanceOptions {
    /// Width of the coarse time cells a trajectory graph is split into before
    /// branch and bound refinement; 0 means T/256.
    double time_step = 0.0;
    /// Graph distances are accurate to max(tolerance, relative_tolerance * d).
    double tolerance = 1e-9;
    double relative_tolerance = 1e-3;
    /// Covering mesh of a sample cloud; half of it is reported as the error.
    double cloud_mesh = 0.0;
};

/// Nearest-point queries against a finite section S(t).
class SectionIndex {
public:
    explicit SectionIndex(std::vector<Vec> pts) : tree_(std::move(pts)) {}
    bool empty() const { return tree_.empty(); }
    std::size_t size() const { return tree_.size(); }
    const std::vector<Vec>& points() const { return tree_.points(); }
    double distance(const Vec& x) const {
        if (tree_.empty()) throw Error("empty section");
        return tree_.nearest(x).distance;
    }
    Vec nearest_point(const Vec& x) const {
        if (tree_.empty()) throw Error("empty section");
        return tree_.points()[tree_.nearest(x).index];
    }

private:
    KdTree tree_;
};

class DistanceEvaluator {
public:
    explicit DistanceEvaluator(SpaceTimeSet set, DistanceOptions opt = {})
        : data_(std::make_shared<Data>(std::move(set), opt)) {
        build();
    }

    const SpaceTimeSet& set() const { return data_->set; }
    DistanceMode mode() const { return data_->mode; }
    int ambient_dim() const { return data_->set.ambient_dim(); }
    double horizon() const { return data_->set.horizon(); }
    /// Upper bound on |dist_spacetime - d_S| at a returned distance d. Graph
    /// and cloud distances never undershoot d_S by more than rounding.
    double error_bound(double d = 0.0) const { return std::max(data_->error, data_->relative_error * d); }

    /// d_S(t, x) = inf over (s, y) in S of |(t, x) - (s, y)|.
    double dist_spacetime(double t, const Vec& x) const {
        const Data& d = *data_;
        if (d.product_like) {
            const double dt = d.product_time.distance_to(t);
            const double dx = d.space_tree.nearest(x).distance;
            return std::sqrt(dt * dt + dx * dx);
        }
        if (d.spacetime_tree.empty() && !d.translation) throw Error("undefined distance: empty set");
        if (d.translation) return translation_distance(t, x);
        if (d.graph_cells) return graph_distance(t, x);
        Vec q(x.dim() + 1);
        q[0] = t;
        for (int i = 0; i < x.dim(); ++i) q[i + 1] = x[i];
        return d.spacetime_tree.nearest(q).distance;
    }

    /// d_{S(t)}(x); throws "empty section" when S(t) is empty.
    double dist_section(double t, const Vec& x) const {
        const Data& d = *data_;
        if (d.product_like) {
            if (!section_nonempty(t)) throw Error("empty section");
            return d.space_tree.nearest(x).distance;
        }
        if (const auto* g = d.set.graph(); g && g->initial.points.size() <= 32) {
            double best = kInf;
            for (const auto& y : g->initial.points) best = std::min(best, sfl::distance(x, g->bundle.map(t, y)));
            return best;
        }
        return section(t).distance(x);
    }

    bool section_nonempty(double t) const {
        const Data& d = *data_;
        if (d.product_like) return d.product_time.distance_to(t) <= 1e-12 * std::max(1.0, horizon());
        return !temporal_section(d.set, t).empty();
    }

    /// Index of S(t) for repeated sectional queries at one time.
    SectionIndex section(double t) const { return SectionIndex(temporal_section(data_->set, t)); }

    double distance(DistanceKind kind, double t, const Vec& x) const {
        return kind == DistanceKind::spacetime ? dist_spacetime(t, x) : dist_section(t, x);
    }

private:
    struct Data {
        Data(SpaceTimeSet s, DistanceOptions o) : set(std::move(s)), opt(o) {}
        SpaceTimeSet set;
        DistanceOptions opt;
        DistanceMode mode = DistanceMode::exact_parametric;
        double error = 0.0;
        double relative_error = 0.0;
        bool product_like = false;
        TimeSet product_time;
        KdTree space_tree;      // product space factor
        KdTree spacetime_tree;  // graph cells or cloud, coordinates (t, x)
        bool graph_cells = false;
        bool translation = false;
        std::size_t cells_per_point = 0;
        double cell_width = 0.0;
    };

    static Vec lift(double t, const Vec& x, int n) {
        Vec q(n + 1);
        q[0] = t;
        for (int i = 0; i < n; ++i) q[i + 1] = x[i];
        return q;
    }

    // Z(s,y) = y + shift(s): a point of S over s in [a,b] is at least
    // max(0, |t-c| - w/2) away in time and d_S0(x - shift(c)) - sweep away in
    // space, c the midpoint and w the width. Best-first bisection of [0,T].
    double translation_distance(double t, const Vec& x) const {
        const Data& d = *data_;
        const TrajectoryBundle& bundle = d.set.graph()->bundle;
        const int n = d.set.ambient_dim();
        const double T = d.set.horizon();
        const Vec& probe = d.space_tree.points().front();
        struct Piece {
            double lower, a, b;
            bool operator>(const Piece& o) const { return lower > o.lower; }
        };
        std::vector<Piece> heap;
        double best = kInf;
        auto tol = [&] { return std::max(d.opt.tolerance, d.opt.relative_tolerance * best); };
        auto push = [&](double a, double b) {
            const double c = 0.5 * (a + b);
            const double ds = d.space_tree.nearest(x - bundle.shift(c, n)).distance;
            best = std::min(best, std::hypot(t - c, ds));
            const double dt = std::max(0.0, std::abs(t - c) - 0.5 * (b - a));
            const double sw = sweep_bound(bundle, a, b, probe);
            const double lower = std::hypot(dt, std::max(0.0, ds - sw));
            if (std::hypot(0.5 * (b - a), sw) <= tol() || lower >= best - tol()) return;
            heap.push_back({lower, a, b});
            std::push_heap(heap.begin(), heap.end(), std::greater<>());
        };
        // Seed with the point at time t so `best` starts small.
        const double t0 = std::clamp(t, 0.0, T);
        best = std::hypot(t - t0, d.space_tree.nearest(x - bundle.shift(t0, n)).distance);
        push(0.0, T);
        while (!heap.empty()) {
            std::pop_heap(heap.begin(), heap.end(), std::greater<>());
            const Piece p = heap.back();
            heap.pop_back();
            if (p.lower >= best - tol()) break;
            const double c = 0.5 * (p.a + p.b);
            push(p.a, c);
            push(c, p.b);
        }
        return best;
    }

    // Every point of the curve piece over [a, b] lies within
    // rho = hypot((b-a)/2, sweep) of the piece's midpoint, so |q - mid| - rho
    // is a lower bound. Pieces are refined best-first until no remaining
    // lower bound can beat the incumbent by more than the tolerance.
    double graph_distance(double t, const Vec& x) const {
        const Data& d = *data_;
        const GraphRep& g = *d.set.graph();
        const int n = d.set.ambient_dim();
        const Vec q = lift(t, x, n);
        struct Piece {
            double lower, a, b;
            std::size_t point;
            bool operator>(const Piece& o) const { return lower > o.lower; }
        };
        std::vector<Piece> heap;
        const auto hit = d.spacetime_tree.nearest(q);
        double best = hit.distance;
        auto tol = [&] { return std::max(d.opt.tolerance, d.opt.relative_tolerance * best); };
        auto push = [&](double a, double b, std::size_t j) {
            const Vec& y = g.initial.points[j];
            const double c = 0.5 * (a + b);
            const double dc = sfl::distance(q, lift(c, g.bundle.map(c, y), n));
            best = std::min(best, dc);
            const double rho = std::hypot(0.5 * (b - a), sweep_bound(g.bundle, a, b, y));
            if (rho <= tol() || dc - rho >= best - tol()) return;
            heap.push_back({dc - rho, a, b, j});
            std::push_heap(heap.begin(), heap.end(), std::greater<>());
        };
        double bound = best;
        d.spacetime_tree.search(q, bound, [&](std::size_t i, double&) {
            const double a = d.cell_width * double(i % d.cells_per_point);
            push(a, a + d.cell_width, i / d.cells_per_point);
        });
        while (!heap.empty()) {
            std::pop_heap(heap.begin(), heap.end(), std::greater<>());
            const Piece p = heap.back();
            heap.pop_back();
            if (p.lower >= best - tol()) break;
            const double c = 0.5 * (p.a + p.b);
            push(p.a, c, p.point);
            push(c, p.b, p.point);
        }
        return best;
    }

    void build() {
        Data& d = *data_;
        const double T = d.set.horizon();
        if (const auto* p = d.set.product()) {
            d.product_like = true;
            d.product_time = p->time;
            d.space_tree = KdTree(p->space.points);
            d.mode = DistanceMode::exact_parametric;
            return;
        }
        if (const auto* g = d.set.graph()) {
            if (g->bundle.holder_constant == 0.0) {
                // Z(t, x) = Z(0, x): the graph is the product [0,T] x Z(0, S0).
                d.product_like = true;
                d.product_time = TimeSet::interval(0.0, T);
                d.space_tree = KdTree(temporal_section(d.set, 0.0));
                d.mode = DistanceMode::exact_parametric;
                return;
            }
            if (d.opt.time_step < 0 || !(d.opt.tolerance > 0)) throw Error("invalid graph distance options");
            d.mode = DistanceMode::exact_parametric;
            d.error = d.opt.tolerance;
            d.relative_error = d.opt.relative_tolerance;
            if (g->bundle.shift) {
                d.space_tree = KdTree(g->initial.points);
                d.translation = true;
                return;
            }
            const double step = d.opt.time_step > 0 ? d.opt.time_step : T / 256.0;
            const int cells = std::max(1, int(std::ceil(T / step)));
            const double h = T / double(cells);
            const int n = d.set.ambient_dim();
            std::vector<Vec> centers;
            std::vector<double> radii;
            centers.reserve(std::size_t(cells) * g->initial.points.size());
            for (const auto& y : g->initial.points) {
                for (int k = 0; k < cells; ++k) {
                    const double a = h * double(k), b = h * double(k + 1);
                    centers.push_back(lift(0.5 * (a + b), g->bundle.map(0.5 * (a + b), y), n));
                    radii.push_back(std::hypot(0.5 * h, sweep_bound(g->bundle, a, b, y)));
                }
            }
            d.cells_per_point = std::size_t(cells);
            d.cell_width = h;
            d.spacetime_tree = KdTree(std::move(centers), std::move(radii));
            d.graph_cells = true;
            d.mode = DistanceMode::exact_parametric;
            d.error = d.opt.tolerance;
            d.relative_error = d.opt.relative_tolerance;
            return;
        }
        const auto* c = d.set.cloud();
        std::vector<Vec> pts;
        const int n = d.set.ambient_dim();
        for (const auto& p : c->points) {
            Vec q(n + 1);
            q[0] = p.t;
            for (int i = 0; i < n; ++i) q[i + 1] = p.x[i];
            pts.push_back(q);
        }
        d.spacetime_tree = KdTree(std::move(pts));
        d.mode = DistanceMode::sampled;
        d.error = 0.5 * d.opt.cloud_mesh;
    }

    // Built once in the constructor, immutable afterwards; copies share it.
    std::shared_ptr<Data> data_;
};

// ---------------------------------------------------------------------------
// Neighbourhood measures by hit-or-miss Monte Carlo.

struct MeasureEstimate {
    double epsilon = 0.0;
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t sample_count = 0;
    std::size_t hits = 0;
    Box domain;
    bool low_confidence = false;
    /// The domain does not contain the full epsilon-neighbourhood.
    bool domain_clipped = false;
};

struct MeasureOptions {
    std::size_t min_samples = std::size_t{1} << 14;
    std::size_t max_samples = std::size_t{1} << 20;
    /// Stop once the relative standard error of the smallest scale drops
    /// below this value.
    double target_rel_stderr = 0.03;
    std::uint64_t seed = 0;
    DistanceKind kind = DistanceKind::section;
};

namespace detail {
inline constexpr std::size_t kMeasureBlock = 4096;

inline bool neighbourhood_clipped(const std::vector<Vec>& section, double eps, const Box& domain) {
    for (const auto& p : section)
        for (int i = 0; i < domain.dim(); ++i)
            if (p[i] - eps < domain.lo[i] || p[i] + eps > domain.hi[i]) return true;
    return false;
}
}  // namespace detail

namespace detail {

// One sample stream shared by all scales of a ladder, drawn in `domain`.
template <class Dist>
std::vector<MeasureEstimate> shared_sausage(Dist& dist, const std::vector<double>& eps_ladder, const Box& domain,
                                            const MeasureOptions& opt, std::uint64_t stream, bool never_hits) {
    const double volume = domain.volume();

    std::vector<std::size_t> hits(eps_ladder.size(), 0);
    std::size_t n = 0;
    std::vector<std::vector<std::size_t>> block_hits;
    auto run_blocks = [&](std::size_t first_block, std::size_t count) {
        block_hits.assign(count, std::vector<std::size_t>(eps_ladder.size(), 0));
        parallel_for(count, [&](std::size_t b) {
            const std::size_t base = (first_block + b) * detail::kMeasureBlock;
            auto& h = block_hits[b];
            for (std::size_t i = 0; i < detail::kMeasureBlock; ++i) {
                CounterRng rng(opt.seed, stream, base + i);
                const Vec x = rng.uniform_in(domain);
                const double d = never_hits ? kInf : dist(x);
                for (std::size_t k = 0; k < eps_ladder.size(); ++k)
                    if (d < eps_ladder[k]) ++h[k];
            }
        });
        for (const auto& h : block_hits)
            for (std::size_t k = 0; k < h.size(); ++k) hits[k] += h[k];
    };

    const std::size_t min_blocks = std::max<std::size_t>(1, opt.min_samples / detail::kMeasureBlock);
    const std::size_t max_blocks = std::max(min_blocks, opt.max_samples / detail::kMeasureBlock);
    std::size_t blocks = 0;
    std::size_t step = min_blocks;
    const std::size_t k_min = std::size_t(std::min_element(eps_ladder.begin(), eps_ladder.end()) - eps_ladder.begin());
    while (true) {
        const std::size_t take = std::min(step, max_blocks - blocks);
        run_blocks(blocks, take);
        blocks += take;
        n = blocks * detail::kMeasureBlock;
        const double p = double(hits[k_min]) / double(n);
        const double rel = hits[k_min] > 0 ? std::sqrt((1.0 - p) / (p * double(n))) : kInf;
        if (never_hits || rel <= opt.target_rel_stderr || blocks >= max_blocks) break;
        step = blocks;  // double the sample count each round
    }

    std::vector<MeasureEstimate> out;
    for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
        MeasureEstimate m;
        m.epsilon = eps_ladder[k];
        m.sample_count = n;
        m.hits = hits[k];
        m.domain = domain;
        const double p = double(hits[k]) / double(n);
        m.value = volume * p;
        m.standard_error = volume * std::sqrt(p * (1.0 - p) / double(n));
        const double rel = hits[k] > 0 ? std::sqrt((1.0 - p) / (p * double(n))) : kInf;
        m.low_confidence = rel > opt.target_rel_stderr && !never_hits;
        out.push_back(m);
    }
    return out;
}

inline Box grown_bounds(const std::vector<Vec>& points, double eps, const Box& domain) {
    Box b = domain;
    for (int i = 0; i < domain.dim(); ++i) {
        double lo = kInf, hi = -kInf;
        for (const auto& p : points) {
            lo = std::min(lo, p[i]);
            hi = std::max(hi, p[i]);
        }
        b.lo[i] = std::clamp(lo - eps, domain.lo[i], domain.hi[i]);
        b.hi[i] = std::clamp(hi + eps, domain.lo[i], domain.hi[i]);
    }
    return b;
}

}  // namespace detail

/// Hit-or-miss estimate of mu_n({x in domain : dist(x) < eps}) for every
/// eps of a ladder. With clip_points (the whole set) each scale samples only
/// the bounding box of the set grown by eps, which contains the neighbourhood;
/// scales sharing a box share one stream. Sampling continues in blocks until
/// the smallest scale of a stream reaches the target relative error or the
/// budget runs out (flagged low_confidence).
template <class Dist>
std::vector<MeasureEstimate> sausage_measures(Dist&& dist, const std::vector<double>& eps_ladder, const Box& domain,
                                              const MeasureOptions& opt, std::uint64_t stream,
                                              const std::vector<Vec>& clip_points = {}, bool never_hits = false) {
    if (eps_ladder.empty()) throw Error("empty epsilon ladder");
    for (double eps : eps_ladder)
        if (!(eps > 0)) throw Error("neighbourhood radius must be positive");

    std::vector<MeasureEstimate> out(eps_ladder.size());
    std::vector<bool> done(eps_ladder.size(), false);
    for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
        if (done[k]) continue;
        const Box box = clip_points.empty() ? domain : detail::grown_bounds(clip_points, eps_ladder[k], domain);
        std::vector<std::size_t> group;
        for (std::size_t j = k; j < eps_ladder.size(); ++j) {
            if (done[j]) continue;
            const Box bj = clip_points.empty() ? domain : detail::grown_bounds(clip_points, eps_ladder[j], domain);
            if (bj.lo == box.lo && bj.hi == box.hi) group.push_back(j);
        }
        std::vector<double> sub;
        for (std::size_t j : group) sub.push_back(eps_ladder[j]);
        const bool empty_box = !(box.volume() > 0);
        auto ms = empty_box ? std::vector<MeasureEstimate>(sub.size())
                            : detail::shared_sausage(dist, sub, box, opt, mix_keys(stream, k), never_hits);
        for (std::size_t g = 0; g < group.size(); ++g) {
            MeasureEstimate m = ms[g];
            m.epsilon = sub[g];
            m.domain = domain;
            m.domain_clipped = detail::neighbourhood_clipped(clip_points, sub[g], domain);
            out[group[g]] = m;
            done[group[g]] = true;
        }
    }
    return out;
}

/// Neighbourhoods of S(t) (opt.kind == section) or of {x : d_S(t,x) < eps}
/// (opt.kind == spacetime); samples are keyed by (seed, t).
inline std::vector<MeasureEstimate> neighborhood_measures(const DistanceEvaluator& e, double t,
                                                          const std::vector<double>& eps_ladder, const Box& domain,
                                                          MeasureOptions opt = {}) {
    if (domain.dim() != e.ambient_dim()) throw Error("domain dimension mismatch");
    const std::uint64_t stream = mix_keys(key_of(t), 0x5a05a6e);
    if (opt.kind == DistanceKind::spacetime)
        return sausage_measures([&](const Vec& x) { return e.dist_spacetime(t, x); }, eps_ladder, domain, opt, stream);
    const SectionIndex section = e.section(t);
    if (section.empty() && !e.set().product()) throw Error("empty section");
    const bool empty = !e.section_nonempty(t);
    return sausage_measures([&](const Vec& x) { return section.distance(x); }, eps_ladder, domain, opt, stream,
                            section.points(), empty);
}

/// Neighbourhood measures of a finite point set.
inline std::vector<MeasureEstimate> point_set_measures(const std::vector<Vec>& points,
                                                       const std::vector<double>& eps_ladder, const Box& domain,
                                                       MeasureOptions opt = {}) {
    const KdTree tree(points);
    if (tree.empty()) throw Error("empty point set");
    if (tree.dim() != domain.dim()) throw Error("domain dimension mismatch");
    return sausage_measures([&](const Vec& x) { return tree.nearest(x).distance; }, eps_ladder, domain, opt,
                            0x5e70f, points);
}

inline MeasureEstimate neighborhood_measure(const DistanceEvaluator& e, double t, double eps, const Box& domain,
                                            MeasureOptions opt = {}) {
    return neighborhood_measures(e, t, {eps}, domain, opt).front();
}

/// Exact length of the eps-neighbourhood of a finite set in R^1 (union of
/// intervals); the deterministic counterpart of neighborhood_measure in 1-D.
inline double interval_union_length(std::vector<double> pts, double eps, double lo = -kInf, double hi = kInf) {
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    double a = std::max(lo, pts[0] - eps), b = std::min(hi, pts[0] + eps);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double l = std::max(lo, pts[i] - eps), r = std::min(hi, pts[i] + eps);
        if (l <= b) {
            b = std::max(b, r);
        } else {
            total += std::max(0.0, b - a);
            a = l;
            b = r;
        }
    }
    return total + std::max(0.0, b - a);
}

// ---------------------------------------------------------------------------
// Section bound for trajectory graphs:
//   d_S(t,x) <= d_{S(t)}(x) <= (K+1) d_S(t,x)^alpha   whenever d_S(t,x) < 1,
// and for Lipschitz graphs also d_{S(t)}(x) / (K+1) <= d_S(t,x).

struct SectionBoundReport {
    std::size_t samples = 0;
    std::size_t upper_violations = 0;      ///< d_sec > (K+1) d_S^alpha
    std::size_t lower_violations = 0;      ///< d_S - err > d_sec
    std::size_t lipschitz_violations = 0;  ///< alpha = 1: d_sec / (K+1) > d_S
    double worst_ratio = 0.0;              ///< max d_sec / ((K+1) d_S^alpha)
    double evaluator_error = 0.0;          ///< largest error bound over the samples
    bool lipschitz_checked = false;
    std::size_t violations() const { return upper_violations + lower_violations + lipschitz_violations; }
};

/// Draws `samples` points with d_S < 1 (half uniform near the section's
/// bounding box, half at log-uniform radii around section points) and
/// checks the comparison inequalities. The evaluator's sampled d_S never
/// underestimates d_S, so the upper bound is tested without slack and the
/// lower bound with the reported discretization error.
inline SectionBoundReport check_section_bound(const DistanceEvaluator& e, std::size_t samples, std::uint64_t seed) {
    const auto* g = e.set().graph();
    if (!g) throw Error("section bound needs a graph set");
    const double alpha = g->bundle.holder_exponent, K = g->bundle.holder_constant;
    const double T = e.horizon();
    const int n = e.ambient_dim();

    SectionBoundReport rep;
    rep.evaluator_error = e.error_bound();
    rep.lipschitz_checked = alpha == 1.0;

    struct Outcome {
        bool used = false;
        bool upper = false, lower = false, lip = false;
        double ratio = 0.0;
        double err = 0.0;
    };
    std::vector<Outcome> results(samples);
    parallel_for(samples, [&](std::size_t i) {
        CounterRng rng(seed, 0x5ec7b0, i);
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double t = rng.uniform(0.0, T);
            const SectionIndex sec = e.section(t);
            Vec x;
            const auto& pts = sec.points();
            const Vec& anchor = pts[std::size_t(rng.uniform() * double(pts.size())) % pts.size()];
            if (i % 2 == 0) {
                Box bb = bounding_box(pts).expanded(1.0);
                x = rng.uniform_in(bb);
            } else {
                const double r = std::pow(10.0, rng.uniform(-4.0, 0.0));
                Vec dir(n);
                double nn = 0;
                while (nn < 1e-12) {
                    for (int k = 0; k < n; ++k) dir[k] = rng.normal();
                    nn = dir.norm();
                }
                x = anchor + (r / nn) * dir;
            }
            const double ds = e.dist_spacetime(t, x);
            if (!(ds < 1.0) || ds <= 0.0) continue;
            const double err = e.error_bound(ds);
            const double dsec = sec.distance(x);
            Outcome o;
            o.used = true;
            const double bound = (K + 1.0) * std::pow(ds, alpha);
            o.ratio = dsec / bound;
            o.upper = dsec > bound * (1.0 + 1e-12);
            o.lower = ds - err > dsec * (1.0 + 1e-12);
            o.err = err;
            if (alpha == 1.0) o.lip = dsec / (K + 1.0) > ds * (1.0 + 1e-12);
            results[i] = o;
            break;
        }
    });
    for (const auto& o : results) {
        if (!o.used) continue;
        ++rep.samples;
        rep.upper_violations += o.upper;
        rep.lower_violations += o.lower;
        rep.lipschitz_violations += o.lip;
        rep.worst_ratio = std::max(rep.worst_ratio, o.ratio);
        rep.evaluator_error = std::max(rep.evaluator_error, o.err);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Integrals of functions that are singular on S over the tube
// {excision <= d < r0}, by Monte Carlo with a defensive mixture proposal:
// uniform over the domain plus log-uniform radii around section points.

struct TubeIntegral {
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

struct TubeOptions {
    std::size_t samples = 200000;
    std::uint64_t seed = 0;
    double t_begin = 0.0;
    double t_end = 1.0;
    /// Share of samples drawn uniformly over the domain.
    double uniform_share = 0.5;
    /// Sections with more points than this are sampled uniformly only.
    std::size_t max_anchors = 64;
    DistanceKind kind = DistanceKind::spacetime;
};

namespace detail {
inline double unit_sphere_area(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: throw Error("unsupported dimension");
    }
}
}  // namespace detail

/// Integral over t in [t_begin, t_end], x in domain with excision <= d < r0
/// of f(t, x, d), where d is the distance selected by opt.kind.
template <class F>
TubeIntegral integrate_tube(const DistanceEvaluator& e, const Box& domain, double r0, double excision, F&& f,
                            const TubeOptions& opt) {
    if (!(r0 > excision) || !(excision > 0)) throw Error("tube needs 0 < excision < r0");
    if (!(opt.t_end > opt.t_begin)) throw Error("tube time range is empty");
    const int n = domain.dim();
    const double V = domain.volume();
    const double duration = opt.t_end - opt.t_begin;
    const double log_span = std::log(r0 / excision);
    const double sphere = detail::unit_sphere_area(n);

    std::vector<double> contrib(opt.samples, 0.0);
    parallel_for(opt.samples, [&](std::size_t i) {
        CounterRng rng(opt.seed, 0x70be, i);
        const double t = opt.t_begin + duration * rng.uniform();
        std::vector<Vec> anchors = temporal_section(e.set(), t);
        if (e.set().product() && !e.section_nonempty(t)) anchors.clear();
        const bool use_anchors = !anchors.empty() && anchors.size() <= opt.max_anchors;
        const double wu = use_anchors ? opt.uniform_share : 1.0;
        Vec x;
        if (rng.uniform() < wu) {
            x = rng.uniform_in(domain);
        } else {
            const Vec& a = anchors[std::size_t(rng.uniform() * double(anchors.size())) % anchors.size()];
            const double r = excision * std::exp(log_span * rng.uniform());
            Vec dir(n);
            double nn = 0;
            while (nn < 1e-12) {
                for (int k = 0; k < n; ++k) dir[k] = rng.normal();
                nn = dir.norm();
            }
            x = a + (r / nn) * dir;
        }
        if (!domain.contains(x)) return;
        const double d = e.distance(opt.kind, t, x);
        if (d < excision || d >= r0) return;
        double q = wu / V;
        if (use_anchors) {
            double qa = 0.0;
            for (const auto& a : anchors) {
                const double r = distance(x, a);
                if (r >= excision && r <= r0) qa += 1.0 / (log_span * sphere * std::pow(r, double(n)));
            }
            q += (1.0 - wu) * qa / double(anchors.size());
        }
        contrib[i] = f(t, x, d) * duration / q;
    });
    TubeIntegral out;
    out.samples = opt.samples;
    double sum = 0.0, sum2 = 0.0;
    for (double c : contrib) {
        sum += c;
        sum2 += c * c;
    }
    const double N = double(opt.samples);
    out.value = sum / N;
    out.standard_error = std::sqrt(std::max(0.0, sum2 / N - out.value * out.value) / N);
    return out;
}

}  // namespace sfl
