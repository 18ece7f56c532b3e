#pragma once

// Box-counting and Minkowski dimension estimates, codimension-print scans,
// and the closed-form print regions for products and isotropic bounds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sfl/core.hpp"
#include "sfl/csv.hpp"
#include "sfl/distance.hpp"
#include "sfl/fractal_sets.hpp"

namespace sfl {

enum class DimensionMethod { grid_count, minkowski };

inline const char* to_string(DimensionMethod m) { return m == DimensionMethod::grid_count ? "grid_count" : "minkowski"; }

struct DimensionEstimate {
    double fitted_dim = 0.0;
    double upper_proxy = 0.0;  ///< largest slope between consecutive scales
    double lower_proxy = 0.0;  ///< smallest slope between consecutive scales
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    double eps_min = 0.0, eps_max = 0.0;
    DimensionMethod method = DimensionMethod::grid_count;
    bool low_confidence = false;
    std::vector<double> eps;     ///< scales used in the fit, decreasing
    std::vector<double> values;  ///< counts or neighbourhood measures
    std::vector<double> stderrs;
};

// ---------------------------------------------------------------------------
// Box counting

namespace detail {

// Exact minimal number of closed intervals of length eps covering a finite
// set of reals: greedy from the left. The relative slack keeps intervals
// whose length is eps up to rounding inside one box.
inline std::size_t cover_count_1d(std::vector<double> xs, double eps) {
    std::sort(xs.begin(), xs.end());
    std::size_t count = 0;
    double reach = -kInf;
    for (double x : xs) {
        if (x > reach) {
            ++count;
            reach = x + eps * (1.0 + 1e-12) + 1e-15 * std::abs(x);
        }
    }
    return count;
}

}  // namespace detail

/// Number of eps-boxes meeting A. In R^1 this is the exact minimal cover by
/// intervals of length eps; in R^n, n > 1, the occupied cells of a grid of
/// mesh eps / sqrt(n) anchored at the coordinatewise minimum (cell diameter
/// eps).
inline std::size_t box_count(const std::vector<Vec>& a, double eps) {
    if (a.empty()) throw Error("box count of an empty set");
    if (!(eps > 0)) throw Error("box size must be positive");
    const int n = a.front().dim();
    if (n == 1) {
        std::vector<double> xs;
        xs.reserve(a.size());
        for (const auto& p : a) xs.push_back(p[0]);
        return detail::cover_count_1d(std::move(xs), eps);
    }
    const double mesh = eps / std::sqrt(double(n));
    Vec lo = a.front();
    for (const auto& p : a)
        for (int i = 0; i < n; ++i) lo[i] = std::min(lo[i], p[i]);
    std::vector<std::array<std::int64_t, kMaxDim>> cells;
    cells.reserve(a.size());
    for (const auto& p : a) {
        std::array<std::int64_t, kMaxDim> c{};
        for (int i = 0; i < n; ++i) c[std::size_t(i)] = std::int64_t(std::floor((p[i] - lo[i]) / mesh));
        cells.push_back(c);
    }
    std::sort(cells.begin(), cells.end());
    return std::size_t(std::unique(cells.begin(), cells.end()) - cells.begin());
}

inline double diameter_bound(const std::vector<Vec>& a) {
    const Box b = bounding_box(a);
    return (b.hi - b.lo).norm();
}

/// Dyadic ladder diam/4, diam/8, ... with at most `max_scales` entries and
/// none below `4 * finest_scale`, where a prefractal stops resembling its
/// limit set.
inline std::vector<double> default_ladder(double diameter, double finest_scale, int max_scales = 12) {
    std::vector<double> out;
    double eps = diameter / 4.0;
    while (int(out.size()) < max_scales && eps >= 4.0 * finest_scale && eps > 0) {
        out.push_back(eps);
        eps *= 0.5;
    }
    return out;
}

namespace detail {

inline void check_ladder(const std::vector<double>& ladder) {
    if (ladder.size() < 4) throw Error("dimension fit needs at least 4 scales");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0)) throw Error("scales must be positive");
        if (i && !(ladder[i] < ladder[i - 1])) throw Error("scale ladder must be strictly decreasing");
    }
}

// Slope of y against x by least squares, plus the extreme slopes between
// consecutive points. For increasing x the least-squares slope is a
// weighted mean of the consecutive slopes, so it lies between them.
struct SlopeFit {
    LinearFit fit;
    double max_local = -kInf, min_local = kInf;
};

inline SlopeFit fit_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    SlopeFit s;
    s.fit = least_squares(x, y);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double m = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        s.max_local = std::max(s.max_local, m);
        s.min_local = std::min(s.min_local, m);
    }
    return s;
}

}  // namespace detail

/// Slope of log N(A, eps) against -log eps.
inline DimensionEstimate estimate_box_dimension(const std::vector<Vec>& a, const std::vector<double>& ladder) {
    detail::check_ladder(ladder);
    DimensionEstimate est;
    est.method = DimensionMethod::grid_count;
    std::vector<double> counts(ladder.size());
    parallel_for(ladder.size(), [&](std::size_t k) { counts[k] = double(box_count(a, ladder[k])); });
    std::vector<double> x, y;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        x.push_back(-std::log(ladder[k]));
        y.push_back(std::log(counts[k]));
    }
    if (std::all_of(counts.begin(), counts.end(), [&](double c) { return c == counts.front(); }))
        throw Error("degenerate ladder: fewer than 2 distinct box counts");
    const auto s = detail::fit_slopes(x, y);
    est.fitted_dim = s.fit.slope;
    est.upper_proxy = s.max_local;
    est.lower_proxy = s.min_local;
    est.r_squared = s.fit.r_squared;
    est.slope_stderr = s.fit.slope_stderr;
    est.eps = ladder;
    est.values = counts;
    est.stderrs.assign(ladder.size(), 0.0);
    est.eps_max = ladder.front();
    est.eps_min = ladder.back();
    return est;
}

/// As above, rejecting ladders with fewer than 4 scales above the set's
/// finest generation scale.
inline DimensionEstimate estimate_box_dimension(const InitialSet& a, const std::vector<double>& ladder) {
    std::size_t valid = 0;
    for (double eps : ladder) valid += eps > a.finest_scale;
    if (valid < 4) throw Error("fewer than 4 scales inside the validity window of " + a.generator_tag);
    return estimate_box_dimension(a.points, ladder);
}

namespace detail {

inline DimensionEstimate minkowski_from_measures(const std::vector<MeasureEstimate>& ms, int n,
                                                 const std::vector<double>& ladder) {
    DimensionEstimate est;
    est.method = DimensionMethod::minkowski;
    std::vector<double> x, y;
    for (const auto& m : ms) {
        est.eps.push_back(m.epsilon);
        est.values.push_back(m.value);
        est.stderrs.push_back(m.standard_error);
        if (m.hits == 0) {
            est.low_confidence = true;
            continue;
        }
        est.low_confidence = est.low_confidence || m.low_confidence;
        x.push_back(std::log(m.epsilon));
        y.push_back(std::log(m.value));
    }
    if (x.size() < 2) throw Error("minkowski fit: fewer than 2 scales with hits");
    // log mu rises with log eps; local slopes are taken in increasing x.
    std::reverse(x.begin(), x.end());
    std::reverse(y.begin(), y.end());
    const auto s = fit_slopes(x, y);
    est.fitted_dim = double(n) - s.fit.slope;
    est.upper_proxy = double(n) - s.min_local;
    est.lower_proxy = double(n) - s.max_local;
    est.r_squared = s.fit.r_squared;
    est.slope_stderr = s.fit.slope_stderr;
    if (est.r_squared < 0.9) est.low_confidence = true;
    est.eps_max = ladder.front();
    est.eps_min = ladder.back();
    return est;
}

}  // namespace detail

/// n - slope of log mu_n({d_{S(t)} < eps}) against log eps.
inline DimensionEstimate estimate_minkowski_dimension(const DistanceEvaluator& e, double t,
                                                      const std::vector<double>& ladder, const Box& domain,
                                                      MeasureOptions opt = {}) {
    detail::check_ladder(ladder);
    const auto ms = neighborhood_measures(e, t, ladder, domain, opt);
    return detail::minkowski_from_measures(ms, domain.dim(), ladder);
}

/// Same for a finite point set in R^n.
inline DimensionEstimate estimate_minkowski_dimension(const std::vector<Vec>& a, const std::vector<double>& ladder,
                                                      const Box& domain, MeasureOptions opt = {}) {
    detail::check_ladder(ladder);
    const auto ms = point_set_measures(a, ladder, domain, opt);
    return detail::minkowski_from_measures(ms, domain.dim(), ladder);
}

/// Space-time points of a product with a sampled time factor, as a set in
/// R^(n+1) with time as the first coordinate.
inline std::vector<Vec> lifted_points(const SpaceTimeSet& s) {
    const auto* p = s.product();
    if (!p || p->time.is_interval) throw Error("lifted points need a product with a sampled time factor");
    std::vector<Vec> out;
    out.reserve(p->time.samples.size() * p->space.points.size());
    const int n = s.ambient_dim();
    for (double t : p->time.samples)
        for (const auto& x : p->space.points) {
            Vec q(n + 1);
            q[0] = t;
            for (int i = 0; i < n; ++i) q[i + 1] = x[i];
            out.push_back(q);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Print regions in closed form

enum class Region { member, nonmember, undecided };

inline const char* to_string(Region r) {
    switch (r) {
        case Region::member: return "member";
        case Region::nonmember: return "nonmember";
        default: return "undecided";
    }
}

/// Product T x A in [0,T] x R^n with box dimensions dim_t, dim_a (upper and
/// lower dimensions taken equal). Member if alpha < n - dim_a, or
/// beta < 1 - dim_t, or alpha beta < alpha (1 - dim_t) + beta (n - dim_a);
/// nonmember if alpha beta > alpha (1 - dim_t) + beta (n - dim_a).
inline Region predicted_print_region(double dim_t, double dim_a, int n, double alpha, double beta) {
    if (!(dim_t >= 0 && dim_t <= 1)) throw Error("time dimension outside [0,1]");
    if (!(dim_a >= 0 && dim_a <= n)) throw Error("space dimension outside [0,n]");
    if (!(alpha > 0 && beta > 0)) throw Error("print exponents must lie in (0, inf]");
    const double ct = 1.0 - dim_t, ca = double(n) - dim_a;
    if (alpha < ca || beta < ct) return Region::member;
    if (std::isinf(alpha)) return Region::nonmember;
    // Divide through by beta so beta = inf is handled as a limit.
    const double lhs = alpha;
    const double rhs = std::isinf(beta) ? ca : alpha * ct / beta + ca;
    if (lhs < rhs) return Region::member;
    if (lhs > rhs) return Region::nonmember;
    return Region::undecided;
}

/// Isotropic bounds for S in R^(n+1): alpha < n+1 - dim_B S gives (alpha,
/// alpha) in the print, alpha > n+1 - dim_LB S excludes it.
inline Region isotropic_print_bound(double dim_b, double dim_lb, int n_plus_1, double alpha) {
    if (!(dim_lb <= dim_b)) throw Error("lower box dimension exceeds upper");
    if (alpha < double(n_plus_1) - dim_b) return Region::member;
    if (alpha > double(n_plus_1) - dim_lb) return Region::nonmember;
    return Region::undecided;
}

// ---------------------------------------------------------------------------
// Empirical print membership

enum class Verdict { member, non_member, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::member: return "member";
        case Verdict::non_member: return "non_member";
        default: return "inconclusive";
    }
}

struct SectionScaling {
    double t = 0.0;
    double gamma = 0.0;  ///< mu_n({d_{S(t)} < eps}) ~ eps^gamma; inf for empty sections
    double stderr_ = 0.0;
    double r_squared = 1.0;
    bool low_confidence = false;
};

struct PrintOptions {
    std::vector<double> ladder;  ///< spatial scales, decreasing; filtered to > eps_floor
    double eps_floor = 1e-6;
    int time_points = 9;
    double margin = 0.1;
    MeasureOptions measure{.min_samples = std::size_t{1} << 14,
                           .max_samples = std::size_t{1} << 18,
                           .target_rel_stderr = 0.05};
};

struct PrintVerdict {
    double alpha = 0.0, beta = 0.0;
    Verdict verdict = Verdict::inconclusive;
    std::vector<SectionScaling> scan;
    double gamma_min = kInf, gamma_max = 0.0;
    /// Time codimension: mu_1({t : dist(t, times with nonempty section) < s}) ~ s^kappa.
    double kappa = 0.0;
    double holder_exponent = 1.0;  ///< graphs only
    std::string reason;
};

namespace detail {

// Times of the projection of S onto the time axis, for the kappa fit.
inline double time_neighbourhood(const SpaceTimeSet& s, double r) {
    const double T = s.horizon();
    if (const auto* p = s.product()) {
        if (p->time.is_interval) return std::min(T, p->time.b + r) - std::max(0.0, p->time.a - r);
        return interval_union_length(p->time.samples, r, 0.0, T);
    }
    return T;
}

inline std::vector<double> scan_times(const SpaceTimeSet& s, int count) {
    std::vector<double> out;
    const auto* p = s.product();
    if (p && !p->time.is_interval) {
        const auto& ts = p->time.samples;
        for (int k = 0; k < count; ++k) {
            const std::size_t i = count > 1 ? std::size_t(std::llround(double(ts.size() - 1) * k / (count - 1))) : 0;
            out.push_back(ts[i]);
        }
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    const double a = p ? p->time.a : 0.0, b = p ? p->time.b : s.horizon();
    for (int k = 0; k < count; ++k) out.push_back(count > 1 ? a + (b - a) * k / (count - 1) : a);
    return out;
}

}  // namespace detail

/// Decides whether d_S^{-1} is in L^beta(0,T; L^alpha_loc) from scaling fits.
///
/// gamma(t) is fitted on the sectional neighbourhoods; kappa on the time
/// projection. For products d_S^2 = d_T^2 + d_A^2 and the spatial integral
/// of d_S^{-alpha} near a time at distance tau from T behaves like
/// tau^(gamma - alpha), which gives the score alpha kappa / beta + gamma - alpha
/// (positive: member). For graphs d_{S(t)} <= (K+1) d_S^a_H bounds d_S
/// below, so alpha < a_H gamma is sufficient, while d_S <= d_{S(t)} makes
/// alpha > gamma sufficient for divergence. Margins widen both tests.
inline PrintVerdict print_membership(const DistanceEvaluator& e, double alpha, double beta, const Box& domain,
                                     const PrintOptions& opt) {
    if (!(alpha > 0 && beta > 0)) throw Error("print exponents must lie in (0, inf]");
    if (!(opt.eps_floor >= e.error_bound())) throw Error("eps_floor must exceed the evaluator error");
    const SpaceTimeSet& s = e.set();
    if (s.cloud()) throw Error("print membership needs a product or graph set");
    std::vector<double> ladder;
    for (double eps : opt.ladder)
        if (eps > opt.eps_floor) ladder.push_back(eps);
    detail::check_ladder(ladder);

    PrintVerdict v;
    v.alpha = alpha;
    v.beta = beta;
    bool shaky = false;
    const int n = s.ambient_dim();
    for (double t : detail::scan_times(s, opt.time_points)) {
        SectionScaling sc;
        sc.t = t;
        if (!e.section_nonempty(t)) {
            sc.gamma = kInf;
            v.scan.push_back(sc);
            continue;
        }
        MeasureOptions mo = opt.measure;
        mo.kind = DistanceKind::section;
        const auto est = estimate_minkowski_dimension(e, t, ladder, domain, mo);
        sc.gamma = double(n) - est.fitted_dim;
        sc.stderr_ = est.slope_stderr;
        sc.r_squared = est.r_squared;
        sc.low_confidence = est.low_confidence;
        shaky = shaky || sc.low_confidence;
        v.gamma_min = std::min(v.gamma_min, sc.gamma);
        v.gamma_max = std::max(v.gamma_max, std::isinf(sc.gamma) ? v.gamma_max : sc.gamma);
        v.scan.push_back(sc);
    }
    if (shaky) {
        v.reason = "low-confidence section fit";
        return v;
    }
    if (std::isinf(v.gamma_min)) {
        v.verdict = Verdict::member;
        v.reason = "all scanned sections empty";
        return v;
    }

    const double m = opt.margin;
    if (const auto* g = s.graph()) {
        v.holder_exponent = g->bundle.holder_exponent;
        v.kappa = 0.0;
        if (alpha < v.holder_exponent * (v.gamma_min - m)) {
            v.verdict = Verdict::member;
            v.reason = "alpha < a_H (gamma_min - margin)";
        } else if (alpha > v.gamma_max + m) {
            v.verdict = Verdict::non_member;
            v.reason = "alpha > gamma + margin at every scanned time";
        } else {
            v.reason = "between the section-bound and divergence tests";
        }
        return v;
    }

    std::vector<double> lx, ly;
    for (double r : ladder) {
        lx.push_back(std::log(r));
        ly.push_back(std::log(detail::time_neighbourhood(s, r)));
    }
    v.kappa = std::clamp(least_squares(lx, ly).slope, 0.0, 1.0);
    auto score = [&](double gamma, double kappa) {
        const double time_term = std::isinf(beta) ? 0.0 : alpha * std::max(0.0, kappa) / beta;
        return time_term + gamma - alpha;
    };
    if (score(v.gamma_min - m, v.kappa - m) > 0) {
        v.verdict = Verdict::member;
        v.reason = "score positive with margin";
    } else if (score(v.gamma_min + m, v.kappa + m) < 0) {
        v.verdict = Verdict::non_member;
        v.reason = "score negative with margin";
    } else {
        v.reason = "score within margin band";
    }
    return v;
}

// ---------------------------------------------------------------------------
// Weak Chebyshev inequality, sample by sample:
//   mu_n({d < eps}) <= eps^q * integral over {d < eps} of d^-q.

struct ChebyshevCheck {
    double eps = 0.0, q = 0.0;
    double lhs = 0.0, rhs = 0.0;
    double lhs_stderr = 0.0;
    bool holds = true;
};

inline ChebyshevCheck weak_chebyshev_check(const DistanceEvaluator& e, double t, double eps, double q,
                                           const Box& domain, std::size_t samples, std::uint64_t seed) {
    const SectionIndex sec = e.section(t);
    if (sec.empty()) throw Error("empty section");
    std::vector<double> hit(samples, 0.0), weight(samples, 0.0);
    const std::uint64_t stream = mix_keys(key_of(t), 0xc4eb);
    parallel_for(samples, [&](std::size_t i) {
        CounterRng rng(seed, stream, i);
        const double d = sec.distance(rng.uniform_in(domain));
        if (d < eps) {
            hit[i] = 1.0;
            weight[i] = d > 0 ? std::pow(eps / d, q) : kInf;
        }
    });
    ChebyshevCheck c;
    c.eps = eps;
    c.q = q;
    const double V = domain.volume(), N = double(samples);
    double h = 0, w = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        h += hit[i];
        w += weight[i];
    }
    c.lhs = V * h / N;
    c.rhs = V * w / N;
    c.lhs_stderr = V * std::sqrt((h / N) * (1 - h / N) / N);
    c.holds = c.lhs <= c.rhs;
    return c;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_box_counts_csv(std::ostream& os, const DimensionEstimate& est) {
    CsvWriter csv(os, {"epsilon", "count"});
    for (std::size_t k = 0; k < est.eps.size(); ++k) csv.row({est.eps[k], (long long)std::llround(est.values[k])});
}

inline void write_measures_csv(std::ostream& os, const DimensionEstimate& est) {
    CsvWriter csv(os, {"epsilon", "measure", "stderr"});
    for (std::size_t k = 0; k < est.eps.size(); ++k) csv.row({est.eps[k], est.values[k], est.stderrs[k]});
}

inline void write_fit_csv(std::ostream& os, const std::vector<std::pair<std::string, DimensionEstimate>>& fits) {
    CsvWriter csv(os, {"set", "method", "fitted_dim", "upper_proxy", "lower_proxy", "r_squared", "eps_min",
                       "eps_max", "low_confidence"});
    for (const auto& [name, f] : fits)
        csv.row({name, std::string(to_string(f.method)), f.fitted_dim, f.upper_proxy, f.lower_proxy, f.r_squared,
                 f.eps_min, f.eps_max, (long long)f.low_confidence});
}

inline void write_scan_csv(std::ostream& os, const PrintVerdict& v) {
    CsvWriter csv(os, {"t", "gamma", "stderr"});
    for (const auto& s : v.scan) csv.row({s.t, s.gamma, s.stderr_});
}

inline void write_verdict_csv(std::ostream& os, const PrintVerdict& v, double margin, double eps_floor) {
    CsvWriter csv(os, {"alpha", "beta", "margin", "eps_floor", "gamma_min", "gamma_max", "kappa", "holder_exponent",
                       "verdict"});
    csv.row({v.alpha, v.beta, margin, eps_floor, v.gamma_min, v.gamma_max, v.kappa, v.holder_exponent,
             std::string(to_string(v.verdict))});
}

}  // namespace sfl
