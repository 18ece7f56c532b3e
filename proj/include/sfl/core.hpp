#pragma once

// Shared value types for the library: small fixed-capacity vectors, boxes,
// the error type, counter-based random numbers and a deterministic
// parallel loop.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sfl {

/// Largest vector length handled by the library. Spatial dimension is at most
/// kMaxDim - 1 so that space-time points (t, x) also fit.
inline constexpr int kMaxDim = 4;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point or vector in R^n with n <= kMaxDim, stored inline.
class Vec {
public:
    Vec() = default;
    explicit Vec(int dim) : dim_(dim) { assert(dim >= 0 && dim <= kMaxDim); }
    Vec(std::initializer_list<double> xs) : dim_(static_cast<int>(xs.size())) {
        assert(dim_ <= kMaxDim);
        std::copy(xs.begin(), xs.end(), c_.begin());
    }
    static Vec zeros(int dim) { return Vec(dim); }
    static Vec filled(int dim, double v) {
        Vec r(dim);
        for (int i = 0; i < dim; ++i) r.c_[i] = v;
        return r;
    }
    static Vec unit(int dim, int axis) {
        Vec r(dim);
        r.c_[axis] = 1.0;
        return r;
    }

    int dim() const { return dim_; }
    double operator[](int i) const { return c_[i]; }
    double& operator[](int i) { return c_[i]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < dim_; ++i) c_[i] *= s;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator-(Vec a) { return a *= -1.0; }
    friend bool operator==(const Vec& a, const Vec& b) {
        if (a.dim_ != b.dim_) return false;
        for (int i = 0; i < a.dim_; ++i)
            if (a.c_[i] != b.c_[i]) return false;
        return true;
    }

    double dot(const Vec& o) const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += c_[i] * o.c_[i];
        return s;
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    bool finite() const {
        for (int i = 0; i < dim_; ++i)
            if (!std::isfinite(c_[i])) return false;
        return true;
    }

private:
    std::array<double, kMaxDim> c_{};
    int dim_ = 0;
};

inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

/// (a, b)^perp = (-b, a).
inline Vec perp(const Vec& v) {
    assert(v.dim() == 2);
    return Vec{-v[1], v[0]};
}

/// Space-time point (t, x).
struct SpaceTimePoint {
    double t = 0.0;
    Vec x;
};

inline double spacetime_distance(double t, const Vec& x, double s, const Vec& y) {
    const double dt = t - s;
    return std::sqrt(dt * dt + (x - y).norm2());
}

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec l, Vec h) : lo(l), hi(h) {
        if (lo.dim() != hi.dim()) throw Error("box corners differ in dimension");
        for (int i = 0; i < lo.dim(); ++i)
            if (!(hi[i] >= lo[i])) throw Error("box has hi < lo");
    }
    static Box cube(int dim, double lo, double hi) {
        return Box(Vec::filled(dim, lo), Vec::filled(dim, hi));
    }

    int dim() const { return lo.dim(); }
    double width(int i) const { return hi[i] - lo[i]; }
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= width(i);
        return v;
    }
    bool contains(const Vec& x) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
    Vec center() const { return 0.5 * (lo + hi); }
    Box expanded(double r) const {
        return Box(lo - Vec::filled(dim(), r), hi + Vec::filled(dim(), r));
    }
    /// Point at relative coordinates u in [0,1]^n.
    Vec at(const Vec& u) const {
        Vec x(dim());
        for (int i = 0; i < dim(); ++i) x[i] = lo[i] + u[i] * width(i);
        return x;
    }
};

/// Smallest box containing all points.
inline Box bounding_box(const std::vector<Vec>& pts) {
    if (pts.empty()) throw Error("bounding box of an empty point set");
    Vec lo = pts.front(), hi = pts.front();
    for (const auto& p : pts)
        for (int i = 0; i < p.dim(); ++i) {
            lo[i] = std::min(lo[i], p[i]);
            hi[i] = std::max(hi[i], p[i]);
        }
    return Box(lo, hi);
}

// ---------------------------------------------------------------------------
// Counter-based random numbers. A draw is a pure function of
// (seed, stream, index), so results do not depend on evaluation order or on
// how work is split between threads.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

/// Stream key for a floating-point parameter (e.g. a time or a radius).
inline std::uint64_t key_of(double v) {
    return std::bit_cast<std::uint64_t>(v);
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0)
        : key_(mix_keys(seed, stream)), counter_(index << 16) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    Vec uniform_in(const Box& box) {
        Vec u(box.dim());
        for (int i = 0; i < box.dim(); ++i) u[i] = uniform();
        return box.at(u);
    }
    /// Standard normal by Box-Muller.
    double normal() {
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

// ---------------------------------------------------------------------------
// Parallel loop with static index ownership. Callers write per-index results
// and reduce them serially, which keeps every result independent of the
// worker count.

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

/// 0 selects std::thread::hardware_concurrency().
inline void set_thread_count(unsigned n) { detail::thread_setting() = n; }

inline unsigned thread_count() {
    const unsigned n = detail::thread_setting();
    if (n != 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Small numeric helpers.

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw Error("least squares needs at least two paired samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0) throw Error("least squares with degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    if (n > 2) {
        const double rss = std::max(0.0, syy - f.slope * sxy);
        f.slope_stderr = std::sqrt(rss / double(n - 2) / sxx);
    }
    return f;
}

/// `count` values from `hi` down to `lo`, equally spaced in log scale.
inline std::vector<double> geometric_ladder(double hi, double lo, int count) {
    if (!(hi > 0 && lo > 0 && hi > lo) || count < 2) throw Error("invalid geometric ladder");
    std::vector<double> out(static_cast<std::size_t>(count));
    const double r = std::log(lo / hi) / double(count - 1);
    for (int i = 0; i < count; ++i) out[std::size_t(i)] = hi * std::exp(r * double(i));
    out.back() = lo;
    return out;
}

/// base^-k for k in [k_first, k_last].
inline std::vector<double> power_ladder(double base, int k_first, int k_last) {
    if (!(base > 1) || k_last < k_first) throw Error("invalid power ladder");
    std::vector<double> out;
    for (int k = k_first; k <= k_last; ++k) out.push_back(std::pow(base, -double(k)));
    return out;
}

/// Conjugate exponent: 1/p + 1/p* = 1, with 1 <-> infinity.
inline double conjugate_exponent(double p) {
    if (!(p >= 1.0)) throw Error("exponent must lie in [1, inf]");
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
}

}  // namespace sfl
