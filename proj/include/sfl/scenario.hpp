#pragma once

// Scenario configs (JSON) and the runner behind the command-line tool.
// Every key is checked: anything unrecognized fails before computation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfl/dimension.hpp"
#include "sfl/flow.hpp"
#include "sfl/transport.hpp"
#include "sfl/vortex_wave.hpp"

namespace sfl {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

class ConfigError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Strict reader

class ConfigNode {
public:
    ConfigNode(const json& j, std::string path, std::shared_ptr<std::vector<std::string>> unknown = nullptr)
        : j_(&j), path_(std::move(path)), unknown_(unknown ? unknown : std::make_shared<std::vector<std::string>>()) {
        if (!j.is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& k) {
        used_.insert(k);
        return j_->contains(k);
    }
    double num(const std::string& k) { return to_num(need(k), key(k)); }
    double num(const std::string& k, double def) { return has(k) ? to_num(j_->at(k), key(k)) : def; }
    long long integer(const std::string& k, long long def) {
        if (!has(k)) return def;
        const json& v = j_->at(k);
        if (!v.is_number_integer()) throw ConfigError(key(k) + ": expected an integer");
        return v.get<long long>();
    }
    bool flag(const std::string& k, bool def) {
        if (!has(k)) return def;
        const json& v = j_->at(k);
        if (!v.is_boolean()) throw ConfigError(key(k) + ": expected true or false");
        return v.get<bool>();
    }
    std::string str(const std::string& k) {
        const json& v = need(k);
        if (!v.is_string()) throw ConfigError(key(k) + ": expected a string");
        return v.get<std::string>();
    }
    std::string str(const std::string& k, const std::string& def) { return has(k) ? str(k) : def; }
    std::string choice(const std::string& k, const std::string& def, std::initializer_list<const char*> allowed) {
        const std::string s = str(k, def);
        for (const char* a : allowed)
            if (s == a) return s;
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        throw ConfigError(key(k) + ": '" + s + "' is not one of " + list);
    }
    std::vector<double> nums(const std::string& k) {
        const json& v = need(k);
        if (!v.is_array()) throw ConfigError(key(k) + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_num(v[i], key(k) + "[" + std::to_string(i) + "]"));
        return out;
    }
    Vec vec(const std::string& k) {
        const auto xs = nums(k);
        if (xs.empty() || xs.size() > std::size_t(kMaxDim)) throw ConfigError(key(k) + ": expected 1 to 4 coordinates");
        Vec v(int(xs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i) v[int(i)] = xs[i];
        return v;
    }
    Vec vec(const std::string& k, const Vec& def) { return has(k) ? vec(k) : def; }
    std::vector<std::string> strings(const std::string& k) {
        if (!has(k)) return {};
        const json& v = j_->at(k);
        if (!v.is_array()) throw ConfigError(key(k) + ": expected an array of strings");
        std::vector<std::string> out;
        for (const auto& s : v) {
            if (!s.is_string()) throw ConfigError(key(k) + ": expected an array of strings");
            out.push_back(s.get<std::string>());
        }
        return out;
    }
    ConfigNode child(const std::string& k) { return ConfigNode(need(k), key(k), unknown_); }
    std::vector<ConfigNode> children(const std::string& k) {
        const json& v = need(k);
        if (!v.is_array()) throw ConfigError(key(k) + ": expected an array of objects");
        std::vector<ConfigNode> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.emplace_back(v[i], key(k) + "[" + std::to_string(i) + "]", unknown_);
        return out;
    }

    /// Records the keys of this object that no parser asked for.
    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key())) unknown_->push_back(key(it.key()));
    }
    const std::vector<std::string>& unknown() const { return *unknown_; }
    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const json& need(const std::string& k) {
        if (!has(k)) throw ConfigError(where() + ": missing required key '" + k + "'");
        return j_->at(k);
    }
    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    static double to_num(const json& v, const std::string& at) {
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf") return kInf;
            if (s == "-inf") return -kInf;
        }
        throw ConfigError(at + ": expected a number (or \"inf\")");
    }

    const json* j_;
    std::string path_;
    std::shared_ptr<std::vector<std::string>> unknown_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Recipes

struct SetRecipe {
    std::string kind;  // cantor, reciprocal, singleton, segment, product, embed
    double keep = 0.25;
    int depth = 8;
    double power = 1.0;
    int count = 1000;
    int dim = 2;
    Vec point, a, b;
    std::shared_ptr<SetRecipe> left, right;
};

inline SetRecipe parse_set(ConfigNode c) {
    SetRecipe r;
    r.kind = c.choice("kind", "", {"cantor", "reciprocal", "singleton", "segment", "product", "embed"});
    if (r.kind == "cantor") {
        r.keep = c.num("keep", 0.25);
        r.depth = int(c.integer("depth", 8));
    } else if (r.kind == "reciprocal") {
        r.power = c.num("power", 1.0);
        r.count = int(c.integer("count", 1000));
    } else if (r.kind == "singleton") {
        r.point = c.vec("point");
    } else if (r.kind == "segment") {
        r.a = c.vec("a");
        r.b = c.vec("b");
        r.count = int(c.integer("count", 1000));
    } else if (r.kind == "product") {
        r.left = std::make_shared<SetRecipe>(parse_set(c.child("left")));
        r.right = std::make_shared<SetRecipe>(parse_set(c.child("right")));
    } else {
        r.left = std::make_shared<SetRecipe>(parse_set(c.child("set")));
        r.dim = int(c.integer("dim", 2));
    }
    c.finish();
    return r;
}

inline InitialSet build_set(const SetRecipe& r) {
    if (r.kind == "cantor") return make_cantor(r.keep, r.depth);
    if (r.kind == "reciprocal") return make_reciprocal_powers(r.power, r.count);
    if (r.kind == "singleton") return make_singleton(r.point);
    if (r.kind == "segment") return make_segment(r.a, r.b, r.count);
    if (r.kind == "product") return cartesian_product(build_set(*r.left), build_set(*r.right));
    return embed(build_set(*r.left), r.dim);
}

struct SpaceTimeRecipe {
    std::string kind;  // product, graph, vortex
    bool time_interval = true;
    double t_lo = 0.0, t_hi = 1.0;
    std::shared_ptr<SetRecipe> time_set;
    SetRecipe space;
    std::string bundle = "identity";  // identity, quadratic, holder_drift
    double alpha = 0.5;
    int holder_samples = 20000;
};

inline SpaceTimeRecipe parse_spacetime(ConfigNode c) {
    SpaceTimeRecipe r;
    r.kind = c.choice("kind", "", {"product", "graph", "vortex"});
    if (r.kind == "product") {
        ConfigNode t = c.child("time");
        if (t.has("set")) {
            r.time_interval = false;
            r.time_set = std::make_shared<SetRecipe>(parse_set(t.child("set")));
        } else {
            const auto iv = t.nums("interval");
            if (iv.size() != 2) throw ConfigError(t.where() + ".interval: expected [lo, hi]");
            r.t_lo = iv[0];
            r.t_hi = iv[1];
        }
        t.finish();
        r.space = parse_set(c.child("space"));
    } else if (r.kind == "graph") {
        r.space = parse_set(c.child("initial"));
        ConfigNode b = c.child("bundle");
        r.bundle = b.choice("kind", "identity", {"identity", "quadratic", "holder_drift"});
        if (r.bundle == "holder_drift") r.alpha = b.num("alpha", 0.5);
        b.finish();
        r.holder_samples = int(c.integer("holder_samples", r.holder_samples));
    }
    c.finish();
    return r;
}

struct TrajectoryRecipe {
    std::string kind = "fixed";
    Vec point{0.0, 0.0}, centre{0.0, 0.0}, direction{1.0, 0.0};
    double radius = 0.5, angular_speed = 1.0, phase = 0.0, exponent = 0.5;
    std::vector<double> times;
    std::vector<Vec> points;
};

inline TrajectoryRecipe parse_trajectory(ConfigNode c) {
    TrajectoryRecipe r;
    r.kind = c.choice("kind", "fixed", {"fixed", "circular", "drift", "piecewise_linear"});
    if (r.kind == "fixed") {
        r.point = c.vec("point", r.point);
    } else if (r.kind == "circular") {
        r.centre = c.vec("centre", r.centre);
        r.radius = c.num("radius", r.radius);
        r.angular_speed = c.num("angular_speed", r.angular_speed);
        r.phase = c.num("phase", 0.0);
    } else if (r.kind == "drift") {
        r.point = c.vec("start", r.point);
        r.direction = c.vec("direction", r.direction);
        r.exponent = c.num("exponent", r.exponent);
    } else {
        r.times = c.nums("times");
        for (auto& p : c.children("points")) {
            r.points.push_back(p.vec("at"));
            p.finish();
        }
    }
    c.finish();
    return r;
}

inline Trajectory build_trajectory(const TrajectoryRecipe& r) {
    if (r.kind == "fixed") return fixed_trajectory(r.point);
    if (r.kind == "circular") return circular_trajectory(r.centre, r.radius, r.angular_speed, r.phase);
    if (r.kind == "drift") return drift_trajectory(r.point, r.direction, r.exponent);
    return piecewise_linear_trajectory(r.times, r.points);
}

struct FieldRecipe {
    std::string background = "zero";  // zero, rotation, uniform, linear, radial
    double omega = 1.0, rate = 1.0;
    Vec value{0.0, 0.0};
    int dim = 2;
    struct Vortex {
        TrajectoryRecipe path;
        double circulation = 1.0;
        bool normalized = false;
    };
    std::vector<Vortex> vortices;
};

inline FieldRecipe parse_field(ConfigNode c) {
    FieldRecipe r;
    ConfigNode b = c.child("background");
    r.background = b.choice("kind", "zero", {"zero", "rotation", "uniform", "linear", "radial"});
    if (r.background == "rotation") r.omega = b.num("omega", 1.0);
    if (r.background == "uniform") r.value = b.vec("value");
    if (r.background == "linear") r.rate = b.num("rate", 1.0);
    if (r.background == "zero" || r.background == "linear" || r.background == "radial")
        r.dim = int(b.integer("dim", 2));
    b.finish();
    if (c.has("vortices"))
        for (auto& v : c.children("vortices")) {
            FieldRecipe::Vortex w;
            w.path = parse_trajectory(v.child("path"));
            w.circulation = v.num("circulation", 1.0);
            w.normalized = v.flag("normalized", false);
            v.finish();
            r.vortices.push_back(w);
        }
    c.finish();
    return r;
}

inline FieldSpec build_field(const FieldRecipe& r, double horizon) {
    Background v = r.background == "rotation" ? rotation_background(r.omega)
                   : r.background == "uniform" ? uniform_background(r.value)
                   : r.background == "linear"  ? linear_background(r.rate, r.dim)
                   : r.background == "radial"  ? radial_background(r.dim)
                                               : zero_background(r.dim);
    std::vector<VortexTerm> ws;
    for (const auto& w : r.vortices) ws.push_back(VortexTerm{build_trajectory(w.path), w.circulation, w.normalized});
    return make_field(std::move(v), std::move(ws), horizon);
}

struct LadderRecipe {
    std::string kind = "power";  // power, geometric, list
    double base = 2.0;
    int first = 4, last = 10;
    double hi = 1e-2, lo = 1e-6;
    int count = 9;
    std::vector<double> values;
};

inline LadderRecipe parse_ladder(ConfigNode c) {
    LadderRecipe r;
    r.kind = c.choice("kind", "power", {"power", "geometric", "list"});
    if (r.kind == "power") {
        r.base = c.num("base", 2.0);
        r.first = int(c.integer("first", 4));
        r.last = int(c.integer("last", 10));
    } else if (r.kind == "geometric") {
        r.hi = c.num("hi");
        r.lo = c.num("lo");
        r.count = int(c.integer("count", 9));
    } else {
        r.values = c.nums("values");
    }
    c.finish();
    return r;
}

inline std::vector<double> build_ladder(const LadderRecipe& r) {
    if (r.kind == "power") return power_ladder(r.base, r.first, r.last);
    if (r.kind == "geometric") return geometric_ladder(r.hi, r.lo, r.count);
    return r.values;
}

inline Box parse_box(ConfigNode c) {
    const Vec lo = c.vec("lo"), hi = c.vec("hi");
    c.finish();
    if (lo.dim() != hi.dim()) throw ConfigError(c.where() + ": lo and hi differ in dimension");
    for (int i = 0; i < lo.dim(); ++i)
        if (!(hi[i] > lo[i])) throw ConfigError(c.where() + ": hi must exceed lo");
    return Box(lo, hi);
}

// ---------------------------------------------------------------------------
// Module sections

struct DimensionTarget {
    std::string name;
    SetRecipe set;
    LadderRecipe grid_ladder, minkowski_ladder;
    std::optional<Box> domain;
    std::optional<double> expect;
    double tolerance = 0.05;
};

struct DimensionConfig {
    std::vector<DimensionTarget> sets;
    bool minkowski = true;
    double cross_tolerance = 0.1;
    MeasureOptions measure;
};

struct PrintConfig {
    std::vector<double> alphas, betas;
    LadderRecipe ladder;
    Box domain = Box::cube(1, -0.1, 1.1);
    int time_points = 3;
    double margin = 0.1;
    double eps_floor = 1e-6;
    std::optional<std::pair<double, double>> predicted;  // (dim_t, dim_a)
    struct Expect {
        double alpha, beta;
        std::string verdict;
    };
    std::vector<Expect> expect;
    std::size_t section_bound_samples = 0;
};

struct ConditionsConfig {
    double p = kInf, q = kInf;
    double holder_exponent = 1.0, sup_section_dim = 0.0;
    std::vector<double> t_grid{0.0, 0.5, 1.0};
    std::size_t norm_samples = 20000;
    LadderRecipe print_ladder{.kind = "power", .base = 2.0, .first = 2, .last = 7};
    int print_time_points = 3;
    std::optional<double> expect_q_bar;
    std::map<std::string, std::string> expect;
    bool enforce = true;  // severity: error (true) or warning
    std::size_t normal_samples = 0;
    double normal_min_distance = 0.1;
    double normal_tolerance = 1e-5;
};

struct FlowConfig {
    InitialSample initial;
    FlowOptions options;
    std::size_t csv_trajectories = 200;
    int compressibility_per_axis = 4;
    std::optional<Box> compressibility_domain;
    std::optional<std::pair<double, double>> expect_L;
};

struct AvoidanceConfig {
    double r0 = 0.25;
    LadderRecipe deltas{.kind = "power", .base = 2.0, .first = 4, .last = 10};
    double bound_tolerance = 0.1;
    std::size_t tube_samples = 200000;
    std::optional<double> compressibility;
    bool lyapunov = true;
};

struct Profile {
    std::string kind = "gaussian";  // gaussian, wave, constant
    Vec centre{0.5, 0.0};
    double variance = 0.01, value = 1.0;
};

struct TransportConfig {
    TransportGrid grid;
    Profile initial;
    std::optional<Profile> refine_initial;
    bool singular = false;
    std::optional<double> return_tolerance;
    std::optional<double> gronwall_max_violation;
    std::optional<double> energy_tolerance;
    bool maximum_principle = false;
    std::size_t field_stride = 4;
    bool refine = false;
    TransportGrid coarse;
    int levels = 4;
    std::vector<std::string> betas{"z^2"};
    TestFunction phi;
    double min_order = 0.8;
};

struct VortexWaveConfig {
    VortexWaveOptions options;
    Vec z0{0.0, 0.0};
    std::string particles = "single";  // single, gaussian
    Vec point{1.0, 0.0};
    double omega = 0.5, area = 0.0;
    Box box = Box::cube(2, -1, 1);
    int n = 20;
    Vec centre{0.0, 0.0};
    double variance = 0.05, amplitude = 1.0, cutoff = 3.0;
    std::optional<double> period_tolerance;
    std::optional<double> max_drift;  // in blob radii
    std::optional<double> centroid_drift;
    bool avoidance = false;
    AvoidanceConfig av;
};

struct Scenario {
    json config;
    std::string name;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double horizon = 1.0;
    Box domain = Box::cube(2, -1, 1);
    std::vector<std::string> pipeline;
    std::optional<SpaceTimeRecipe> set;
    std::optional<FieldRecipe> field;
    std::optional<DimensionConfig> dimension;
    std::optional<PrintConfig> print;
    std::optional<ConditionsConfig> conditions;
    std::optional<FlowConfig> flow;
    std::optional<AvoidanceConfig> avoidance;
    std::optional<TransportConfig> transport;
    std::optional<VortexWaveConfig> vortex_wave;
};

inline const std::vector<std::string>& module_names() {
    static const std::vector<std::string> m{"dimension", "print", "conditions", "flow",
                                            "avoidance", "transport", "vortex-wave"};
    return m;
}

namespace detail {

inline DistanceKind parse_kind(ConfigNode& c, const std::string& k) {
    return c.choice(k, "section", {"section", "spacetime"}) == "section" ? DistanceKind::section
                                                                          : DistanceKind::spacetime;
}

inline AvoidanceConfig parse_avoidance(ConfigNode c) {
    AvoidanceConfig a;
    a.r0 = c.num("r0", a.r0);
    if (c.has("deltas")) a.deltas = parse_ladder(c.child("deltas"));
    a.bound_tolerance = c.num("bound_tolerance", a.bound_tolerance);
    a.tube_samples = std::size_t(c.integer("tube_samples", (long long)a.tube_samples));
    if (c.has("compressibility")) a.compressibility = c.num("compressibility");
    a.lyapunov = c.flag("lyapunov", a.lyapunov);
    c.finish();
    return a;
}

inline TransportGrid parse_grid(ConfigNode c, TransportGrid g) {
    if (c.has("domain")) g.domain = parse_box(c.child("domain"));
    const int n = int(c.integer("n", g.nx));
    g.nx = g.ny = n;
    g.steps = int(c.integer("steps", g.steps));
    g.horizon = c.num("horizon", g.horizon);
    g.boundary = c.choice("boundary", "constant_extension", {"constant_extension", "periodic"}) == "periodic"
                     ? Boundary::periodic
                     : Boundary::constant_extension;
    g.interp = c.choice("interpolation", "bilinear", {"bilinear", "cubic_limited"}) == "cubic_limited"
                   ? Interpolation::cubic_limited
                   : Interpolation::bilinear;
    g.cfl_bound = c.num("cfl_bound", g.cfl_bound);
    g.store_every = int(c.integer("store_every", g.store_every));
    g.delta_min = c.num("delta_min", g.delta_min);
    c.finish();
    return g;
}

inline DimensionConfig parse_dimension(ConfigNode c) {
    DimensionConfig d;
    for (auto& s : c.children("sets")) {
        DimensionTarget t;
        t.name = s.str("name");
        t.set = parse_set(s.child("set"));
        t.grid_ladder = parse_ladder(s.child("ladder"));
        t.minkowski_ladder = s.has("minkowski_ladder") ? parse_ladder(s.child("minkowski_ladder")) : t.grid_ladder;
        if (s.has("domain")) t.domain = parse_box(s.child("domain"));
        if (s.has("expect")) t.expect = s.num("expect");
        t.tolerance = s.num("tolerance", t.tolerance);
        s.finish();
        d.sets.push_back(std::move(t));
    }
    d.minkowski = c.flag("minkowski", true);
    d.cross_tolerance = c.num("cross_tolerance", d.cross_tolerance);
    d.measure.min_samples = std::size_t(c.integer("min_samples", (long long)d.measure.min_samples));
    d.measure.max_samples = std::size_t(c.integer("max_samples", (long long)d.measure.max_samples));
    d.measure.target_rel_stderr = c.num("target_rel_stderr", d.measure.target_rel_stderr);
    c.finish();
    return d;
}

inline PrintConfig parse_print(ConfigNode c) {
    PrintConfig p;
    p.alphas = c.nums("alpha");
    p.betas = c.nums("beta");
    p.ladder = parse_ladder(c.child("ladder"));
    if (c.has("domain")) p.domain = parse_box(c.child("domain"));
    p.time_points = int(c.integer("time_points", p.time_points));
    p.margin = c.num("margin", p.margin);
    p.eps_floor = c.num("eps_floor", p.eps_floor);
    if (c.has("predicted")) {
        ConfigNode q = c.child("predicted");
        p.predicted = std::make_pair(q.num("dim_t"), q.num("dim_a"));
        q.finish();
    }
    if (c.has("expect"))
        for (auto& e : c.children("expect")) {
            p.expect.push_back({e.num("alpha"), e.num("beta"), e.choice("verdict", "", {"member", "non_member", "inconclusive", "not_non_member"})});
            e.finish();
        }
    p.section_bound_samples = std::size_t(c.integer("section_bound_samples", 0));
    c.finish();
    return p;
}

inline ConditionsConfig parse_conditions(ConfigNode c) {
    ConditionsConfig k;
    k.p = c.num("p", k.p);
    k.q = c.num("q", k.q);
    k.holder_exponent = c.num("holder_exponent", k.holder_exponent);
    k.sup_section_dim = c.num("sup_section_dim", k.sup_section_dim);
    if (c.has("t_grid")) k.t_grid = c.nums("t_grid");
    k.norm_samples = std::size_t(c.integer("norm_samples", (long long)k.norm_samples));
    if (c.has("print_ladder")) k.print_ladder = parse_ladder(c.child("print_ladder"));
    k.print_time_points = int(c.integer("print_time_points", k.print_time_points));
    if (c.has("expect_q_bar")) k.expect_q_bar = c.num("expect_q_bar");
    if (c.has("expect")) {
        ConfigNode e = c.child("expect");
        for (const char* name : {"local_integrability", "bounded_divergence", "growth", "bv_off_singular_set",
                                 "normal_component_and_print", "trajectory_threshold"})
            if (e.has(name))
                k.expect[name] = e.choice(name, "", {"satisfied", "violated", "unverifiable_numerically"});
        e.finish();
    }
    k.enforce = c.choice("severity", "error", {"error", "warning"}) == "error";
    if (c.has("normal_check")) {
        ConfigNode n = c.child("normal_check");
        k.normal_samples = std::size_t(n.integer("samples", 10000));
        k.normal_min_distance = n.num("min_distance", k.normal_min_distance);
        k.normal_tolerance = n.num("tolerance", k.normal_tolerance);
        n.finish();
    }
    c.finish();
    return k;
}

inline FlowConfig parse_flow(ConfigNode c, const Box& domain) {
    FlowConfig f;
    f.initial.domain = domain;
    if (c.has("initial")) {
        ConfigNode i = c.child("initial");
        if (i.has("domain")) f.initial.domain = parse_box(i.child("domain"));
        f.initial.grid = i.choice("kind", "grid", {"grid", "random"}) == "grid";
        f.initial.per_axis = int(i.integer("per_axis", f.initial.per_axis));
        f.initial.count = std::size_t(i.integer("count", (long long)f.initial.count));
        i.finish();
    }
    f.options.output_steps = int(c.integer("output_steps", f.options.output_steps));
    f.options.tolerance = c.num("tolerance", f.options.tolerance);
    f.options.h_max = c.num("h_max", f.options.h_max);
    f.options.c_step = c.num("c_step", f.options.c_step);
    f.options.delta_min = c.num("delta_min", f.options.delta_min);
    f.options.kind = parse_kind(c, "distance");
    if (c.has("escape")) f.options.escape = parse_box(c.child("escape"));
    f.options.check_residual = c.flag("check_residual", true);
    f.csv_trajectories = std::size_t(c.integer("csv_trajectories", (long long)f.csv_trajectories));
    if (c.has("compressibility")) {
        ConfigNode k = c.child("compressibility");
        f.compressibility_per_axis = int(k.integer("per_axis", f.compressibility_per_axis));
        if (k.has("domain")) f.compressibility_domain = parse_box(k.child("domain"));
        if (k.has("expect")) {
            const auto r = k.nums("expect");
            if (r.size() != 2) throw ConfigError(k.where() + ".expect: expected [lo, hi]");
            f.expect_L = std::make_pair(r[0], r[1]);
        }
        k.finish();
    }
    c.finish();
    return f;
}

inline TestFunction parse_phi(ConfigNode c) {
    TestFunction phi;
    phi.t0 = c.num("t0", phi.t0);
    phi.rt = c.num("rt", phi.rt);
    phi.x0 = c.vec("x0", phi.x0);
    phi.rx = c.num("rx", phi.rx);
    phi.id = c.str("id", phi.id);
    c.finish();
    return phi;
}

inline Profile parse_profile(ConfigNode i) {
    Profile p;
    p.kind = i.choice("kind", "gaussian", {"gaussian", "wave", "constant"});
    if (p.kind == "gaussian") {
        p.centre = i.vec("centre", p.centre);
        p.variance = i.num("variance", p.variance);
    } else if (p.kind == "constant") {
        p.value = i.num("value", p.value);
    }
    i.finish();
    return p;
}

inline TransportConfig parse_transport(ConfigNode c, const Box& domain, double horizon) {
    TransportConfig t;
    t.grid.domain = domain;
    t.grid.horizon = horizon;
    if (c.has("grid")) t.grid = parse_grid(c.child("grid"), t.grid);
    if (c.has("initial")) t.initial = parse_profile(c.child("initial"));
    t.singular = c.flag("singular", false);
    if (c.has("return_tolerance")) t.return_tolerance = c.num("return_tolerance");
    if (c.has("gronwall_max_violation")) t.gronwall_max_violation = c.num("gronwall_max_violation");
    if (c.has("energy_tolerance")) t.energy_tolerance = c.num("energy_tolerance");
    t.maximum_principle = c.flag("maximum_principle", false);
    t.field_stride = std::size_t(c.integer("field_stride", (long long)t.field_stride));
    if (c.has("refinement")) {
        ConfigNode r = c.child("refinement");
        t.refine = true;
        TransportGrid g = t.grid;
        g.nx = g.ny = 32;
        g.steps = 16;
        g.store_every = 1;
        t.coarse = r.has("grid") ? parse_grid(r.child("grid"), g) : g;
        t.levels = int(r.integer("levels", t.levels));
        if (r.has("beta")) t.betas = r.strings("beta");
        for (const auto& b : t.betas)
            if (b != "z" && b != "z^2" && b != "cos(z)")
                throw ConfigError(r.where() + ".beta: '" + b + "' is not one of z, z^2, cos(z)");
        if (r.has("initial")) t.refine_initial = parse_profile(r.child("initial"));
        if (r.has("phi")) t.phi = parse_phi(r.child("phi"));
        t.min_order = r.num("min_order", t.min_order);
        r.finish();
    }
    c.finish();
    return t;
}

inline VortexWaveConfig parse_vortex_wave(ConfigNode c, double horizon) {
    VortexWaveConfig v;
    v.options.horizon = horizon;
    v.options.gamma = c.num("gamma", v.options.gamma);
    v.options.normalized = c.flag("normalized", false);
    v.options.dt = c.num("dt", v.options.dt);
    v.options.snapshots = int(c.integer("snapshots", v.options.snapshots));
    v.options.blob_radius = c.num("blob_radius", v.options.blob_radius);
    v.z0 = c.vec("z0", v.z0);
    ConfigNode p = c.child("particles");
    v.particles = p.choice("kind", "single", {"single", "gaussian"});
    if (v.particles == "single") {
        v.point = p.vec("point", v.point);
        v.omega = p.num("omega", v.omega);
        v.area = p.num("area", 0.0);
    } else {
        if (p.has("box")) v.box = parse_box(p.child("box"));
        v.n = int(p.integer("n", v.n));
        v.centre = p.vec("centre", v.centre);
        v.variance = p.num("variance", v.variance);
        v.amplitude = p.num("amplitude", v.amplitude);
        v.cutoff = p.num("cutoff", v.cutoff);
    }
    p.finish();
    if (c.has("period_tolerance")) v.period_tolerance = c.num("period_tolerance");
    if (c.has("max_drift")) v.max_drift = c.num("max_drift");
    if (c.has("centroid_drift")) v.centroid_drift = c.num("centroid_drift");
    if (c.has("avoidance")) {
        v.avoidance = true;
        v.av = parse_avoidance(c.child("avoidance"));
    }
    c.finish();
    return v;
}

}  // namespace detail

/// Validates the whole config; unknown keys are collected and reported
/// together.
inline Scenario parse_scenario(const json& j) {
    Scenario s;
    s.config = j;
    ConfigNode c(j, "");
    s.name = c.str("name");
    if (!c.has("seed")) throw ConfigError("config: missing required key 'seed'");
    const json& seed = j.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
        throw ConfigError("seed: expected a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
    const long long threads = c.integer("threads", 0);
    if (threads < 0) throw ConfigError("threads: must be >= 0");
    s.threads = unsigned(threads);
    s.horizon = c.num("horizon", 1.0);
    if (!(s.horizon > 0)) throw ConfigError("horizon: must be positive");
    if (c.has("domain")) s.domain = parse_box(c.child("domain"));
    const Box& domain = s.domain;
    for (auto m : c.strings("pipeline")) {
        if (m == "vortex_wave") m = "vortex-wave";
        if (std::find(module_names().begin(), module_names().end(), m) == module_names().end())
            throw ConfigError("pipeline: unknown module '" + m + "'");
        s.pipeline.push_back(m);
    }
    if (c.has("set")) s.set = parse_spacetime(c.child("set"));
    if (c.has("field")) s.field = parse_field(c.child("field"));
    if (c.has("dimension")) s.dimension = detail::parse_dimension(c.child("dimension"));
    if (c.has("print")) s.print = detail::parse_print(c.child("print"));
    if (c.has("conditions")) s.conditions = detail::parse_conditions(c.child("conditions"));
    if (c.has("flow")) s.flow = detail::parse_flow(c.child("flow"), domain);
    if (c.has("avoidance")) s.avoidance = detail::parse_avoidance(c.child("avoidance"));
    if (c.has("transport")) s.transport = detail::parse_transport(c.child("transport"), domain, s.horizon);
    if (c.has("vortex_wave")) s.vortex_wave = detail::parse_vortex_wave(c.child("vortex_wave"), s.horizon);
    c.finish();
    if (!c.unknown().empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : c.unknown()) msg += " " + k;
        throw ConfigError(msg);
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (seed) {
        if (!j.is_object()) throw ConfigError(path.string() + ": expected an object");
        j["seed"] = *seed;
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Running

struct Check {
    std::string module, name;
    bool passed = false;
    std::string detail;
    bool enforced = true;
};

struct RunResult {
    std::vector<Check> checks;
    std::vector<std::string> files;
    double wall_time = 0.0;
    bool passed() const {
        for (const auto& c : checks)
            if (c.enforced && !c.passed) return false;
        return true;
    }
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

class RunContext {
public:
    RunContext(const Scenario& s, std::filesystem::path out) : sc(s), dir(std::move(out)) {}

    const Scenario& sc;
    std::filesystem::path dir;
    RunResult result;
    std::ostringstream summary;
    unsigned threads = 0;

    std::uint64_t seed_for(const char* module) const {
        std::uint64_t k = 0;
        for (const char* p = module; *p; ++p) k = mix_keys(k, std::uint64_t(*p));
        return mix_keys(sc.seed, k);
    }

    template <class F>
    void write(const std::string& name, F&& body) {
        const auto path = dir / name;
        std::ofstream f = open_output(path.string());
        body(f);
        f.flush();
        if (!f) throw Error("write failed: " + path.string());
        result.files.push_back(name);
    }

    /// Whitespace-separated x y columns with a commented header.
    void write_dat(const std::string& name, const std::string& x, const std::string& y,
                   const std::vector<double>& xs, const std::vector<double>& ys) {
        write(name, [&](std::ostream& os) {
            os << "# " << x << " " << y << "\n";
            for (std::size_t i = 0; i < xs.size(); ++i) os << fmt(xs[i]) << " " << fmt(ys[i]) << "\n";
        });
    }

    void check(const std::string& module, const std::string& name, bool passed, const std::string& detail,
               bool enforced = true) {
        result.checks.push_back({module, name, passed, detail, enforced});
    }

    // cached between modules
    std::optional<FieldSpec> field;
    std::optional<DistanceEvaluator> singular;
    std::optional<FlowEnsemble> ensemble;

    const FieldSpec& need_field() {
        if (!field) {
            if (!sc.field) throw ConfigError("this module needs a 'field' section");
            field = build_field(*sc.field, sc.horizon);
        }
        return *field;
    }
    /// The configured set, or the vortex trajectories of the field.
    const DistanceEvaluator& need_set() {
        if (!singular) {
            if (sc.set && sc.set->kind != "vortex") {
                singular.emplace(build_spacetime(*sc.set));
            } else {
                if (!sc.field || sc.field->vortices.empty())
                    throw ConfigError("this module needs a 'set' section or a field with vortices");
                singular.emplace(vortex_set(need_field()));
            }
        }
        return *singular;
    }
    SpaceTimeSet build_spacetime(const SpaceTimeRecipe& r) const {
        if (r.kind == "product") {
            const TimeSet t = r.time_interval ? TimeSet::interval(r.t_lo, r.t_hi) : TimeSet::from_set(build_set(*r.time_set));
            return make_product(t, build_set(r.space), sc.horizon);
        }
        const TrajectoryBundle b = r.bundle == "quadratic"      ? quadratic_contraction_bundle(sc.horizon)
                                   : r.bundle == "holder_drift" ? holder_drift_bundle(r.alpha, sc.horizon)
                                                                : identity_bundle(sc.horizon);
        return make_graph(build_set(r.space), b, GraphOptions{.holder_samples = std::size_t(r.holder_samples), .seed = seed_for("graph")});
    }
};

inline void run_dimension(RunContext& ctx) {
    const DimensionConfig& cfg = *ctx.sc.dimension;
    std::vector<std::pair<std::string, DimensionEstimate>> fits;
    ctx.summary << "dimension\n";
    for (const auto& t : cfg.sets) {
        const InitialSet s = build_set(t.set);
        const auto g = estimate_box_dimension(s, build_ladder(t.grid_ladder));
        fits.emplace_back(t.name, g);
        ctx.write("dimension_" + t.name + "_counts.csv", [&](std::ostream& os) { write_box_counts_csv(os, g); });
        std::vector<double> lx, ly;
        for (std::size_t k = 0; k < g.eps.size(); ++k) {
            lx.push_back(std::log(1.0 / g.eps[k]));
            ly.push_back(std::log(g.values[k]));
        }
        ctx.write_dat("dimension_" + t.name + "_grid.dat", "log(1/eps)", "log(N)", lx, ly);
        ctx.summary << "  " << t.name << " grid_count " << fmt(g.fitted_dim) << " (r^2 " << fmt(g.r_squared) << ")\n";
        if (t.expect)
            ctx.check("dimension", t.name + " grid_count", std::abs(g.fitted_dim - *t.expect) <= t.tolerance,
                      fmt(g.fitted_dim) + " vs " + fmt(*t.expect) + " +- " + fmt(t.tolerance));
        if (!cfg.minkowski) continue;
        Box dom;
        if (t.domain) {
            dom = *t.domain;
        } else {
            const Box bb = bounding_box(s.points);
            double w = 0.0;
            for (int i = 0; i < bb.dim(); ++i) w = std::max(w, bb.width(i));
            dom = bb.expanded(0.1 * std::max(w, 1e-3));
        }
        MeasureOptions mo = cfg.measure;
        mo.seed = ctx.seed_for(("dimension/" + t.name).c_str());
        const auto m = estimate_minkowski_dimension(s.points, build_ladder(t.minkowski_ladder), dom, mo);
        fits.emplace_back(t.name, m);
        ctx.write("dimension_" + t.name + "_measures.csv", [&](std::ostream& os) { write_measures_csv(os, m); });
        std::vector<double> mx, my;
        for (std::size_t k = 0; k < m.eps.size(); ++k)
            if (m.values[k] > 0) {
                mx.push_back(std::log(m.eps[k]));
                my.push_back(std::log(m.values[k]));
            }
        ctx.write_dat("dimension_" + t.name + "_minkowski.dat", "log(eps)", "log(mu)", mx, my);
        ctx.summary << "  " << t.name << " minkowski " << fmt(m.fitted_dim) << " (r^2 " << fmt(m.r_squared) << ")\n";
        if (t.expect)
            ctx.check("dimension", t.name + " minkowski", std::abs(m.fitted_dim - *t.expect) <= t.tolerance,
                      fmt(m.fitted_dim) + " vs " + fmt(*t.expect) + " +- " + fmt(t.tolerance));
        ctx.check("dimension", t.name + " methods agree", std::abs(m.fitted_dim - g.fitted_dim) <= cfg.cross_tolerance,
                  "|" + fmt(g.fitted_dim) + " - " + fmt(m.fitted_dim) + "| <= " + fmt(cfg.cross_tolerance));
    }
    ctx.write("dimension_fit.csv", [&](std::ostream& os) { write_fit_csv(os, fits); });
}

/// Width of the band around the predicted boundary in which the empirical
/// verdict may be inconclusive or disagree: the score margin widened by the
/// time term.
inline bool in_print_band(double dim_t, double dim_a, int n, double alpha, double beta, double margin) {
    const double ct = 1.0 - dim_t, ca = double(n) - dim_a;
    const double ratio = std::isinf(beta) ? 0.0 : alpha / beta;
    const double score = alpha * ct * (std::isinf(beta) ? 0.0 : 1.0 / beta) + ca - alpha;
    return std::abs(score) <= margin * (1.0 + ratio);
}

inline void run_print(RunContext& ctx) {
    const PrintConfig& cfg = *ctx.sc.print;
    const DistanceEvaluator& e = ctx.need_set();
    PrintOptions o;
    o.ladder = build_ladder(cfg.ladder);
    o.time_points = cfg.time_points;
    o.margin = cfg.margin;
    o.eps_floor = cfg.eps_floor;
    o.measure.seed = ctx.seed_for("print");
    const int n = e.ambient_dim();
    ctx.summary << "print\n";
    std::size_t contradictions = 0, compared = 0;
    std::vector<PrintVerdict> verdicts;
    ctx.write("print_verdicts.csv", [&](std::ostream& os) {
        CsvWriter csv(os, {"alpha", "beta", "margin", "eps_floor", "gamma_min", "gamma_max", "kappa",
                           "holder_exponent", "verdict", "predicted"});
        for (double a : cfg.alphas)
            for (double b : cfg.betas) {
                const PrintVerdict v = print_membership(e, a, b, cfg.domain, o);
                std::string pred = "";
                if (cfg.predicted) {
                    const Region r = predicted_print_region(cfg.predicted->first, cfg.predicted->second, n, a, b);
                    pred = to_string(r);
                    if (!in_print_band(cfg.predicted->first, cfg.predicted->second, n, a, b, cfg.margin)) {
                        ++compared;
                        if ((r == Region::member && v.verdict == Verdict::non_member) ||
                            (r == Region::nonmember && v.verdict == Verdict::member))
                            ++contradictions;
                    }
                }
                csv.row({a, b, cfg.margin, cfg.eps_floor, v.gamma_min, v.gamma_max, v.kappa, v.holder_exponent,
                         std::string(to_string(v.verdict)), pred});
                ctx.summary << "  alpha=" << fmt(a) << " beta=" << fmt(b) << " " << to_string(v.verdict);
                if (!pred.empty()) ctx.summary << " (predicted " << pred << ")";
                ctx.summary << "\n";
                verdicts.push_back(v);
            }
    });
    if (!verdicts.empty()) {
        ctx.write("print_scan.csv", [&](std::ostream& os) { write_scan_csv(os, verdicts.front()); });
        std::vector<double> ts, gs;
        for (const auto& s : verdicts.front().scan) {
            ts.push_back(s.t);
            gs.push_back(s.gamma);
        }
        ctx.write_dat("print_scan.dat", "t", "gamma", ts, gs);
    }
    if (cfg.predicted)
        ctx.check("print", "no contradiction outside the margin band", contradictions == 0,
                  std::to_string(contradictions) + " of " + std::to_string(compared) + " pairs outside the band");
    for (const auto& x : cfg.expect) {
        const PrintVerdict v = print_membership(e, x.alpha, x.beta, cfg.domain, o);
        const bool ok = x.verdict == "not_non_member" ? v.verdict != Verdict::non_member
                                                      : x.verdict == to_string(v.verdict);
        ctx.check("print", "alpha=" + fmt(x.alpha) + " beta=" + fmt(x.beta) + " " + x.verdict, ok,
                  std::string("verdict ") + to_string(v.verdict) + ", gamma_min " + fmt(v.gamma_min));
    }
    if (cfg.section_bound_samples > 0) {
        const auto r = check_section_bound(e, cfg.section_bound_samples, ctx.seed_for("section_bound"));
        ctx.write("print_section_bound.csv", [&](std::ostream& os) {
            CsvWriter csv(os, {"samples", "upper_violations", "lower_violations", "lipschitz_violations",
                               "worst_ratio", "evaluator_error"});
            csv.row({(long long)r.samples, (long long)r.upper_violations, (long long)r.lower_violations,
                     (long long)r.lipschitz_violations, r.worst_ratio, r.evaluator_error});
        });
        ctx.summary << "  section bound: " << r.samples << " samples, " << r.violations() << " violations, worst ratio "
                    << fmt(r.worst_ratio) << "\n";
        ctx.check("print", "section bound", r.violations() == 0,
                  std::to_string(r.violations()) + " violations in " + std::to_string(r.samples) + " samples");
    }
}

inline void run_conditions(RunContext& ctx) {
    const ConditionsConfig& cfg = *ctx.sc.conditions;
    const FieldSpec& b = ctx.need_field();
    const DistanceEvaluator& e = ctx.need_set();
    WellposednessOptions o;
    o.domain = ctx.sc.domain;
    o.t_grid = cfg.t_grid;
    o.norm.samples = cfg.norm_samples;
    o.norm.seed = ctx.seed_for("conditions");
    o.print.ladder = build_ladder(cfg.print_ladder);
    o.print.time_points = cfg.print_time_points;
    o.print.measure.seed = ctx.seed_for("conditions/print");
    const ConditionReport r = wellposedness_check(b, e, cfg.p, cfg.q, {cfg.holder_exponent, cfg.sup_section_dim}, o);
    ctx.write("conditions_report.csv", [&](std::ostream& os) { write_report_csv(os, r); });
    ctx.summary << "conditions (p=" << fmt(cfg.p) << ", q=" << fmt(cfg.q) << ")\n";
    std::ostringstream text;
    write_report_text(text, r);
    std::istringstream lines(text.str());
    for (std::string line; std::getline(lines, line);) ctx.summary << "  " << line << "\n";
    if (cfg.expect_q_bar)
        ctx.check("conditions", "q_bar", r.threshold.q_bar == *cfg.expect_q_bar,
                  "q_bar " + fmt(r.threshold.q_bar) + " vs " + fmt(*cfg.expect_q_bar), cfg.enforce);
    for (const auto& [name, status] : cfg.expect)
        ctx.check("conditions", name + " " + status, to_string(r.at(name).status) == status,
                  std::string("status ") + to_string(r.at(name).status), cfg.enforce);
    if (cfg.expect.empty() && !cfg.expect_q_bar)
        ctx.check("conditions", "all conditions hold", r.all_hold(), "", cfg.enforce);

    if (cfg.normal_samples > 0) {
        const std::uint64_t seed = ctx.seed_for("conditions/normal");
        std::vector<double> ts(cfg.normal_samples), ds(cfg.normal_samples), vs(cfg.normal_samples);
        parallel_for(cfg.normal_samples, [&](std::size_t i) {
            for (std::uint64_t attempt = 0;; ++attempt) {
                CounterRng rng(seed, attempt, i);
                const double t = rng.uniform(0.0, ctx.sc.horizon);
                const Vec x = rng.uniform_in(o.domain);
                const double d = e.distance(DistanceKind::section, t, x);
                if (d < cfg.normal_min_distance) continue;
                ts[i] = t;
                ds[i] = d;
                vs[i] = normal_component(b, e, t, x).value;
                return;
            }
        });
        double worst = 0.0;
        for (double v : vs) worst = std::max(worst, std::abs(v));
        ctx.write("conditions_normal.csv", [&](std::ostream& os) {
            CsvWriter csv(os, {"t", "d_S", "normal"});
            for (std::size_t i = 0; i < vs.size(); ++i) csv.row({ts[i], ds[i], vs[i]});
        });
        ctx.write_dat("conditions_normal.dat", "d_S", "abs_normal", ds, [&] {
            std::vector<double> a;
            for (double v : vs) a.push_back(std::abs(v));
            return a;
        }());
        ctx.summary << "  normal component: max |b.grad d| = " << fmt(worst) << " over " << vs.size()
                    << " points with d >= " << fmt(cfg.normal_min_distance) << "\n";
        ctx.check("conditions", "normal component cancels", worst < cfg.normal_tolerance,
                  "max " + fmt(worst) + " < " + fmt(cfg.normal_tolerance), cfg.enforce);
    }
}

inline const FlowEnsemble& need_ensemble(RunContext& ctx) {
    if (!ctx.ensemble) {
        if (!ctx.sc.flow) throw ConfigError("this module needs a 'flow' section");
        InitialSample init = ctx.sc.flow->initial;
        init.seed = ctx.seed_for("flow");
        FlowOptions o = ctx.sc.flow->options;
        o.horizon = ctx.sc.horizon;
        ctx.ensemble = integrate_flow(ctx.need_field(), ctx.need_set(), init, o);
    }
    return *ctx.ensemble;
}

inline void run_flow(RunContext& ctx) {
    const FlowConfig& cfg = *ctx.sc.flow;
    const FlowEnsemble& f = need_ensemble(ctx);
    std::size_t alive = 0, absorbed = 0, escaped = 0, flagged = 0;
    double residual = 0.0;
    for (const auto& r : f.records) {
        alive += r.status == TrajectoryStatus::alive;
        absorbed += r.status == TrajectoryStatus::absorbed;
        escaped += r.status == TrajectoryStatus::escaped;
        flagged += r.flagged;
        residual = std::max(residual, r.residual);
    }
    ctx.write("flow_trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, f, cfg.csv_trajectories); });
    const Box dom = cfg.compressibility_domain ? *cfg.compressibility_domain : default_test_box_domain(f);
    const auto L = compressibility_estimate(f, box_grid(dom, cfg.compressibility_per_axis), f.times);
    ctx.write("flow_compressibility.csv", [&](std::ostream& os) {
        CsvWriter csv(os, {"L", "stderr", "min_count", "low_count", "boxes"});
        csv.row({L.L, L.standard_error, (long long)L.min_count, (long long)L.low_count,
                 (long long)std::pow(cfg.compressibility_per_axis, dom.dim())});
    });
    // ensemble-averaged distance to S over time
    std::vector<double> mean(f.times.size(), 0.0);
    for (std::size_t j = 0; j < f.size(); ++j)
        for (std::size_t k = 0; k < f.times.size(); ++k) mean[k] += f.distances[j][k] / double(f.size());
    ctx.write_dat("flow_mean_distance.dat", "t", "mean_d_S", f.times, mean);
    ctx.summary << "flow\n  " << f.size() << " trajectories: " << alive << " alive, " << absorbed << " absorbed, "
                << escaped << " escaped, " << flagged << " flagged\n  max residual " << fmt(residual) << "\n  L = "
                << fmt(L.L) << " +- " << fmt(L.standard_error) << "\n";
    for (const auto& n : L.notes) ctx.summary << "  note: " << n << "\n";
    if (cfg.expect_L)
        ctx.check("flow", "compressibility", L.L >= cfg.expect_L->first && L.L <= cfg.expect_L->second,
                  "L " + fmt(L.L) + " in [" + fmt(cfg.expect_L->first) + ", " + fmt(cfg.expect_L->second) + "]");
}

inline AvoidanceOptions avoidance_options(const AvoidanceConfig& cfg, std::uint64_t seed, double horizon) {
    AvoidanceOptions a;
    a.r0 = cfg.r0;
    a.deltas = build_ladder(cfg.deltas);
    a.bound_tolerance = cfg.bound_tolerance;
    a.tube.samples = cfg.tube_samples;
    a.tube.seed = seed;
    a.tube.t_end = horizon;
    a.compressibility = cfg.compressibility;
    return a;
}

inline void write_avoidance(RunContext& ctx, const std::string& prefix, const std::string& module,
                            const AvoidanceReport& rep) {
    ctx.write(prefix + ".csv", [&](std::ostream& os) { write_avoidance_csv(os, rep); });
    std::vector<double> ds, mus, ps;
    for (const auto& r : rep.rows) {
        ds.push_back(r.delta);
        mus.push_back(r.mu);
        ps.push_back(r.product);
    }
    ctx.write_dat(prefix + "_mu.dat", "delta", "mu_F", ds, mus);
    ctx.write_dat(prefix + "_product.dat", "delta", "mu_F_log_r0_over_delta", ds, ps);
    ctx.summary << "  L = " << fmt(rep.L) << ", tube integral " << fmt(rep.tube_integral) << " +- "
                << fmt(rep.tube_stderr) << ", bound B = " << fmt(rep.bound) << "\n";
    for (const auto& r : rep.rows)
        ctx.summary << "  delta " << fmt(r.delta) << ": mu " << fmt(r.mu) << ", product " << fmt(r.product) << "\n";
    ctx.check(module, "F(delta) nested", rep.nested, "");
    ctx.check(module, "mu(F(delta)) nondecreasing in delta", rep.monotone, "");
    double worst = 0.0;
    for (const auto& r : rep.rows) worst = std::max(worst, r.product);
    ctx.check(module, "mu log(r0/delta) <= B (1 + tol)", rep.bound_holds,
              "max product " + fmt(worst) + ", B " + fmt(rep.bound));
}

inline void run_avoidance(RunContext& ctx) {
    const AvoidanceConfig cfg = ctx.sc.avoidance ? *ctx.sc.avoidance : AvoidanceConfig{};
    const FlowEnsemble& f = need_ensemble(ctx);
    const FieldSpec& b = ctx.need_field();
    const DistanceEvaluator& e = ctx.need_set();
    const auto rep = avoidance_statistics(f, b, e, avoidance_options(cfg, ctx.seed_for("avoidance"), ctx.sc.horizon));
    ctx.summary << "avoidance (" << f.size() << " trajectories, " << rep.flagged << " flagged)\n";
    write_avoidance(ctx, "avoidance", "avoidance", rep);
    if (cfg.lyapunov && f.size() > 0) {
        std::size_t closest = 0;
        for (std::size_t j = 1; j < f.size(); ++j)
            if (f.records[j].min_distance < f.records[closest].min_distance) closest = j;
        const auto tr = lyapunov_trace(f, e, b, closest, cfg.r0);
        ctx.write("avoidance_lyapunov.csv", [&](std::ostream& os) { write_lyapunov_csv(os, tr); });
        std::vector<double> ts, gs;
        for (const auto& r : tr.rows) {
            ts.push_back(r.t);
            gs.push_back(r.g);
        }
        ctx.write_dat("avoidance_lyapunov.dat", "t", "g", ts, gs);
        ctx.summary << "  lyapunov trace of trajectory " << closest << ": " << tr.rows.size() << " steps, "
                    << tr.failures << " failures (" << tr.flagged_failures << " flagged)\n";
    }
}

inline std::function<double(const Vec&)> transport_initial(const Profile& cfg) {
    if (cfg.kind == "wave")
        return [](const Vec& x) {
            return std::sin(2 * std::numbers::pi * x[0]) * std::cos(2 * std::numbers::pi * x[1]) + 0.5;
        };
    if (cfg.kind == "constant") return [v = cfg.value](const Vec&) { return v; };
    return [c = cfg.centre, var = cfg.variance](const Vec& x) { return std::exp(-(x - c).norm2() / (2 * var)); };
}

inline Renormalizer renormalizer(const std::string& name) {
    if (name == "z") return beta_identity();
    if (name == "cos(z)") return beta_cos();
    return beta_square();
}

inline void run_transport(RunContext& ctx) {
    const TransportConfig& cfg = *ctx.sc.transport;
    const FieldSpec& b = ctx.need_field();
    const DistanceEvaluator* singular = cfg.singular ? &ctx.need_set() : nullptr;
    const auto u0 = transport_initial(cfg.initial);
    const ScalarField u = solve_transport(b, u0, cfg.grid, singular);
    const GronwallReport g = gronwall_check(u, b);
    ctx.write("transport_field.csv", [&](std::ostream& os) { write_field_csv(os, u, cfg.field_stride); });
    ctx.write("transport_gronwall.csv", [&](std::ostream& os) { write_gronwall_csv(os, g); });
    std::vector<double> ts, es;
    for (const auto& r : g.rows) {
        ts.push_back(r.t);
        es.push_back(r.energy);
    }
    ctx.write_dat("transport_energy.dat", "t", "integral_u2", ts, es);
    const double e0 = g.rows.front().energy, e1 = g.rows.back().energy;
    ctx.summary << "transport (" << u.nx << "x" << u.ny << " nodes, " << cfg.grid.steps << " steps, "
                << u.contaminated_count() << " contaminated)\n  energy " << fmt(e0) << " -> " << fmt(e1)
                << ", gronwall violation " << fmt(g.max_violation) << "\n";
    if (cfg.gronwall_max_violation)
        ctx.check("transport", "gronwall", g.max_violation <= *cfg.gronwall_max_violation,
                  "violation " + fmt(g.max_violation) + " <= " + fmt(*cfg.gronwall_max_violation));
    if (cfg.energy_tolerance) {
        double worst = 0.0;
        for (const auto& r : g.rows) worst = std::max(worst, std::abs(r.energy / e0 - 1.0));
        ctx.check("transport", "integral of u^2 conserved", worst <= *cfg.energy_tolerance,
                  "max relative change " + fmt(worst) + " <= " + fmt(*cfg.energy_tolerance));
    }
    if (cfg.return_tolerance) {
        const double err = relative_l2_error(u, u.times.size() - 1, u0);
        ctx.summary << "  relative L2 distance to u0 at T: " << fmt(err) << "\n";
        ctx.check("transport", "returns to u0", err <= *cfg.return_tolerance,
                  "error " + fmt(err) + " <= " + fmt(*cfg.return_tolerance));
    }
    if (cfg.maximum_principle) {
        double lo = kInf, hi = -kInf;
        for (double v : u.values[0]) lo = std::min(lo, v), hi = std::max(hi, v);
        bool ok = true;
        for (const auto& level : u.values)
            for (double v : level) ok = ok && v >= lo && v <= hi;
        ctx.check("transport", "maximum principle", ok, "[" + fmt(lo) + ", " + fmt(hi) + "]");
    }
    if (cfg.refine) {
        std::vector<RefinementRow> rows;
        for (const auto& name : cfg.betas) {
            const auto st = refinement_study(b, cfg.refine_initial ? transport_initial(*cfg.refine_initial) : u0, cfg.coarse, cfg.levels, renormalizer(name), cfg.phi, singular);
            rows.insert(rows.end(), st.rows.begin(), st.rows.end());
            std::vector<double> hs, rs;
            for (const auto& r : st.rows) {
                hs.push_back(r.h);
                rs.push_back(r.residual);
            }
            std::string tag = name == "z^2" ? "z2" : name == "cos(z)" ? "cos" : "z";
            ctx.write_dat("transport_residual_" + tag + ".dat", "h", "residual", hs, rs);
            ctx.summary << "  renormalization beta=" << name << ": order " << fmt(st.order) << ", worst step "
                        << fmt(st.worst_order) << (st.decreasing ? ", decreasing" : ", not decreasing") << "\n";
            ctx.check("transport", "residual decreases beta=" + name, st.decreasing, "");
            ctx.check("transport", "order beta=" + name, st.order >= cfg.min_order,
                      "order " + fmt(st.order) + " >= " + fmt(cfg.min_order));
        }
        ctx.write("transport_residuals.csv", [&](std::ostream& os) { write_residual_csv(os, rows); });
    }
}

inline void run_vortex_wave(RunContext& ctx) {
    const VortexWaveConfig& cfg = *ctx.sc.vortex_wave;
    ParticleSet init;
    if (cfg.particles == "single") {
        init.p = {cfg.point};
        init.omega = {cfg.omega};
        init.area = {cfg.area};
    } else {
        init = particles_from_grid(cfg.box, cfg.n, [&](const Vec& x) {
            const double r2 = (x - cfg.centre).norm2();
            return r2 < cfg.cutoff * cfg.cutoff * cfg.variance ? cfg.amplitude * std::exp(-r2 / (2 * cfg.variance))
                                                                : 0.0;
        });
    }
    const VortexWaveResult r = simulate_vortex_wave(init, cfg.z0, cfg.options);
    ctx.write("vortex_snapshots.csv", [&](std::ostream& os) { write_snapshots_csv(os, r); });
    ctx.write("vortex_path.csv", [&](std::ostream& os) { write_vortex_path_csv(os, r); });
    std::vector<double> z1, z2;
    for (const auto& z : r.z_path) {
        z1.push_back(z[0]);
        z2.push_back(z[1]);
    }
    ctx.write_dat("vortex_path.dat", "z1", "z2", z1, z2);
    const double w0 = total_vorticity(r.snapshots.front()), w1 = total_vorticity(r.snapshots.back());
    ctx.summary << "vortex-wave (" << init.p.size() << " particles, blob radius " << fmt(r.blob_radius) << ", "
                << r.steps << " steps, " << r.core_warnings << " core warnings)\n  total vorticity " << fmt(w0)
                << " -> " << fmt(w1) << "\n";
    ctx.check("vortex-wave", "total vorticity exact", w0 == w1, fmt(w0) + " -> " + fmt(w1));
    ctx.check("vortex-wave", "no step underflow", !r.underflow, "");
    if (cfg.period_tolerance) {
        if (init.p.size() != 1) throw ConfigError("vortex_wave.period_tolerance needs a single particle");
        const double d = distance(cfg.point, cfg.z0);
        const double expect = two_vortex_period(d, cfg.options.gamma, cfg.omega, cfg.options.normalized);
        const double got = relative_rotation_period(r, 0);
        ctx.summary << "  period " << fmt(got) << " vs closed form " << fmt(expect) << "\n";
        ctx.check("vortex-wave", "two-vortex period", std::abs(got / expect - 1.0) <= *cfg.period_tolerance,
                  fmt(got) + " vs " + fmt(expect));
    }
    if (cfg.max_drift) {
        double worst = 0.0;
        for (const auto& z : r.z_path) worst = std::max(worst, distance(z, cfg.z0));
        ctx.summary << "  vortex drift " << fmt(worst) << "\n";
        ctx.check("vortex-wave", "vortex drift", worst < *cfg.max_drift * r.blob_radius,
                  fmt(worst) + " < " + fmt(*cfg.max_drift) + " blob radii");
    }
    if (cfg.centroid_drift) {
        const Vec c0 = vorticity_centroid(r.snapshots.front(), cfg.options.gamma);
        double worst = 0.0;
        for (const auto& s : r.snapshots) worst = std::max(worst, distance(vorticity_centroid(s, cfg.options.gamma), c0));
        ctx.check("vortex-wave", "centroid drift", worst <= *cfg.centroid_drift, fmt(worst) + " <= " + fmt(*cfg.centroid_drift));
    }
    if (cfg.avoidance) {
        const auto a = vortex_avoidance_report(r, avoidance_options(cfg.av, ctx.seed_for("vortex-wave/avoidance"), cfg.options.horizon));
        ctx.summary << "  avoidance (vortex path Lipschitz " << fmt(a.lipschitz) << ")\n";
        write_avoidance(ctx, "vortex_avoidance", "vortex-wave", a.report);
    }
}

inline void write_manifest(RunContext& ctx, const std::vector<std::string>& modules) {
    json m;
    m["name"] = ctx.sc.name;
    m["seed"] = ctx.sc.seed;
    m["threads"] = ctx.threads;
    m["modules"] = modules;
    m["versions"] = {{"sfl", kVersion},
                     {"compiler", __VERSION__},
                     {"cplusplus", __cplusplus},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    m["config"] = ctx.sc.config;
    json checks = json::array();
    for (const auto& c : ctx.result.checks)
        checks.push_back({{"module", c.module}, {"check", c.name}, {"passed", c.passed}, {"enforced", c.enforced},
                          {"detail", c.detail}});
    m["checks"] = checks;
    m["files"] = ctx.result.files;
    m["status"] = ctx.result.passed() ? "pass" : "fail";
    m["wall_time_s"] = ctx.result.wall_time;
    const auto path = ctx.dir / "manifest.json";
    std::ofstream f = open_output(path.string());
    f << m.dump(2) << "\n";
    if (!f) throw Error("write failed: " + path.string());
}

}  // namespace detail

/// Runs the given modules in order and writes every artifact under `out`.
/// The manifest is written last, also when a module fails with an error.
inline RunResult run_scenario(const Scenario& sc, const std::filesystem::path& out,
                              const std::vector<std::string>& modules, std::optional<unsigned> threads = std::nullopt) {
    for (const auto& m : modules) {
        const std::string key = m == "vortex-wave" ? "vortex_wave" : m;
        if (std::find(module_names().begin(), module_names().end(), m) == module_names().end())
            throw ConfigError("unknown module '" + m + "'");
        // avoidance runs with defaults when only a flow section is given
        if (m != "avoidance" && !sc.config.contains(key)) throw ConfigError("config has no '" + key + "' section");
    }
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw Error("cannot create output directory " + out.string() + ": " + ec.message());

    const unsigned saved = detail::thread_setting();
    set_thread_count(threads ? *threads : sc.threads);
    detail::RunContext ctx(sc, out);
    ctx.threads = threads ? *threads : sc.threads;
    const auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
        for (const auto& m : modules) {
            if (m == "dimension") detail::run_dimension(ctx);
            if (m == "print") detail::run_print(ctx);
            if (m == "conditions") detail::run_conditions(ctx);
            if (m == "flow") detail::run_flow(ctx);
            if (m == "avoidance") detail::run_avoidance(ctx);
            if (m == "transport") detail::run_transport(ctx);
            if (m == "vortex-wave") detail::run_vortex_wave(ctx);
        }
    } catch (const ConfigError&) {
        set_thread_count(saved);
        throw;
    } catch (const std::exception& e) {
        failure = e.what();
        ctx.check("run", "completed", false, failure);
    }
    set_thread_count(saved);
    ctx.result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream head;
    head << "scenario " << sc.name << " (seed " << sc.seed << ")\n";
    ctx.summary << "checks\n";
    for (const auto& c : ctx.result.checks) {
        ctx.summary << "  " << (c.passed ? "PASS" : c.enforced ? "FAIL" : "WARN") << " " << c.module << ": " << c.name;
        if (!c.detail.empty()) ctx.summary << " (" << c.detail << ")";
        ctx.summary << "\n";
    }
    ctx.summary << (ctx.result.passed() ? "status: pass\n" : "status: fail\n");
    if (!modules.empty())
        ctx.write("summary.txt", [&](std::ostream& os) { os << head.str() << ctx.summary.str(); });
    detail::write_manifest(ctx, modules);
    ctx.result.files.push_back("manifest.json");
    return ctx.result;
}

/// Summary text of a finished run, as written to summary.txt.
inline std::string read_summary(const std::filesystem::path& out) {
    std::ifstream in(out / "summary.txt");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace sfl
