#pragma once

// Static kd-tree for exact nearest-neighbour queries on point sets that are
// built once and queried many times (set sections, sampled graphs, clouds).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "sfl/core.hpp"

namespace sfl {

class KdTree {
public:
    struct Hit {
        double distance = kInf;
        std::size_t index = 0;
    };

    KdTree() = default;
    explicit KdTree(std::vector<Vec> points, std::vector<double> radii = {})
        : points_(std::move(points)), radii_(std::move(radii)) {
        if (!radii_.empty() && radii_.size() != points_.size()) throw Error("kd-tree radii size mismatch");
        if (points_.empty()) return;
        dim_ = points_.front().dim();
        for (const auto& p : points_)
            if (p.dim() != dim_) throw Error("kd-tree points differ in dimension");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, points_.size());
    }

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }
    int dim() const { return dim_; }
    const std::vector<Vec>& points() const { return points_; }

    Hit nearest(const Vec& q) const {
        Hit best;
        if (points_.empty()) return best;
        double best2 = kInf;
        std::size_t stack[128];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            if (box_distance2(node, q) >= best2) continue;
            if (node.left == kNone) {
                for (std::size_t k = node.begin; k < node.end; ++k) {
                    const double d2 = (points_[order_[k]] - q).norm2();
                    if (d2 < best2) {
                        best2 = d2;
                        best.index = order_[k];
                    }
                }
                continue;
            }
            // Visit the nearer child first (pushed last).
            const double diff = q[node.axis] - node.split;
            const std::size_t near = diff < 0 ? node.left : node.right;
            const std::size_t far = diff < 0 ? node.right : node.left;
            stack[top++] = far;
            stack[top++] = near;
        }
        best.distance = std::sqrt(best2);
        return best;
    }

    /// Branch and bound over items that are balls (point, radius): calls
    /// visit(index, best) for every item whose ball may come closer to q than
    /// `best`, nearer nodes first. visit may lower `best`.
    template <class Visit>
    void search(const Vec& q, double& best, Visit&& visit) const {
        if (points_.empty()) return;
        std::size_t stack[128];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            if (std::sqrt(box_distance2(node, q)) - node.max_radius >= best) continue;
            if (node.left == kNone) {
                for (std::size_t k = node.begin; k < node.end; ++k) {
                    const std::size_t i = order_[k];
                    const double r = radii_.empty() ? 0.0 : radii_[i];
                    if (distance(points_[i], q) - r < best) visit(i, best);
                }
                continue;
            }
            const double diff = q[node.axis] - node.split;
            const std::size_t near = diff < 0 ? node.left : node.right;
            const std::size_t far = diff < 0 ? node.right : node.left;
            stack[top++] = far;
            stack[top++] = near;
        }
    }

private:
    static constexpr std::size_t kLeafSize = 8;
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    struct Node {
        std::size_t begin = 0, end = 0;
        std::size_t left = kNone, right = kNone;
        int axis = 0;
        double split = 0.0;
        double max_radius = 0.0;
        Vec lo, hi;
    };

    double box_distance2(const Node& n, const Vec& q) const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) {
            const double d = q[i] < n.lo[i] ? n.lo[i] - q[i] : (q[i] > n.hi[i] ? q[i] - n.hi[i] : 0.0);
            s += d * d;
        }
        return s;
    }

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        Vec lo = points_[order_[begin]], hi = lo;
        for (std::size_t k = begin; k < end; ++k)
            for (int i = 0; i < dim_; ++i) {
                lo[i] = std::min(lo[i], points_[order_[k]][i]);
                hi[i] = std::max(hi[i], points_[order_[k]][i]);
            }
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;
        if (!radii_.empty())
            for (std::size_t k = begin; k < end; ++k)
                nodes_[id].max_radius = std::max(nodes_[id].max_radius, radii_[order_[k]]);
        if (end - begin <= kLeafSize) return id;

        int axis = 0;
        for (int i = 1; i < dim_; ++i)
            if (hi[i] - lo[i] > hi[axis] - lo[axis]) axis = i;
        if (hi[axis] == lo[axis]) return id;  // all points coincide
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + std::ptrdiff_t(begin), order_.begin() + std::ptrdiff_t(mid),
                         order_.begin() + std::ptrdiff_t(end),
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        const double split = points_[order_[mid]][axis];
        const std::size_t l = build(begin, mid);
        const std::size_t r = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::vector<Vec> points_;
    std::vector<double> radii_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int dim_ = 0;
};

}  // namespace sfl
