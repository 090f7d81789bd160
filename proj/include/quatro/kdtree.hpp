// Exact k-d tree over fixed-dimension points.
//
// Nearest-neighbour ties resolve to the smallest point index, which keeps
// every query reproducible regardless of tree layout.

#ifndef QUATRO_KDTREE_HPP
#define QUATRO_KDTREE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace quatro {

template <int Dim, typename Scalar = double>
class KdTree {
public:
    using Vector = Eigen::Matrix<Scalar, Dim, 1>;

    struct Neighbor {
        std::size_t index;
        Scalar sq_dist;
    };

    KdTree() = default;

    explicit KdTree(std::vector<Vector> points, std::size_t leaf_size = 12)
        : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!points_.empty()) {
            nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
            build(0, points_.size());
        }
    }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Vector &point(std::size_t i) const { return points_[i]; }

    /// Nearest point; ties go to the smaller index. Returns false on an empty tree.
    bool nearest(const Vector &q, Neighbor &out) const {
        if (points_.empty()) return false;
        out = {std::numeric_limits<std::size_t>::max(), std::numeric_limits<Scalar>::infinity()};
        nearest_rec(0, q, out);
        return true;
    }

    /// Nearest point, or nothing when no point lies within max_sq_dist.
    bool nearest_within(const Vector &q, Scalar max_sq_dist, Neighbor &out) const {
        if (points_.empty()) return false;
        out = {std::numeric_limits<std::size_t>::max(), max_sq_dist};
        nearest_rec(0, q, out);
        return out.index != std::numeric_limits<std::size_t>::max();
    }

    /// All points with squared distance <= radius^2, sorted by index.
    void radius_search(const Vector &q, Scalar radius, std::vector<Neighbor> &out) const {
        out.clear();
        if (points_.empty()) return;
        radius_rec(0, q, radius * radius, out);
        std::sort(out.begin(), out.end(), [](const Neighbor &a, const Neighbor &b) { return a.index < b.index; });
    }

    std::vector<Neighbor> radius_search(const Vector &q, Scalar radius) const {
        std::vector<Neighbor> out;
        radius_search(q, radius, out);
        return out;
    }

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range in order_
        int axis = -1;               // -1 for leaves
        Scalar split = 0;
        std::uint32_t left = 0, right = 0;
        Vector lo, hi;               // bounding box
    };

    std::uint32_t build(std::size_t begin, std::size_t end) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        Vector lo = points_[order_[begin]], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = lo;
        node.hi = hi;
        nodes_.push_back(node);
        if (end - begin <= leaf_size_) return id;

        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        if (hi[axis] == lo[axis]) return id;  // all coincident
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                         order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        const Scalar split = points_[order_[mid]][axis];
        const std::uint32_t l = build(begin, mid);
        const std::uint32_t r = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    static Scalar box_sq_dist(const Node &n, const Vector &q) {
        const Vector d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(Scalar(0));
        return d.squaredNorm();
    }

    void nearest_rec(std::uint32_t id, const Vector &q, Neighbor &best) const {
        const Node &n = nodes_[id];
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const std::size_t idx = order_[i];
                const Scalar d = (points_[idx] - q).squaredNorm();
                if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) best = {idx, d};
            }
            return;
        }
        const bool go_left = q[n.axis] < n.split;
        const std::uint32_t first = go_left ? n.left : n.right;
        const std::uint32_t second = go_left ? n.right : n.left;
        if (box_sq_dist(nodes_[first], q) <= best.sq_dist) nearest_rec(first, q, best);
        if (box_sq_dist(nodes_[second], q) <= best.sq_dist) nearest_rec(second, q, best);
    }

    void radius_rec(std::uint32_t id, const Vector &q, Scalar r2, std::vector<Neighbor> &out) const {
        const Node &n = nodes_[id];
        if (box_sq_dist(n, q) > r2) return;
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const std::size_t idx = order_[i];
                const Scalar d = (points_[idx] - q).squaredNorm();
                if (d <= r2) out.push_back({idx, d});
            }
            return;
        }
        radius_rec(n.left, q, r2, out);
        radius_rec(n.right, q, r2, out);
    }

    std::vector<Vector> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 12;
};

using KdTree3d = KdTree<3, double>;

}  // namespace quatro

#endif  // QUATRO_KDTREE_HPP
