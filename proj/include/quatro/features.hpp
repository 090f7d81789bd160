// Putative correspondence front-end: voxel grid, normals, FPFH, mutual NN matching.

#ifndef QUATRO_FEATURES_HPP
#define QUATRO_FEATURES_HPP

#include "quatro/core.hpp"
#include "quatro/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace quatro {

inline constexpr int kFpfhBins = 11;
inline constexpr int kFpfhDim = 3 * kFpfhBins;

using FpfhDescriptor = Eigen::Matrix<double, kFpfhDim, 1>;

struct NormalCloud {
    std::vector<Eigen::Vector3d> normals;
    std::vector<bool> valid;  // false when fewer than 3 neighbours were found

    std::size_t size() const { return normals.size(); }
};

/// One centroid per occupied voxel (key = floor(coord / voxel)), ordered by key.
inline PointCloud voxel_downsample(const PointCloud &cloud, double voxel) {
    if (!(voxel > 0.0)) throw InvalidArgument("voxel_downsample: voxel size must be > 0");
    struct Acc {
        Point3 sum = Point3::Zero();
        double intensity = 0.0;
        std::size_t n = 0;
    };
    std::map<std::array<std::int64_t, 3>, Acc> grid;
    const bool with_i = cloud.has_intensity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &p = cloud[i];
        const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                              static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                              static_cast<std::int64_t>(std::floor(p.z() / voxel))};
        auto &acc = grid[key];
        acc.sum += p;
        if (with_i) acc.intensity += cloud.intensity[i];
        ++acc.n;
    }
    PointCloud out;
    out.points.reserve(grid.size());
    for (const auto &[key, acc] : grid) {
        const double n = static_cast<double>(acc.n);
        if (with_i) out.push_back(acc.sum / n, static_cast<float>(acc.intensity / n));
        else out.push_back(acc.sum / n);
    }
    return out;
}

/// PCA normals over radius neighbourhoods, flipped to face `viewpoint`.
/// When the viewpoint lies in the tangent plane the normal is oriented to +z
/// (then +y, then +x) so the result does not depend on the eigen solver's sign.
inline NormalCloud estimate_normals(const PointCloud &cloud, double radius, const KdTree3d &tree,
                                    const Point3 &viewpoint = Point3::Zero()) {
    if (!(radius > 0.0)) throw InvalidArgument("estimate_normals: radius must be > 0");
    NormalCloud out;
    out.normals.assign(cloud.size(), Eigen::Vector3d::Zero());
    out.valid.assign(cloud.size(), false);
    std::vector<KdTree3d::Neighbor> nn;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        tree.radius_search(cloud[i], radius, nn);
        if (nn.size() < 3) continue;
        Point3 c = Point3::Zero();
        for (const auto &n : nn) c += tree.point(n.index);
        c /= static_cast<double>(nn.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto &n : nn) {
            const Point3 d = tree.point(n.index) - c;
            cov.noalias() += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        if (es.eigenvalues()(1) <= 0.0) continue;  // collinear or coincident neighbourhood
        Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
        const double facing = n.dot(viewpoint - cloud[i]);
        const double scale = (viewpoint - cloud[i]).norm();
        if (std::abs(facing) <= 1e-9 * std::max(scale, 1.0)) {
            const int axis = std::abs(n.z()) > 1e-12 ? 2 : (std::abs(n.y()) > 1e-12 ? 1 : 0);
            if (n[axis] < 0.0) n = -n;
        } else if (facing < 0.0) {
            n = -n;
        }
        out.normals[i] = n;
        out.valid[i] = true;
    }
    return out;
}

inline NormalCloud estimate_normals(const PointCloud &cloud, double radius, const Point3 &viewpoint = Point3::Zero()) {
    const KdTree3d tree(cloud.points);
    return estimate_normals(cloud, radius, tree, viewpoint);
}

namespace detail {

/// Darboux-frame pair features (f1 angle in [-pi, pi], f2, f3 in [-1, 1]).
/// Returns false when the frame is undefined.
inline bool pair_features(const Point3 &p1, const Eigen::Vector3d &n1, const Point3 &p2, const Eigen::Vector3d &n2,
                          double &f1, double &f2, double &f3) {
    Eigen::Vector3d dp = p2 - p1;
    const double dist = dp.norm();
    if (dist == 0.0) return false;

    Eigen::Vector3d u = n1, n2c = n2;
    const double a1 = n1.dot(dp) / dist;
    const double a2 = n2.dot(dp) / dist;
    if (std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) > std::acos(std::clamp(std::abs(a2), 0.0, 1.0))) {
        u = n2;
        n2c = n1;
        dp = -dp;
        f3 = -a2;
    } else {
        f3 = a1;
    }
    Eigen::Vector3d v = dp.cross(u);
    const double vn = v.norm();
    if (vn == 0.0) return false;
    v /= vn;
    const Eigen::Vector3d w = u.cross(v);
    f2 = v.dot(n2c);
    f1 = std::atan2(w.dot(n2c), u.dot(n2c));
    return true;
}

inline int feature_bin(double unit_value) {
    return std::clamp(static_cast<int>(std::floor(kFpfhBins * unit_value)), 0, kFpfhBins - 1);
}

}  // namespace detail

/// Two-pass FPFH. Each 11-bin block of a non-zero descriptor sums to 100.
inline std::vector<FpfhDescriptor> compute_fpfh(const PointCloud &cloud, const NormalCloud &normals, double radius,
                                                const KdTree3d &tree) {
    const std::size_t n = cloud.size();
    std::vector<FpfhDescriptor> spfh(n, FpfhDescriptor::Zero());
    std::vector<std::vector<KdTree3d::Neighbor>> neighbors(n);

    for (std::size_t i = 0; i < n; ++i) {
        if (!normals.valid[i]) continue;
        tree.radius_search(cloud[i], radius, neighbors[i]);
        auto &h = spfh[i];
        int count = 0;
        for (const auto &nb : neighbors[i]) {
            if (nb.index == i || !normals.valid[nb.index]) continue;
            double f1, f2, f3;
            if (!detail::pair_features(cloud[i], normals.normals[i], cloud[nb.index], normals.normals[nb.index], f1,
                                       f2, f3))
                continue;
            h[detail::feature_bin((f1 + kPi) / (2.0 * kPi))] += 1.0;
            h[kFpfhBins + detail::feature_bin((f2 + 1.0) * 0.5)] += 1.0;
            h[2 * kFpfhBins + detail::feature_bin((f3 + 1.0) * 0.5)] += 1.0;
            ++count;
        }
        if (count > 0) h *= 100.0 / count;
    }

    std::vector<FpfhDescriptor> out(n, FpfhDescriptor::Zero());
    for (std::size_t i = 0; i < n; ++i) {
        if (!normals.valid[i]) continue;
        FpfhDescriptor acc = FpfhDescriptor::Zero();
        int k = 0;
        for (const auto &nb : neighbors[i]) {
            if (nb.index == i || nb.sq_dist == 0.0) continue;
            if (spfh[nb.index].isZero(0.0)) continue;
            acc += spfh[nb.index] / std::sqrt(nb.sq_dist);
            ++k;
        }
        FpfhDescriptor f = spfh[i];
        if (k > 0) f += acc / k;
        for (int b = 0; b < 3; ++b) {
            auto block = f.segment<kFpfhBins>(b * kFpfhBins);
            const double s = block.sum();
            if (s > 0.0) block *= 100.0 / s;
        }
        out[i] = f;
    }
    return out;
}

inline std::vector<FpfhDescriptor> compute_fpfh(const PointCloud &cloud, const NormalCloud &normals, double radius) {
    const KdTree3d tree(cloud.points);
    return compute_fpfh(cloud, normals, radius, tree);
}

/// Mutual nearest neighbours under L2 descriptor distance. All-zero
/// descriptors take no part; NN ties go to the smaller index.
inline CorrespondenceSet match_reciprocal(const std::vector<FpfhDescriptor> &desc_src,
                                          const std::vector<FpfhDescriptor> &desc_tgt) {
    if (desc_src.empty() || desc_tgt.empty()) return {};
    using Tree = KdTree<kFpfhDim, double>;

    auto nonzero = [](const std::vector<FpfhDescriptor> &d) {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (!d[i].isZero(0.0)) ids.push_back(i);
        return ids;
    };
    const auto src_ids = nonzero(desc_src);
    const auto tgt_ids = nonzero(desc_tgt);
    if (src_ids.empty() || tgt_ids.empty()) return {};

    auto gather = [](const std::vector<FpfhDescriptor> &d, const std::vector<std::size_t> &ids) {
        std::vector<FpfhDescriptor> out;
        out.reserve(ids.size());
        for (std::size_t i : ids) out.push_back(d[i]);
        return out;
    };
    // Compacted indices preserve the original order, so "smallest compact
    // index" equals "smallest original index" for tie-breaking.
    const Tree src_tree(gather(desc_src, src_ids));
    const Tree tgt_tree(gather(desc_tgt, tgt_ids));

    std::vector<std::size_t> src_to_tgt(src_ids.size());
    Tree::Neighbor nb{};
    for (std::size_t a = 0; a < src_ids.size(); ++a) {
        tgt_tree.nearest(desc_src[src_ids[a]], nb);
        src_to_tgt[a] = nb.index;
    }
    std::vector<Correspondence> pairs;
    std::vector<long long> tgt_back(tgt_ids.size(), -1);
    for (std::size_t a = 0; a < src_ids.size(); ++a) {
        const std::size_t b = src_to_tgt[a];
        if (tgt_back[b] < 0) {
            src_tree.nearest(desc_tgt[tgt_ids[b]], nb);
            tgt_back[b] = static_cast<long long>(nb.index);
        }
        if (static_cast<std::size_t>(tgt_back[b]) == a) pairs.push_back({src_ids[a], tgt_ids[b]});
    }
    return CorrespondenceSet(std::move(pairs));
}

}  // namespace quatro

#endif  // QUATRO_FEATURES_HPP
