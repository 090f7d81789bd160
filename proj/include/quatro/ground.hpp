// Region-wise ground segmentation.
//
// The cloud is split into polar bins by a concentric zone model, a plane is
// fitted per bin from its lowest points, and each plane is accepted as ground
// only if it is upright, low enough for its zone, and flat.

#ifndef QUATRO_GROUND_HPP
#define QUATRO_GROUND_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace quatro {

struct CzmBin {
    int zone = -1;
    int ring = -1;
    int sector = -1;

    bool valid() const { return zone >= 0; }
    friend bool operator==(const CzmBin &, const CzmBin &) = default;
};

struct PlanePatch {
    Point3 centroid = Point3::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // unit, normal.z >= 0
    double flatness = 0.0;                              // smallest covariance eigenvalue, m^2
    std::size_t num_points = 0;
};

using GroundLabels = std::vector<bool>;

/// Bin of a single point. Range is the horizontal distance; intervals are [low, high).
inline CzmBin czm_bin_of(const Point3 &p, const CzmLayout &layout) {
    const double range = std::hypot(p.x(), p.y());
    if (!(range >= layout.min_range) || !(range < layout.max_range)) return {};
    double az = std::atan2(p.y(), p.x());
    if (az < 0.0) az += 2.0 * kPi;
    if (az >= 2.0 * kPi) az = 0.0;

    std::size_t zone = 0;
    while (zone + 1 < layout.num_zones() && range >= layout.zone_min_ranges[zone + 1]) ++zone;
    const double lo = layout.zone_min_ranges[zone];
    const double hi = layout.zone_max_range(zone);
    const int rings = layout.num_rings[zone];
    const int sectors = layout.num_sectors[zone];
    const int ring = std::min(rings - 1, static_cast<int>((range - lo) / ((hi - lo) / rings)));
    const int sector = std::min(sectors - 1, static_cast<int>(az / (2.0 * kPi / sectors)));
    return {static_cast<int>(zone), ring, sector};
}

/// Per-point bin assignment; out-of-range points get an invalid bin.
inline std::vector<CzmBin> partition_czm(const PointCloud &cloud, const CzmLayout &layout) {
    layout.validate();
    std::vector<CzmBin> bins;
    bins.reserve(cloud.size());
    for (const auto &p : cloud.points) bins.push_back(czm_bin_of(p, layout));
    return bins;
}

namespace detail {

inline PlanePatch pca_plane(const std::vector<Point3> &pts) {
    PlanePatch patch;
    patch.num_points = pts.size();
    Point3 c = Point3::Zero();
    for (const auto &p : pts) c += p;
    c /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto &p : pts) {
        const Point3 d = p - c;
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(pts.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
    if (n.z() < 0.0) n = -n;
    patch.centroid = c;
    patch.normal = n;
    patch.flatness = std::max(0.0, es.eigenvalues()(0));
    return patch;
}

inline double plane_distance(const PlanePatch &patch, const Point3 &p) {
    return std::abs(patch.normal.dot(p - patch.centroid));
}

}  // namespace detail

/// Iterative plane fit seeded from the lowest points of a bin.
/// Returns nothing for bins with fewer than three points.
inline std::optional<PlanePatch> fit_plane_rgpf(const std::vector<Point3> &bin_points, const GroundParams &params = {}) {
    if (bin_points.size() < 3) return std::nullopt;

    std::vector<Point3> sorted = bin_points;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Point3 &a, const Point3 &b) { return a.z() < b.z(); });
    const auto num_seeds = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::ceil(params.seed_ratio * static_cast<double>(sorted.size()))));
    std::vector<Point3> current(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(std::min(num_seeds, sorted.size())));

    PlanePatch patch = detail::pca_plane(current);
    for (int it = 0; it < params.num_iters; ++it) {
        std::vector<Point3> inliers;
        for (const auto &p : bin_points)
            if (detail::plane_distance(patch, p) <= params.dist_threshold) inliers.push_back(p);
        if (inliers.size() < 3) break;
        current = std::move(inliers);
        patch = detail::pca_plane(current);
    }
    return patch;
}

/// Uprightness, elevation and flatness tests on a fitted patch.
inline bool ground_likelihood(const PlanePatch &patch, std::size_t zone_idx, const GroundParams &params = {}) {
    const bool upright = patch.normal.z() >= std::cos(deg2rad(params.uprightness_deg));
    const bool low = patch.centroid.z() <= params.elevation_threshold(zone_idx);
    const bool flat = patch.flatness <= params.flatness_threshold;
    return upright && low && flat;
}

/// Labels each point as ground (true) or not. Unbinned points are non-ground.
inline GroundLabels segment_ground(const PointCloud &cloud, const CzmLayout &layout, const GroundParams &params = {}) {
    GroundLabels labels(cloud.size(), false);
    if (cloud.empty()) return labels;
    const auto bins = partition_czm(cloud, layout);

    std::vector<std::size_t> offsets(layout.num_zones() + 1, 0);
    for (std::size_t z = 0; z < layout.num_zones(); ++z)
        offsets[z + 1] = offsets[z] + static_cast<std::size_t>(layout.num_rings[z] * layout.num_sectors[z]);
    auto flat_index = [&](const CzmBin &b) {
        return offsets[b.zone] + static_cast<std::size_t>(b.ring * layout.num_sectors[b.zone] + b.sector);
    };

    std::vector<std::vector<std::size_t>> members(offsets.back());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (bins[i].valid()) members[flat_index(bins[i])].push_back(i);

    std::vector<Point3> pts;
    for (std::size_t z = 0; z < layout.num_zones(); ++z) {
        for (std::size_t b = offsets[z]; b < offsets[z + 1]; ++b) {
            const auto &idx = members[b];
            if (idx.size() < 3) continue;
            pts.clear();
            for (std::size_t i : idx) pts.push_back(cloud[i]);
            const auto patch = fit_plane_rgpf(pts, params);
            if (!patch || !ground_likelihood(*patch, z, params)) continue;
            for (std::size_t i : idx)
                if (detail::plane_distance(*patch, cloud[i]) <= params.dist_threshold) labels[i] = true;
        }
    }
    return labels;
}

inline GroundLabels segment_ground(const PointCloud &cloud, const QuatroConfig &config) {
    return segment_ground(cloud, config.czm, config.ground);
}

/// Points whose label is false.
inline PointCloud non_ground(const PointCloud &cloud, const GroundLabels &labels) {
    std::vector<std::size_t> keep;
    keep.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!labels[i]) keep.push_back(i);
    return cloud.select(keep);
}

}  // namespace quatro

#endif  // QUATRO_GROUND_HPP
