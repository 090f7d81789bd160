// Point-to-point ICP fine alignment and nearest-neighbour fitness score.

#ifndef QUATRO_ICP_HPP
#define QUATRO_ICP_HPP

#include "quatro/core.hpp"
#include "quatro/kdtree.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <vector>

namespace quatro {

struct IcpResult {
    RigidMotion motion;
    double mse = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Mean squared distance from transformed source points to their nearest
/// target point, over pairs closer than max_corr_dist. +inf when none are.
inline double fitness_score(const PointCloud &src, const KdTree3d &tgt_tree, const RigidMotion &m,
                            double max_corr_dist) {
    double sum = 0.0;
    std::size_t n = 0;
    KdTree3d::Neighbor nb{};
    const double max_sq = max_corr_dist * max_corr_dist;
    for (const auto &p : src.points) {
        if (tgt_tree.nearest_within(m.apply(p), max_sq, nb)) {
            sum += nb.sq_dist;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(n);
}

inline double fitness_score(const PointCloud &src, const PointCloud &tgt, const RigidMotion &m, double max_corr_dist) {
    const KdTree3d tree(tgt.points);
    return fitness_score(src, tree, m, max_corr_dist);
}

/// Classic ICP: nearest-neighbour pairs within max_corr_dist, then a
/// closed-form rigid fit, until the incremental motion is below `epsilon`
/// (translation in m, rotation in rad).
inline IcpResult icp_point_to_point(const PointCloud &src, const KdTree3d &tgt_tree, const RigidMotion &init,
                                    int max_iters, double max_corr_dist, double epsilon = 1e-6) {
    IcpResult res;
    res.motion = init;
    const double max_sq = max_corr_dist * max_corr_dist;
    Eigen::Matrix3Xd a(3, src.size()), b(3, src.size());
    KdTree3d::Neighbor nb{};
    for (int it = 0; it < max_iters; ++it) {
        Eigen::Index n = 0;
        for (const auto &p : src.points) {
            const Point3 moved = res.motion.apply(p);
            if (tgt_tree.nearest_within(moved, max_sq, nb)) {
                a.col(n) = moved;
                b.col(n) = tgt_tree.point(nb.index);
                ++n;
            }
        }
        if (n < 3) {
            if (it == 0) return {init, std::numeric_limits<double>::infinity(), 0, false};
            break;
        }
        const Eigen::Matrix4d t = Eigen::umeyama(a.leftCols(n), b.leftCols(n), false);
        const RigidMotion step(project_to_rotation(t.topLeftCorner<3, 3>()), t.topRightCorner<3, 1>());
        res.motion = compose(step, res.motion);
        res.iterations = it + 1;
        if (step.translation().norm() < epsilon && deg2rad(geodesic_angle(step.rotation())) < epsilon) {
            res.converged = true;
            break;
        }
    }
    res.mse = fitness_score(src, tgt_tree, res.motion, max_corr_dist);
    return res;
}

inline IcpResult icp_point_to_point(const PointCloud &src, const PointCloud &tgt, const RigidMotion &init,
                                    int max_iters, double max_corr_dist, double epsilon = 1e-6) {
    const KdTree3d tree(tgt.points);
    return icp_point_to_point(src, tree, init, max_iters, max_corr_dist, epsilon);
}

}  // namespace quatro

#endif  // QUATRO_ICP_HPP
