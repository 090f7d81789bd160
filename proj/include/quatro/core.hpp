// Domain types and geometry primitives shared by every registration stage.

#ifndef QUATRO_CORE_HPP
#define QUATRO_CORE_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace quatro {

using Point3 = Eigen::Vector3d;
using Rotation = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Thrown when a value violates a documented domain invariant.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ordered point collection. Intensity is either empty or has one entry per point.
struct PointCloud {
    std::vector<Point3> points;
    std::vector<float> intensity;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_intensity() const { return !intensity.empty() && intensity.size() == points.size(); }

    const Point3 &operator[](std::size_t i) const { return points[i]; }
    Point3 &operator[](std::size_t i) { return points[i]; }

    void push_back(const Point3 &p) { points.push_back(p); }
    void push_back(const Point3 &p, float i) {
        points.push_back(p);
        intensity.push_back(i);
    }

    /// Sub-cloud keeping the given indices in order.
    PointCloud select(const std::vector<std::size_t> &indices) const {
        PointCloud out;
        out.points.reserve(indices.size());
        const bool with_i = has_intensity();
        for (std::size_t idx : indices) {
            out.points.push_back(points.at(idx));
            if (with_i) out.intensity.push_back(intensity[idx]);
        }
        return out;
    }
};

inline bool is_finite(const Point3 &p) { return p.allFinite(); }

inline Rotation rot_x(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
inline Rotation rot_y(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitY()).toRotationMatrix(); }

/// Yaw rotation built from cos/sin directly so the third row and column are exact.
inline Rotation rot_z(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Rotation r;
    r << c, -s, 0.0,
         s, c, 0.0,
         0.0, 0.0, 1.0;
    return r;
}

inline double orthonormality_residual(const Rotation &r) {
    return (r.transpose() * r - Rotation::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest orthogonal matrix with det = +1 (polar decomposition via SVD).
inline Rotation project_to_rotation(const Eigen::Matrix3d &m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Rigid motion x -> R x + t. The rotation is validated on construction.
class RigidMotion {
public:
    static constexpr double kOrthoTolerance = 1e-6;

    RigidMotion() : rotation_(Rotation::Identity()), translation_(Point3::Zero()) {}

    RigidMotion(const Rotation &rotation, const Point3 &translation)
        : rotation_(rotation), translation_(translation) {
        if (!rotation_.allFinite() || !translation_.allFinite())
            throw InvalidArgument("RigidMotion: non-finite entries");
        if (orthonormality_residual(rotation_) > kOrthoTolerance)
            throw InvalidArgument("RigidMotion: rotation is not orthonormal");
        if (std::abs(rotation_.determinant() - 1.0) > kOrthoTolerance)
            throw InvalidArgument("RigidMotion: rotation has det != +1");
    }

    static RigidMotion identity() { return {}; }

    static RigidMotion from_matrix(const Eigen::Matrix4d &m) {
        return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
    }

    /// Rotation R_z(yaw) R_y(pitch) R_x(roll), angles in degrees.
    static RigidMotion from_ypr_deg(double yaw, double pitch, double roll, const Point3 &t = Point3::Zero()) {
        return {rot_z(deg2rad(yaw)) * rot_y(deg2rad(pitch)) * rot_x(deg2rad(roll)), t};
    }

    static RigidMotion from_quaternion(const Eigen::Quaterniond &q, const Point3 &t) {
        return {q.normalized().toRotationMatrix(), t};
    }

    const Rotation &rotation() const { return rotation_; }
    const Point3 &translation() const { return translation_; }

    Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_); }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rotation_;
        m.topRightCorner<3, 1>() = translation_;
        return m;
    }

    Point3 apply(const Point3 &p) const { return rotation_ * p + translation_; }
    Point3 operator*(const Point3 &p) const { return apply(p); }

    RigidMotion inverse() const {
        const Rotation rt = rotation_.transpose();
        return {rt, -(rt * translation_)};
    }

private:
    Rotation rotation_;
    Point3 translation_;
};

/// Applies b first, then a: (R_a R_b, R_a t_b + t_a).
inline RigidMotion compose(const RigidMotion &a, const RigidMotion &b) {
    return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidMotion operator*(const RigidMotion &a, const RigidMotion &b) { return compose(a, b); }

/// Rotation angle in degrees, acos((tr(R) - 1) / 2) with the argument clamped to [-1, 1].
inline double geodesic_angle(const Rotation &r) {
    const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    return rad2deg(std::acos(c));
}

/// Angle between two rotations in degrees.
inline double rotation_error_deg(const Rotation &estimate, const Rotation &truth) {
    return geodesic_angle(estimate.transpose() * truth);
}

inline PointCloud transform_cloud(const PointCloud &cloud, const RigidMotion &m) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto &p : cloud.points) out.points.push_back(m.apply(p));
    out.intensity = cloud.intensity;
    return out;
}

struct Correspondence {
    std::size_t src_idx = 0;
    std::size_t tgt_idx = 0;

    friend bool operator==(const Correspondence &, const Correspondence &) = default;
    friend auto operator<=>(const Correspondence &, const Correspondence &) = default;
};

/// Sorted (by src, then tgt), duplicate-free list of correspondences.
class CorrespondenceSet {
public:
    CorrespondenceSet() = default;

    explicit CorrespondenceSet(std::vector<Correspondence> pairs) : pairs_(std::move(pairs)) {
        std::sort(pairs_.begin(), pairs_.end());
        pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
    }

    /// Throws unless every index is inside the respective cloud.
    void check_bounds(std::size_t src_size, std::size_t tgt_size) const {
        for (const auto &c : pairs_)
            if (c.src_idx >= src_size || c.tgt_idx >= tgt_size)
                throw InvalidArgument("CorrespondenceSet: index out of range");
    }

    const std::vector<Correspondence> &pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    const Correspondence &operator[](std::size_t i) const { return pairs_[i]; }
    auto begin() const { return pairs_.begin(); }
    auto end() const { return pairs_.end(); }

    friend bool operator==(const CorrespondenceSet &, const CorrespondenceSet &) = default;

private:
    std::vector<Correspondence> pairs_;
};

struct RegistrationReport {
    RigidMotion motion;
    std::size_t num_raw_pairs = 0;
    std::size_t num_pruned_pairs = 0;
    std::size_t num_final_inliers = 0;
    bool converged = false;
    bool degenerate = false;
    std::map<std::string, double> stage_timings;
    std::optional<double> mse_fitness;
};

}  // namespace quatro

#endif  // QUATRO_CORE_HPP
