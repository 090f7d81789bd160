// Synthetic urban scenes and a ray-cast spinning-LiDAR model.
//
// A grid of city blocks is populated with buildings, poles, trees and parked
// cars. Scans are produced by casting beams from a sensor pose, so the
// density falls off with range, near objects occlude far ones, and ground
// returns form sensor-centred rings just as on a real vehicle.

#ifndef QUATRO_SYNTH_HPP
#define QUATRO_SYNTH_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"
#include "quatro/io.hpp"
#include "quatro/random.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace quatro::synth {

struct SceneSpec {
    std::uint64_t seed = 1;

    int blocks_x = 3;
    int blocks_y = 3;
    double block_size = 46.0;       // m
    double street_width = 14.0;     // m
    int buildings_per_side = 3;
    double building_min_height = 4.0;
    double building_max_height = 18.0;
    int poles_per_side = 6;
    int trees_per_side = 4;
    int cars_per_side = 4;

    int beams = 32;
    double beam_min_deg = -16.0;
    double beam_max_deg = 6.0;
    int azimuth_steps = 1024;
    double min_range = 1.5;
    double max_range = 80.0;
    double range_noise = 0.01;      // m, 1 sigma along the ray
    double far_dropout = 0.3;       // drop probability at max_range, quadratic in range
    double sensor_height = 1.73;

    double frame_spacing = 1.0;     // m between trajectory frames
    int laps = 2;
    double lane_offset = 3.5;       // m, lateral shift of every other lap

    double pitch(int street) const { return street * (block_size + street_width); }
};

struct Box {
    Point3 center;
    Eigen::Vector3d half;
    double yaw = 0.0;
};

struct Cylinder {
    Eigen::Vector2d center;
    double radius = 0.2;
    double z0 = 0.0, z1 = 5.0;
};

struct Sphere {
    Point3 center;
    double radius = 1.0;
};

struct Scene {
    SceneSpec spec;
    std::vector<Box> boxes;
    std::vector<Cylinder> cylinders;
    std::vector<Sphere> spheres;
};

struct Scan {
    PointCloud cloud;            // sensor frame
    std::vector<bool> ground;    // exact per-point labels
};

inline void parse_scene_spec_line(SceneSpec &s, const std::string &key, const std::string &value) {
    auto d = [&](double &f) { f = detail::parse_double(value, key); };
    auto i = [&](int &f) { f = static_cast<int>(detail::parse_int(value, key)); };
    if (key == "seed") s.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
    else if (key == "blocks_x") i(s.blocks_x);
    else if (key == "blocks_y") i(s.blocks_y);
    else if (key == "block_size") d(s.block_size);
    else if (key == "street_width") d(s.street_width);
    else if (key == "buildings_per_side") i(s.buildings_per_side);
    else if (key == "building_min_height") d(s.building_min_height);
    else if (key == "building_max_height") d(s.building_max_height);
    else if (key == "poles_per_side") i(s.poles_per_side);
    else if (key == "trees_per_side") i(s.trees_per_side);
    else if (key == "cars_per_side") i(s.cars_per_side);
    else if (key == "beams") i(s.beams);
    else if (key == "beam_min_deg") d(s.beam_min_deg);
    else if (key == "beam_max_deg") d(s.beam_max_deg);
    else if (key == "azimuth_steps") i(s.azimuth_steps);
    else if (key == "min_range") d(s.min_range);
    else if (key == "max_range") d(s.max_range);
    else if (key == "range_noise") d(s.range_noise);
    else if (key == "far_dropout") d(s.far_dropout);
    else if (key == "sensor_height") d(s.sensor_height);
    else if (key == "frame_spacing") d(s.frame_spacing);
    else if (key == "laps") i(s.laps);
    else if (key == "lane_offset") d(s.lane_offset);
    else throw InvalidArgument("scene spec: unknown key '" + key + "'");
}

inline void validate(const SceneSpec &s) {
    if (s.blocks_x < 1 || s.blocks_y < 1) throw InvalidArgument("scene spec: need at least one block per axis");
    if (!(s.block_size > 0.0) || !(s.street_width > 0.0)) throw InvalidArgument("scene spec: sizes must be > 0");
    if (s.buildings_per_side < 0 || s.poles_per_side < 0 || s.trees_per_side < 0 || s.cars_per_side < 0)
        throw InvalidArgument("scene spec: object counts must be >= 0");
    if (!(s.building_min_height > 0.0 && s.building_min_height <= s.building_max_height))
        throw InvalidArgument("scene spec: invalid building heights");
    if (s.beams < 1 || s.azimuth_steps < 1 || !(s.beam_min_deg < s.beam_max_deg) || s.beam_min_deg <= -90.0 ||
        s.beam_max_deg >= 90.0)
        throw InvalidArgument("scene spec: invalid beam layout");
    if (!(s.min_range >= 0.0 && s.min_range < s.max_range)) throw InvalidArgument("scene spec: invalid ranges");
    if (s.range_noise < 0.0 || s.far_dropout < 0.0 || s.far_dropout > 1.0)
        throw InvalidArgument("scene spec: invalid noise or dropout");
    if (!(s.sensor_height > 0.0)) throw InvalidArgument("scene spec: sensor_height must be > 0");
    if (!(s.frame_spacing > 0.0) || s.laps < 1) throw InvalidArgument("scene spec: invalid trajectory parameters");
}

inline SceneSpec parse_scene_spec(std::istream &in, SceneSpec base = {}) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("scene spec line " + std::to_string(line_no) + ": expected 'key = value'");
        parse_scene_spec_line(base, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    validate(base);
    return base;
}

/// Populates the block grid. Streets run along x = pitch(i) and y = pitch(j).
inline Scene generate_scene(const SceneSpec &spec) {
    validate(spec);
    Scene scene;
    scene.spec = spec;
    SplitMix64 rng(spec.seed);
    const double half_street = 0.5 * spec.street_width;

    for (int bx = 0; bx < spec.blocks_x; ++bx) {
        for (int by = 0; by < spec.blocks_y; ++by) {
            const double x0 = spec.pitch(bx) + half_street, x1 = spec.pitch(bx + 1) - half_street;
            const double y0 = spec.pitch(by) + half_street, y1 = spec.pitch(by + 1) - half_street;
            const Eigen::Vector2d lo(x0, y0), hi(x1, y1);
            // side s: 0 = south (y0), 1 = north (y1), 2 = west (x0), 3 = east (x1)
            for (int side = 0; side < 4; ++side) {
                const bool along_x = side < 2;
                const double edge_lo = along_x ? x0 : y0, edge_hi = along_x ? x1 : y1;
                const double inward = (side == 0 || side == 2) ? 1.0 : -1.0;
                const double edge = side == 0 ? y0 : side == 1 ? y1 : side == 2 ? x0 : x1;
                auto at = [&](double along, double offset) {
                    const double across = edge + inward * offset;
                    return along_x ? Eigen::Vector2d(along, across) : Eigen::Vector2d(across, along);
                };

                // Buildings along the block edge with random widths, setbacks and gaps.
                for (int b = 0; b < spec.buildings_per_side; ++b) {
                    const double slot = (edge_hi - edge_lo) / spec.buildings_per_side;
                    const double width = rng.uniform(0.45, 0.85) * slot;
                    const double along = edge_lo + slot * b + rng.uniform(0.0, slot - width) + 0.5 * width;
                    const double depth = rng.uniform(6.0, 14.0);
                    const double setback = rng.uniform(2.5, 6.0);
                    const double height = rng.uniform(spec.building_min_height, spec.building_max_height);
                    const Eigen::Vector2d c = at(along, setback + 0.5 * depth);
                    Box box;
                    box.center = Point3(c.x(), c.y(), 0.5 * height);
                    box.half = along_x ? Eigen::Vector3d(0.5 * width, 0.5 * depth, 0.5 * height)
                                       : Eigen::Vector3d(0.5 * depth, 0.5 * width, 0.5 * height);
                    box.yaw = rng.uniform(-0.12, 0.12);
                    scene.boxes.push_back(box);
                }
                for (int p = 0; p < spec.poles_per_side; ++p) {
                    const Eigen::Vector2d c = at(rng.uniform(edge_lo + 2.0, edge_hi - 2.0), rng.uniform(0.5, 1.5));
                    scene.cylinders.push_back({c, rng.uniform(0.08, 0.3), 0.0, rng.uniform(3.5, 9.0)});
                }
                for (int t = 0; t < spec.trees_per_side; ++t) {
                    const Eigen::Vector2d c = at(rng.uniform(edge_lo + 3.0, edge_hi - 3.0), rng.uniform(1.0, 2.2));
                    const double trunk = rng.uniform(2.0, 3.5);
                    const double crown = rng.uniform(1.2, 2.6);
                    scene.cylinders.push_back({c, rng.uniform(0.15, 0.35), 0.0, trunk + 0.5 * crown});
                    scene.spheres.push_back({Point3(c.x(), c.y(), trunk + crown), crown});
                }
                for (int k = 0; k < spec.cars_per_side; ++k) {
                    const Eigen::Vector2d c = at(rng.uniform(edge_lo + 3.0, edge_hi - 3.0), -rng.uniform(1.6, 2.4));
                    const double len = rng.uniform(3.8, 5.2), wid = rng.uniform(1.7, 2.0), h = rng.uniform(1.3, 1.9);
                    Box car;
                    car.center = Point3(c.x(), c.y(), 0.5 * h + 0.15);
                    car.half = along_x ? Eigen::Vector3d(0.5 * len, 0.5 * wid, 0.5 * h)
                                       : Eigen::Vector3d(0.5 * wid, 0.5 * len, 0.5 * h);
                    car.yaw = rng.uniform(-0.05, 0.05);
                    scene.boxes.push_back(car);
                }
                (void)lo;
                (void)hi;
            }
        }
    }
    return scene;
}

namespace detail {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

inline double ray_box(const Point3 &o, const Eigen::Vector3d &d, const Box &b) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const Point3 rel = o - b.center;
    const Eigen::Vector3d lo(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
    const Eigen::Vector3d ld(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
    double tmin = -kNoHit, tmax = kNoHit;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(ld[a]) < 1e-15) {
            if (std::abs(lo[a]) > b.half[a]) return kNoHit;
            continue;
        }
        double t1 = (-b.half[a] - lo[a]) / ld[a];
        double t2 = (b.half[a] - lo[a]) / ld[a];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return kNoHit;
    }
    if (tmax < 0.0) return kNoHit;
    return tmin >= 0.0 ? tmin : kNoHit;  // origin inside a box: ignore
}

inline double ray_cylinder(const Point3 &o, const Eigen::Vector3d &d, const Cylinder &cy) {
    const double ox = o.x() - cy.center.x(), oy = o.y() - cy.center.y();
    const double a = d.x() * d.x() + d.y() * d.y();
    if (a < 1e-18) return kNoHit;
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double c = ox * ox + oy * oy - cy.radius * cy.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kNoHit;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    if (t <= 0.0) return kNoHit;
    const double z = o.z() + t * d.z();
    return (z >= cy.z0 && z <= cy.z1) ? t : kNoHit;
}

inline double ray_sphere(const Point3 &o, const Eigen::Vector3d &d, const Sphere &sp) {
    const Eigen::Vector3d oc = o - sp.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - sp.radius * sp.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return kNoHit;
    const double t = -b - std::sqrt(disc);
    return t > 0.0 ? t : kNoHit;
}

}  // namespace detail

/// Sensor pose on the ground plane: position (x, y, sensor_height), heading yaw.
inline RigidMotion sensor_pose(const SceneSpec &spec, double x, double y, double yaw_rad, double roll_rad = 0.0,
                               double pitch_rad = 0.0) {
    return RigidMotion(rot_z(yaw_rad) * rot_y(pitch_rad) * rot_x(roll_rad), Point3(x, y, spec.sensor_height));
}

/// Ray-cast scan from `pose` (sensor frame -> world). Points are returned in
/// the sensor frame. `noise_seed` drives range noise and dropout only.
inline Scan scan(const Scene &scene, const RigidMotion &pose, std::uint64_t noise_seed) {
    const SceneSpec &spec = scene.spec;
    SplitMix64 rng(noise_seed);
    const Point3 o = pose.translation();
    const Rotation &r = pose.rotation();

    // Cull objects that cannot be reached.
    const double reach = spec.max_range;
    std::vector<const Box *> boxes;
    for (const auto &b : scene.boxes)
        if (std::hypot(b.center.x() - o.x(), b.center.y() - o.y()) - b.half.head<2>().norm() < reach) boxes.push_back(&b);
    std::vector<const Cylinder *> cyls;
    for (const auto &c : scene.cylinders)
        if ((c.center - o.head<2>()).norm() - c.radius < reach) cyls.push_back(&c);
    std::vector<const Sphere *> spheres;
    for (const auto &s : scene.spheres)
        if ((s.center - o).norm() - s.radius < reach) spheres.push_back(&s);

    Scan out;
    out.cloud.points.reserve(static_cast<std::size_t>(spec.beams * spec.azimuth_steps));
    const double el_step = spec.beams > 1 ? (spec.beam_max_deg - spec.beam_min_deg) / (spec.beams - 1) : 0.0;
    for (int b = 0; b < spec.beams; ++b) {
        const double el = deg2rad(spec.beam_min_deg + el_step * b);
        for (int a = 0; a < spec.azimuth_steps; ++a) {
            const double az = 2.0 * kPi * a / spec.azimuth_steps;
            const Eigen::Vector3d ds(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
            const Eigen::Vector3d dw = r * ds;

            double best = detail::kNoHit;
            bool ground = false;
            if (dw.z() < 0.0) {
                best = -o.z() / dw.z();
                ground = true;
            }
            for (const Box *bx : boxes) {
                const double t = detail::ray_box(o, dw, *bx);
                if (t < best) best = t, ground = false;
            }
            for (const Cylinder *cy : cyls) {
                const double t = detail::ray_cylinder(o, dw, *cy);
                if (t < best) best = t, ground = false;
            }
            for (const Sphere *sp : spheres) {
                const double t = detail::ray_sphere(o, dw, *sp);
                if (t < best) best = t, ground = false;
            }
            const double noise = rng.normal(0.0, spec.range_noise);
            const double keep = rng.uniform();
            if (!(best >= spec.min_range && best < spec.max_range)) continue;
            const double frac = best / spec.max_range;
            if (keep < spec.far_dropout * frac * frac) continue;
            const double range = best + noise;
            out.cloud.push_back(ds * range, ground ? 0.2f : 0.8f);
            out.ground.push_back(ground);
        }
    }
    return out;
}

/// Waypoints along a rectangular loop around the central block. Every other
/// lap is shifted sideways by lane_offset.
inline Trajectory loop_trajectory(const SceneSpec &spec) {
    const int cx = std::max(0, (spec.blocks_x - 1) / 2), cy = std::max(0, (spec.blocks_y - 1) / 2);
    const double x0 = spec.pitch(cx), x1 = spec.pitch(cx + 1);
    const double y0 = spec.pitch(cy), y1 = spec.pitch(cy + 1);
    Trajectory traj;
    for (int lap = 0; lap < spec.laps; ++lap) {
        const double off = (lap % 2) * spec.lane_offset;
        // Outward shift keeps the loop rectangular.
        const std::vector<Eigen::Vector2d> corners{{x0 - off, y0 - off}, {x1 + off, y0 - off},
                                                   {x1 + off, y1 + off}, {x0 - off, y1 + off}};
        for (int e = 0; e < 4; ++e) {
            const Eigen::Vector2d a = corners[e], b = corners[(e + 1) % 4];
            const double len = (b - a).norm();
            const double yaw = std::atan2(b.y() - a.y(), b.x() - a.x());
            const int steps = static_cast<int>(std::floor(len / spec.frame_spacing));
            for (int k = 0; k < steps; ++k) {
                const Eigen::Vector2d p = a + (b - a) * (k * spec.frame_spacing / len);
                traj.push_back({static_cast<double>(traj.size()), sensor_pose(spec, p.x(), p.y(), yaw)});
            }
        }
    }
    return traj;
}

struct ScanPair {
    Scan source;
    Scan target;
    RigidMotion source_pose;
    RigidMotion target_pose;
    RigidMotion gt;  // maps source-frame points into the target frame
};

/// Two scans taken on the street network `distance` metres apart, each with
/// an independent random heading.
inline ScanPair make_scan_pair(const Scene &scene, double distance, SplitMix64 &rng,
                               std::optional<double> relative_yaw_deg = std::nullopt) {
    const SceneSpec &spec = scene.spec;
    // Source on a random street segment away from the grid border.
    const bool along_x = rng.uniform() < 0.5;
    const int nx = spec.blocks_x, ny = spec.blocks_y;
    const int street = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, (along_x ? ny : nx) - 1))));
    const double line = spec.pitch(std::min(street, along_x ? ny : nx));
    const double span_lo = spec.pitch(1) - 0.5 * spec.block_size;
    const double span_hi = spec.pitch(along_x ? nx : ny) - spec.pitch(1) + 0.5 * spec.block_size;
    const double s_along = rng.uniform(span_lo, std::max(span_lo, span_hi - distance));
    const double s_lat = rng.uniform(-2.0, 2.0);
    // Target further along the same street with a small lateral change.
    const double t_lat = std::clamp(s_lat + rng.uniform(-2.0, 2.0), -2.5, 2.5);
    const double dlat = t_lat - s_lat;
    const double t_along = s_along + std::sqrt(std::max(0.0, distance * distance - dlat * dlat));

    auto xy = [&](double along, double lat) {
        return along_x ? Eigen::Vector2d(along, line + lat) : Eigen::Vector2d(line + lat, along);
    };
    const Eigen::Vector2d ps = xy(s_along, s_lat), pt = xy(t_along, t_lat);
    const double yaw_s = rng.uniform(-kPi, kPi);
    const double yaw_t = relative_yaw_deg ? yaw_s + deg2rad(*relative_yaw_deg) : rng.uniform(-kPi, kPi);

    ScanPair pair;
    pair.source_pose = sensor_pose(spec, ps.x(), ps.y(), yaw_s);
    pair.target_pose = sensor_pose(spec, pt.x(), pt.y(), yaw_t);
    pair.source = scan(scene, pair.source_pose, rng());
    pair.target = scan(scene, pair.target_pose, rng());
    pair.gt = compose(pair.target_pose.inverse(), pair.source_pose);
    return pair;
}

inline double ground_fraction(const Scan &s) {
    if (s.ground.empty()) return 0.0;
    std::size_t g = 0;
    for (bool b : s.ground) g += b ? 1 : 0;
    return static_cast<double>(g) / static_cast<double>(s.ground.size());
}

}  // namespace quatro::synth

#endif  // QUATRO_SYNTH_HPP
