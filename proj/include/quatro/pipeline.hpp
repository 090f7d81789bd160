// End-to-end registration: ground removal, correspondence front-end, pruning,
// quasi-SO(3) rotation and component-wise translation, plus an optional ICP
// fine stage.

#ifndef QUATRO_PIPELINE_HPP
#define QUATRO_PIPELINE_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"
#include "quatro/features.hpp"
#include "quatro/ground.hpp"
#include "quatro/icp.hpp"
#include "quatro/pruning.hpp"
#include "quatro/solver.hpp"

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <utility>

namespace quatro {

struct InsAngles {
    double roll_deg = 0.0;
    double pitch_deg = 0.0;
};

struct PipelineMode {
    bool ground_seg = true;
    std::optional<InsAngles> ins;
    bool fine_align = false;
    std::optional<SensorPreset> sensor;
};

/// Stage keys of the coarse pipeline, in execution order.
inline constexpr std::array<const char *, 9> kStageNames{"ground", "voxel",  "normals", "fpfh", "reciprocal",
                                                         "prune",  "tims",   "gnc_yaw", "cote"};
inline constexpr const char *kFineStageName = "icp";

namespace detail {

class StageClock {
public:
    explicit StageClock(RegistrationReport &report) : report_(report), last_(clock::now()) {
        for (const char *name : kStageNames) report_.stage_timings[name] = 0.0;
    }
    void lap(const char *stage) {
        const auto now = clock::now();
        report_.stage_timings[stage] += std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
    }

private:
    using clock = std::chrono::steady_clock;
    RegistrationReport &report_;
    clock::time_point last_;
};

struct Features {
    PointCloud cloud;
    std::vector<FpfhDescriptor> descriptors;
};

}  // namespace detail

/// Coarse global registration of `src` onto `tgt`. A pair without any
/// putative correspondence yields a failure report (identity, not converged).
inline RegistrationReport register_clouds(const PointCloud &src, const PointCloud &tgt, QuatroConfig config,
                                          const PipelineMode &mode = {}) {
    if (src.empty() || tgt.empty()) throw InvalidArgument("register_clouds: both clouds must be non-empty");
    if (mode.sensor) config.apply_preset(*mode.sensor);
    config.validate();

    RegistrationReport report;
    detail::StageClock clock(report);

    Rotation pre = Rotation::Identity();
    PointCloud source = src;
    if (mode.ins) {
        pre = ins_rotation(mode.ins->roll_deg, mode.ins->pitch_deg);
        source = ins_compensate(src, mode.ins->roll_deg, mode.ins->pitch_deg);
    }

    PointCloud s_ng = source, t_ng = tgt;
    clock.lap("ground");
    if (mode.ground_seg) {
        s_ng = non_ground(source, segment_ground(source, config));
        t_ng = non_ground(tgt, segment_ground(tgt, config));
        clock.lap("ground");
    }
    if (s_ng.empty() || t_ng.empty()) {
        report.motion = RigidMotion(pre, Point3::Zero());
        return report;
    }

    detail::Features fs, ft;
    fs.cloud = voxel_downsample(s_ng, config.voxel_size);
    ft.cloud = voxel_downsample(t_ng, config.voxel_size);
    clock.lap("voxel");

    const KdTree3d s_tree(fs.cloud.points), t_tree(ft.cloud.points);
    const auto s_normals = estimate_normals(fs.cloud, config.normal_radius, s_tree);
    const auto t_normals = estimate_normals(ft.cloud, config.normal_radius, t_tree);
    clock.lap("normals");

    fs.descriptors = compute_fpfh(fs.cloud, s_normals, config.fpfh_radius, s_tree);
    ft.descriptors = compute_fpfh(ft.cloud, t_normals, config.fpfh_radius, t_tree);
    clock.lap("fpfh");

    const CorrespondenceSet raw = match_reciprocal(fs.descriptors, ft.descriptors);
    report.num_raw_pairs = raw.size();
    clock.lap("reciprocal");
    if (raw.empty()) {
        report.motion = RigidMotion(pre, Point3::Zero());
        return report;
    }

    const CorrespondenceSet pruned = prune(raw, fs.cloud, ft.cloud, config);
    report.num_pruned_pairs = pruned.size();
    clock.lap("prune");

    const TimSet tims = build_tims(fs.cloud, ft.cloud, pruned);
    clock.lap("tims");

    Rotation yaw = Rotation::Identity();
    bool gnc_converged = false;
    if (tims.empty()) {
        report.degenerate = true;
    } else {
        const GncResult gnc = gnc_rotation(tims, config);
        yaw = gnc.rotation;
        gnc_converged = gnc.converged && !gnc.degenerate;
        for (double w : gnc.weights) report.num_final_inliers += w > 0.5 ? 1 : 0;
        report.degenerate = gnc.degenerate || report.num_final_inliers < 3;
    }
    clock.lap("gnc_yaw");

    const Point3 t = cote(fs.cloud, ft.cloud, pruned, yaw, config);
    clock.lap("cote");

    report.motion = RigidMotion(yaw * pre, t);
    report.converged = gnc_converged && pruned.size() >= static_cast<std::size_t>(std::max(config.min_clique_size, 2));
    return report;
}

/// Coarse registration followed by ICP seeded with the coarse motion. The
/// fine stage runs on the full clouds. Coarse failures are returned as-is.
inline RegistrationReport register_clouds_c2f(const PointCloud &src, const PointCloud &tgt, QuatroConfig config,
                                              const PipelineMode &mode = {}) {
    if (mode.sensor) config.apply_preset(*mode.sensor);
    RegistrationReport report = register_clouds(src, tgt, config, mode);
    if (report.num_raw_pairs == 0) return report;

    const auto start = std::chrono::steady_clock::now();
    const KdTree3d tree(tgt.points);
    const IcpResult fine = icp_point_to_point(src, tree, report.motion, config.icp_max_iters,
                                              config.icp_max_corr_dist, config.icp_epsilon);
    report.motion = fine.motion;
    report.mse_fitness = fine.mse;
    report.stage_timings[kFineStageName] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace quatro

#endif  // QUATRO_PIPELINE_HPP
