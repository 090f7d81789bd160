#include "quatro/pipeline.hpp"
#include "quatro/synth.hpp"

#include <gtest/gtest.h>

#include <set>

namespace quatro {
namespace {

const synth::Scene &urban_scene() {
    static const synth::Scene scene = synth::generate_scene({});
    return scene;
}

PointCloud urban_scan(double along = 10.0, std::uint64_t noise_seed = 1) {
    const auto &scene = urban_scene();
    const auto &spec = scene.spec;
    return synth::scan(scene, synth::sensor_pose(spec, spec.pitch(1), spec.pitch(1) + along, 0.2), noise_seed).cloud;
}

PointCloud every_nth(const PointCloud &c, std::size_t target) {
    PointCloud out;
    const std::size_t step = std::max<std::size_t>(1, c.size() / target);
    for (std::size_t i = 0; i < c.size(); i += step) out.push_back(c[i]);
    return out;
}

// Removes the points whose azimuth lies in a wedge covering `fraction` of the circle.
PointCloud drop_wedge(const PointCloud &c, double fraction) {
    PointCloud out;
    for (const auto &p : c.points) {
        const double a = std::atan2(p.y(), p.x()) + kPi;  // [0, 2pi]
        if (a >= 2.0 * kPi * fraction) out.push_back(p);
    }
    return out;
}

bool success(const RigidMotion &est, const RigidMotion &truth) {
    return (est.translation() - truth.translation()).norm() < 2.0 &&
           rotation_error_deg(est.rotation(), truth.rotation()) < 10.0;
}

TEST(Register, IdenticalCloudsGiveIdentity) {
    const PointCloud c = every_nth(urban_scan(), 10000);
    ASSERT_GE(c.size(), 9000u);
    const auto r = register_clouds(c, c, QuatroConfig{});
    EXPECT_LT(r.motion.translation().norm(), 1e-3);
    EXPECT_LT(geodesic_angle(r.motion.rotation()), 0.01);
    EXPECT_TRUE(r.converged);
    EXPECT_FALSE(r.degenerate);
}

TEST(Register, KnownMotionPartialOverlap) {
    const PointCloud src = urban_scan();
    const RigidMotion truth = RigidMotion::from_ypr_deg(90, 0, 0, Point3(10, 4, 0.2));
    const PointCloud kept = drop_wedge(src, 0.3);
    EXPECT_NEAR(double(kept.size()) / double(src.size()), 0.7, 0.1);
    const PointCloud tgt = transform_cloud(kept, truth);
    const auto r = register_clouds(src, tgt, QuatroConfig{});
    EXPECT_TRUE(success(r.motion, truth)) << r.motion.matrix();
    EXPECT_GT(r.num_raw_pairs, r.num_pruned_pairs);
    EXPECT_GE(r.num_pruned_pairs, r.num_final_inliers);
}

TEST(Register, DisjointScenesAreNotConfidentlyWrong) {
    synth::SceneSpec other;
    other.seed = 99;
    const auto scene_b = synth::generate_scene(other);
    const PointCloud a = urban_scan();
    const PointCloud b = synth::scan(scene_b, synth::sensor_pose(other, other.pitch(2) + 30.0, other.pitch(2), 1.0), 2).cloud;
    const auto r = register_clouds(a, b, QuatroConfig{});
    const double ratio = r.num_raw_pairs == 0 ? 0.0 : double(r.num_final_inliers) / double(r.num_raw_pairs);
    EXPECT_FALSE(r.converged && ratio > 0.5) << "ratio " << ratio;
}

// Pure ground plane: nothing survives ground removal.
PointCloud ground_only() {
    PointCloud plane;
    SplitMix64 rng(1);
    for (int i = 0; i < 5000; ++i) {
        const double r = rng.uniform(3, 40), a = rng.uniform(-kPi, kPi);
        plane.push_back(Point3(r * std::cos(a), r * std::sin(a), -1.73));
    }
    return plane;
}

TEST(Register, NoCorrespondencesIsFailureReport) {
    const PointCloud plane = ground_only();
    const auto r = register_clouds(plane, plane, QuatroConfig{});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.num_raw_pairs, 0u);
    EXPECT_TRUE(r.motion.matrix().isIdentity(0));
}

TEST(Register, EmptyInputThrows) {
    const PointCloud c = every_nth(urban_scan(), 500);
    EXPECT_THROW(register_clouds(PointCloud{}, c, QuatroConfig{}), InvalidArgument);
    EXPECT_THROW(register_clouds(c, PointCloud{}, QuatroConfig{}), InvalidArgument);
}

TEST(Register, TimingKeysAreTheStages) {
    const PointCloud c = every_nth(urban_scan(), 5000);
    const auto r = register_clouds(c, c, QuatroConfig{});
    std::set<std::string> keys, expected(kStageNames.begin(), kStageNames.end());
    for (const auto &[k, v] : r.stage_timings) {
        keys.insert(k);
        EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(keys, expected);
    EXPECT_FALSE(r.mse_fitness);

    const auto f = register_clouds_c2f(c, c, QuatroConfig{});
    expected.insert(kFineStageName);
    keys.clear();
    for (const auto &[k, v] : f.stage_timings) keys.insert(k);
    EXPECT_EQ(keys, expected);
}

TEST(Register, GroundFreeSceneIgnoresGroundStage) {
    // Keep only points above the sensor: every patch fails the elevation test.
    auto above = [](const PointCloud &c) {
        PointCloud out;
        for (const auto &p : c.points)
            if (p.z() > 0.0) out.push_back(p);
        return out;
    };
    const PointCloud src = above(urban_scan(10.0, 1));
    const PointCloud tgt = above(urban_scan(14.0, 2));
    const auto labels = segment_ground(src, QuatroConfig{});
    ASSERT_EQ(std::count(labels.begin(), labels.end(), true), 0);
    QuatroConfig cfg;
    cfg.deterministic = true;
    PipelineMode off;
    off.ground_seg = false;
    const auto with = register_clouds(src, tgt, cfg, PipelineMode{});
    const auto without = register_clouds(src, tgt, cfg, off);
    ASSERT_GT(with.num_raw_pairs, 0u);
    EXPECT_EQ(with.motion.matrix(), without.motion.matrix());
    EXPECT_EQ(with.num_pruned_pairs, without.num_pruned_pairs);
    EXPECT_EQ(with.num_final_inliers, without.num_final_inliers);
}

TEST(Register, SensorPresetApplies) {
    const PointCloud c = every_nth(urban_scan(), 5000);
    PipelineMode mode;
    mode.sensor = SensorPreset::os1_64;
    const auto r = register_clouds(c, c, QuatroConfig{}, mode);
    EXPECT_LT(r.motion.translation().norm(), 1e-3);
}

TEST(Fitness, TrueMotionBeatsLargePerturbations) {
    const PointCloud src = urban_scan();
    const RigidMotion truth = RigidMotion::from_ypr_deg(25, 0, 0, Point3(3, -1, 0));
    const PointCloud tgt = transform_cloud(src, truth);
    const QuatroConfig cfg;
    const double best = fitness_score(src, tgt, truth, cfg.icp_max_corr_dist);
    for (double a = 0; a < 360; a += 45) {
        const Point3 d(2.0 * std::cos(deg2rad(a)), 2.0 * std::sin(deg2rad(a)), 0);
        const RigidMotion off(truth.rotation(), truth.translation() + d);
        EXPECT_LE(best, fitness_score(src, tgt, off, cfg.icp_max_corr_dist)) << a;
    }
    const RigidMotion up(truth.rotation(), truth.translation() + Point3(0, 0, 2.5));
    EXPECT_LE(best, fitness_score(src, tgt, up, cfg.icp_max_corr_dist));
}

TEST(CoarseToFine, IdentityCase) {
    const PointCloud c = every_nth(urban_scan(), 10000);
    const auto r = register_clouds_c2f(c, c, QuatroConfig{});
    EXPECT_LT(r.motion.translation().norm(), 1e-4);
    EXPECT_LT(geodesic_angle(r.motion.rotation()), 0.01);
    ASSERT_TRUE(r.mse_fitness);
    EXPECT_LT(*r.mse_fitness, 1e-8);
}

TEST(CoarseToFine, CoarseFailureSkipsFineStage) {
    const PointCloud plane = ground_only();
    const auto r = register_clouds_c2f(plane, plane, QuatroConfig{});
    EXPECT_FALSE(r.converged);
    EXPECT_FALSE(r.mse_fitness);
    EXPECT_EQ(r.stage_timings.count(kFineStageName), 0u);
}

TEST(CoarseToFine, LargeOffsetCapturedWhereIcpAloneFails) {
    const auto &scene = urban_scene();
    const auto &spec = scene.spec;
    const RigidMotion pose_s = synth::sensor_pose(spec, spec.pitch(1), spec.pitch(1) + 10.0, 0.0);
    const RigidMotion pose_t = synth::sensor_pose(spec, spec.pitch(1), spec.pitch(1) + 20.0, deg2rad(120.0));
    const PointCloud src = synth::scan(scene, pose_s, 3).cloud, tgt = synth::scan(scene, pose_t, 4).cloud;
    const RigidMotion truth = compose(pose_t.inverse(), pose_s);
    const QuatroConfig cfg;
    const auto icp = icp_point_to_point(src, tgt, RigidMotion(), cfg.icp_max_iters, cfg.icp_max_corr_dist);
    EXPECT_FALSE(success(icp.motion, truth));
    const auto c2f = register_clouds_c2f(src, tgt, cfg);
    EXPECT_TRUE(success(c2f.motion, truth));
    EXPECT_LT((c2f.motion.translation() - truth.translation()).norm(), 0.3);
}

}  // namespace
}  // namespace quatro
