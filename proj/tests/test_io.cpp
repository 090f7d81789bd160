#include "quatro/io.hpp"
#include "quatro/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace quatro {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("quatro_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }
    void write_text(const std::string &name, const std::string &text) const { std::ofstream(path(name)) << text; }
    void write_bytes(const std::string &name, const std::vector<unsigned char> &bytes) const {
        std::ofstream out(path(name), std::ios::binary);
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    fs::path dir_;
};

std::vector<unsigned char> le_record(float x, float y, float z, float i) {
    std::vector<unsigned char> out;
    for (float f : {x, y, z, i}) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(u >> (8 * b)));
    }
    return out;
}

TEST_F(IoTest, KittiBinTwoRecords) {
    auto bytes = le_record(1.5f, -2.0f, 0.25f, 0.7f);
    const auto second = le_record(10.0f, 20.0f, -30.0f, 0.0f);
    bytes.insert(bytes.end(), second.begin(), second.end());
    ASSERT_EQ(bytes.size(), 32u);
    write_bytes("a.bin", bytes);
    const PointCloud c = read_kitti_bin(path("a.bin"));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0], Point3(1.5, -2.0, 0.25));
    EXPECT_EQ(c[1], Point3(10, 20, -30));
    ASSERT_TRUE(c.has_intensity());
    EXPECT_EQ(c.intensity[0], 0.7f);
}

TEST_F(IoTest, KittiBinEmptyFile) {
    write_bytes("e.bin", {});
    EXPECT_TRUE(read_kitti_bin(path("e.bin")).empty());
}

TEST_F(IoTest, KittiBinBadLengthReportsOffset) {
    auto bytes = le_record(1, 2, 3, 4);
    bytes.push_back(0);
    write_bytes("bad.bin", bytes);
    try {
        read_kitti_bin(path("bad.bin"));
        FAIL() << "expected FormatError";
    } catch (const FormatError &e) {
        EXPECT_EQ(e.where(), 16u);
    }
}

TEST_F(IoTest, KittiBinRoundTrip) {
    SplitMix64 rng(1);
    PointCloud c;
    for (int i = 0; i < 100; ++i)
        c.push_back(Point3(float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)), float(rng.uniform(-3, 3))),
                    float(rng.uniform()));
    write_kitti_bin(c, path("r.bin"));
    const PointCloud back = read_cloud(path("r.bin"));
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_EQ(back[i], c[i]);
        EXPECT_EQ(back.intensity[i], c.intensity[i]);
    }
}

TEST_F(IoTest, PlyRoundTrip) {
    SplitMix64 rng(2);
    const PointCloud c = oracle::random_cloud(rng, 100, 40);
    write_ply_ascii(c, path("c.ply"));
    const PointCloud back = read_ply_ascii(path("c.ply"));
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((back[i] - c[i]).cwiseAbs().maxCoeff(), 1e-5);
    // Reading twice gives identical values.
    const PointCloud again = read_ply_ascii(path("c.ply"));
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(again[i], back[i]);
}

TEST_F(IoTest, PlyExtraPropertiesAndOtherElements) {
    write_text("x.ply", "ply\nformat ascii 1.0\ncomment made by hand\n"
                        "element camera 1\nproperty float fx\n"
                        "element vertex 2\nproperty float nx\nproperty float x\nproperty float y\n"
                        "property float z\nproperty uchar red\n"
                        "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
                        "500\n"
                        "0.1 1 2 3 255\n"
                        "0.2 4 5 6 0\n");
    const PointCloud c = read_ply_ascii(path("x.ply"));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0], Point3(1, 2, 3));
    EXPECT_EQ(c[1], Point3(4, 5, 6));
    EXPECT_FALSE(c.has_intensity());
}

TEST_F(IoTest, PlyCountMismatch) {
    write_text("m.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                        "property float z\nend_header\n1 2 3\n4 5 6\n");
    EXPECT_THROW(read_ply_ascii(path("m.ply")), FormatError);
}

TEST_F(IoTest, PlyMissingElements) {
    write_text("n.ply", "ply\nformat ascii 1.0\nelement face 0\nend_header\n");
    EXPECT_THROW(read_ply_ascii(path("n.ply")), FormatError);
    write_text("o.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
    EXPECT_THROW(read_ply_ascii(path("o.ply")), FormatError);
    write_text("p.ply", "not a ply\n");
    EXPECT_THROW(read_ply_ascii(path("p.ply")), FormatError);
}

TEST_F(IoTest, PosesIdentityLine) {
    write_text("poses.txt", "1 0 0 0 0 1 0 0 0 0 1 0\n");
    const Trajectory t = read_kitti_poses(path("poses.txt"));
    ASSERT_EQ(t.size(), 1u);
    EXPECT_TRUE(t[0].pose.matrix().isIdentity(0));
    EXPECT_EQ(t[0].timestamp, 0.0);
}

TEST_F(IoTest, PosesTwoLinesWithIndexTimestamps) {
    write_text("poses.txt", "1 0 0 1.5 0 1 0 -2 0 0 1 0.25\n0 -1 0 3 1 0 0 4 0 0 1 5\n");
    const Trajectory t = read_kitti_poses(path("poses.txt"));
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0].pose.translation(), Point3(1.5, -2, 0.25));
    EXPECT_NEAR(geodesic_angle(t[1].pose.rotation()), 90.0, 1e-12);
    EXPECT_EQ(t[1].timestamp, 1.0);
}

TEST_F(IoTest, PosesReprojectSlightlyOffRotation) {
    write_text("poses.txt", "1.0001 0 0 0 0 1 0 0 0 0 1 0\n");
    const Trajectory t = read_kitti_poses(path("poses.txt"));
    EXPECT_LT(orthonormality_residual(t[0].pose.rotation()), 1e-12);
    write_text("bad.txt", "1.5 0 0 0 0 1 0 0 0 0 1 0\n");
    EXPECT_THROW(read_kitti_poses(path("bad.txt")), FormatError);
}

TEST_F(IoTest, PosesErrorsCarryLineNumber) {
    write_text("tok.txt", "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 x 0 0 1 0\n");
    try {
        read_kitti_poses(path("tok.txt"));
        FAIL() << "expected FormatError";
    } catch (const FormatError &e) {
        EXPECT_EQ(e.where(), 2u);
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
    write_text("count.txt", "1 0 0 0 0 1 0 0 0 0 1\n");
    EXPECT_THROW(read_kitti_poses(path("count.txt")), FormatError);
}

TEST_F(IoTest, PosesRoundTrip) {
    SplitMix64 rng(8);
    Trajectory traj;
    for (int i = 0; i < 20; ++i)
        traj.push_back({double(i), RigidMotion(oracle::random_rotation(rng), Point3(rng.normal(), rng.normal(), 0))});
    write_kitti_poses(traj, path("rt.txt"));
    const Trajectory back = read_kitti_poses(path("rt.txt"));
    ASSERT_EQ(back.size(), traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        EXPECT_LT((back[i].pose.matrix() - traj[i].pose.matrix()).norm(), 1e-9);
}

TEST_F(IoTest, MissingFile) {
    EXPECT_THROW(read_cloud(path("nope.bin")), std::runtime_error);
    EXPECT_THROW(read_kitti_poses(path("nope.txt")), std::runtime_error);
    EXPECT_THROW(read_cloud(path("a.xyz")), std::runtime_error);
}

}  // namespace
}  // namespace quatro
