#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "fixtures/synthetic.hpp"
#include "keysg/errors.hpp"
#include "keysg/ingest.hpp"

using namespace keysg;
namespace fx = keysg::fixtures;

namespace {

Intrinsics tiny_intr() {
    Intrinsics intr;
    intr.fx = 4;
    intr.fy = 4;
    intr.cx = 4;
    intr.cy = 4;
    intr.width = 8;
    intr.height = 8;
    intr.depth_scale = 1000;
    return intr;
}

void write_pose(const std::filesystem::path& path, const Eigen::Matrix4d& m) {
    std::ofstream out(path);
    out.precision(17);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) out << m(r, c) << " ";
        out << "\n";
    }
}

void write_fixture_sequence(const std::filesystem::path& root, int n_frames,
                            const Intrinsics& intr, int depth_dim = 0) {
    std::filesystem::create_directories(root / "color");
    std::filesystem::create_directories(root / "depth");
    std::filesystem::create_directories(root / "poses");
    {
        std::ofstream out(root / "intrinsics.txt");
        out << intr.fx << " " << intr.fy << " " << intr.cx << " " << intr.cy << " " << intr.width
            << " " << intr.height << " " << intr.depth_scale << "\n";
    }
    const int dd = depth_dim > 0 ? depth_dim : intr.width;
    for (int i = 0; i < n_frames; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06d", i);
        ImageU8 color(intr.width, intr.height);
        ImageU16 depth(dd, depth_dim > 0 ? depth_dim : intr.height);
        for (auto& v : depth.data) v = 1500;
        write_png_rgb8((root / "color" / (std::string(name) + ".png")).string(), color);
        write_png_gray16((root / "depth" / (std::string(name) + ".png")).string(), depth);
        write_pose(root / "poses" / (std::string(name) + ".txt"), Eigen::Matrix4d::Identity());
    }
}

}  // namespace

TEST_CASE("load_sequence reads a 3-frame fixture in order") {
    fx::TempDir dir("ingest");
    write_fixture_sequence(dir.path(), 3, tiny_intr());
    Sequence seq = load_sequence(dir.path().string());
    REQUIRE(seq.frames.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(seq.frames[static_cast<size_t>(i)].index == i);
    CHECK(seq.intrinsics.width == 8);
}

TEST_CASE("load_sequence rejects a reflection pose") {
    fx::TempDir dir("badpose");
    write_fixture_sequence(dir.path(), 2, tiny_intr());
    Eigen::Matrix4d reflected = Eigen::Matrix4d::Identity();
    reflected(2, 2) = -1.0;  // det(R) = -1
    write_pose(dir.path() / "poses" / "000001.txt", reflected);
    CHECK_THROWS_WITH_AS(load_sequence(dir.path().string()), doctest::Contains("BadPose"),
                         Error);
}

TEST_CASE("load_sequence rejects mismatched depth dimensions") {
    fx::TempDir dir("baddims");
    write_fixture_sequence(dir.path(), 1, tiny_intr(), 4);
    CHECK_THROWS_AS(load_sequence(dir.path().string()), Error);
    try {
        load_sequence(dir.path().string());
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadIntrinsics);
    }
}

TEST_CASE("load_sequence reports incomplete streams") {
    fx::TempDir dir("missing");
    write_fixture_sequence(dir.path(), 2, tiny_intr());
    std::filesystem::remove(dir.path() / "depth" / "000001.png");
    try {
        load_sequence(dir.path().string());
        FAIL("expected MissingFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingFile);
    }
}

TEST_CASE("backproject principal ray lands on the optical axis") {
    Intrinsics intr = fx::small_intrinsics();
    PosedFrame frame;
    frame.depth = ImageU16(intr.width, intr.height);
    frame.depth.at(32, 24) = 1000;  // one depth_scale unit = 1 m
    PointCloud cloud = backproject(frame, intr, 1);
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0].x() == doctest::Approx(0.0));
    CHECK(cloud.points[0].y() == doctest::Approx(0.0));
    CHECK(cloud.points[0].z() == doctest::Approx(1.0));
}

TEST_CASE("backproject of an all-zero depth map is empty") {
    Intrinsics intr = fx::small_intrinsics();
    PosedFrame frame;
    frame.depth = ImageU16(intr.width, intr.height);
    CHECK(backproject(frame, intr, 1).empty());
}

TEST_CASE("backproject matches the hand-applied pinhole formula on a 2x2 frame") {
    Intrinsics intr;
    intr.fx = 1;
    intr.fy = 1;
    intr.cx = 0.5;
    intr.cy = 0.5;
    intr.width = 2;
    intr.height = 2;
    intr.depth_scale = 100;

    PosedFrame frame;
    frame.depth = ImageU16(2, 2);
    frame.depth.at(0, 0) = 100;  // 1 m
    frame.depth.at(1, 0) = 200;  // 2 m
    frame.depth.at(0, 1) = 300;  // 3 m
    frame.depth.at(1, 1) = 400;  // 4 m
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose.block<3, 3>(0, 0) << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // Rz(+90 deg)
    pose.block<3, 1>(0, 3) << 10, 20, 30;
    frame.pose = pose;

    PointCloud cloud = backproject(frame, intr, 1);
    REQUIRE(cloud.size() == 4);
    // Camera points ((u-cx)d/fx, (v-cy)d/fy, d), rotated and translated by hand.
    const Eigen::Vector3f expected[4] = {
        {10.5f, 19.5f, 31.f}, {11.f, 21.f, 32.f}, {8.5f, 18.5f, 33.f}, {8.f, 22.f, 34.f}};
    for (int i = 0; i < 4; ++i)
        CHECK((cloud.points[static_cast<size_t>(i)] - expected[i]).norm() ==
              doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("every back-projected point reprojects into its source pixel") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-5, -5, -0.2f}, {5, 5, 0});
    world.add_box({-5, -5, 0}, {-4.8f, 5, 3});
    PosedFrame frame = fx::make_frame(world, fx::make_pose({0, 0, 1.4}, M_PI, 0.3), 0);

    std::vector<std::pair<int, int>> pixels;
    for (int v = 0; v < frame.depth.height; ++v)
        for (int u = 0; u < frame.depth.width; ++u)
            if (frame.depth.at(u, v) > 0) pixels.emplace_back(u, v);
    PointCloud cloud = backproject(frame, world.intr, 1);
    REQUIRE(cloud.size() == pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        auto proj = project(cloud.points[i], frame.pose, world.intr);
        REQUIRE(proj.has_value());
        CHECK(std::abs(proj->u - pixels[i].first) < 0.5);
        CHECK(std::abs(proj->v - pixels[i].second) < 0.5);
    }
}

TEST_CASE("fuse_scene of one frame equals the voxel-downsampled back-projection") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-3, -3, 1.0f}, {3, 3, 1.4f});
    PosedFrame frame = fx::make_frame(world, fx::make_pose({0, 0, 3.0}, 0, M_PI / 2 - 0.01), 0);
    // Camera looks straight down at a slab.
    PointCloud direct = voxel_downsample(backproject(frame, world.intr, 1), 0.1);
    PointCloud fused = fuse_scene({frame}, world.intr, 0.1, 1);
    REQUIRE(fused.size() == direct.size());
    for (size_t i = 0; i < fused.size(); ++i)
        CHECK((fused.points[i] - direct.points[i]).norm() == doctest::Approx(0.0));
}

TEST_CASE("fuse_scene is idempotent under duplicated frames") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-3, -3, 2.0f}, {3, 3, 2.5f});
    PosedFrame frame = fx::make_frame(world, fx::make_pose({0, 0, 4.0}, 0.2, 1.2), 0);
    PointCloud once = fuse_scene({frame}, world.intr, 0.1, 1);
    PointCloud twice = fuse_scene({frame, frame}, world.intr, 0.1, 1);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i)
        CHECK((once.points[i] - twice.points[i]).norm() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("fuse_scene over disjoint views sums occupied-voxel counts") {
    Intrinsics intr = fx::small_intrinsics();
    auto make_flat_frame = [&](double tx) {
        PosedFrame f;
        f.depth = ImageU16(intr.width, intr.height);
        for (auto& d : f.depth.data) d = 2000;
        f.pose = Eigen::Matrix4d::Identity();
        f.pose(0, 3) = tx;
        return f;
    };
    PosedFrame a = make_flat_frame(0.0);
    PosedFrame b = make_flat_frame(100.0);  // far away: guaranteed disjoint voxels
    const double voxel = 0.05;
    size_t na = to_voxels(fuse_scene({a}, intr, voxel, 1), voxel).size();
    size_t nb = to_voxels(fuse_scene({b}, intr, voxel, 1), voxel).size();
    size_t nab = to_voxels(fuse_scene({a, b}, intr, voxel, 1), voxel).size();
    CHECK(nab == na + nb);
}

TEST_CASE("fuse_scene output does not depend on frame order") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-4, -4, -0.2f}, {4, 4, 0});
    world.add_box({3.8f, -4, 0}, {4, 4, 2.5f});
    std::vector<PosedFrame> frames;
    for (int i = 0; i < 4; ++i)
        frames.push_back(
            fx::make_frame(world, fx::make_pose({0.2 * i, 0.1 * i, 1.4}, 0.3 * i, 0.2), i));
    std::vector<PosedFrame> reversed(frames.rbegin(), frames.rend());
    PointCloud fwd = fuse_scene(frames, world.intr, 0.08, 2);
    PointCloud rev = fuse_scene(reversed, world.intr, 0.08, 2);
    REQUIRE(fwd.size() == rev.size());
    for (size_t i = 0; i < fwd.size(); ++i)
        CHECK((fwd.points[i] - rev.points[i]).norm() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("fuse_scene with no valid depth raises EmptyScene") {
    Intrinsics intr = fx::small_intrinsics();
    PosedFrame f;
    f.depth = ImageU16(intr.width, intr.height);
    try {
        fuse_scene({f}, intr, 0.05, 1);
        FAIL("expected EmptyScene");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyScene);
    }
}

TEST_CASE("to_voxels basics") {
    PointCloud c;
    c.points = {{0.01f, 0, 0}, {0.02f, 0, 0}};
    CHECK(to_voxels(c, 0.05).size() == 1);
    CHECK(to_voxels(PointCloud{}, 0.05).empty());

    // 10 generic-position points at a microscopic voxel size stay distinct.
    fx::Rng rng(42);
    PointCloud r;
    for (int i = 0; i < 10; ++i)
        r.points.emplace_back(static_cast<float>(rng.range(0.1, 0.9)),
                              static_cast<float>(rng.range(0.1, 0.9)),
                              static_cast<float>(rng.range(0.1, 0.9)));
    CHECK(to_voxels(r, 1e-6).size() == 10);
}

TEST_CASE("voxelization commutes with voxel-aligned pose translation") {
    Intrinsics intr;
    intr.fx = 1;
    intr.fy = 1;
    intr.cx = 0.5;
    intr.cy = 0.5;
    intr.width = 2;
    intr.height = 2;
    intr.depth_scale = 16;  // dyadic depths keep the arithmetic exact

    PosedFrame frame;
    frame.depth = ImageU16(2, 2);
    frame.depth.at(0, 0) = 16;
    frame.depth.at(1, 0) = 32;
    frame.depth.at(0, 1) = 48;
    frame.depth.at(1, 1) = 64;
    frame.pose = Eigen::Matrix4d::Identity();

    const double voxel = 0.5;
    const Eigen::Vector3d delta(2.0, -1.0, 0.5);  // all multiples of voxel
    VoxelSet base = to_voxels(backproject(frame, intr, 1), voxel);
    frame.pose.block<3, 1>(0, 3) = delta;
    VoxelSet moved = to_voxels(backproject(frame, intr, 1), voxel);
    REQUIRE(base.size() == moved.size());
    for (const auto& k : base.keys)
        CHECK(moved.contains(VoxelKey{k.x + 4, k.y - 2, k.z + 1}));
}
