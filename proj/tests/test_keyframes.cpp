#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures/synthetic.hpp"
#include "keysg/errors.hpp"
#include "keysg/keyframes.hpp"

using namespace keysg;
namespace fx = keysg::fixtures;

namespace {

RoomRegion square_room(double x0, double y0, double x1, double y1) {
    RoomRegion room;
    room.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    return room;
}

FloorSlab unit_floor() {
    FloorSlab floor;
    floor.z_min = 0.0;
    floor.z_max = 3.0;
    return floor;
}

PoseFeature feature_1d(double x, int frame) {
    PoseFeature f;
    f.frame = frame;
    f.vector[0] = x;
    return f;
}

StandardizedFeatures raw_rows(const std::vector<Eigen::Matrix<double, 7, 1>>& rows) {
    StandardizedFeatures s;
    s.rows = rows;
    for (size_t i = 0; i < rows.size(); ++i) s.frames.push_back(static_cast<int>(i));
    return s;
}

// Independent O(n^2) oracle for the medoid.
int medoid_oracle(const std::vector<int>& cluster, const StandardizedFeatures& f) {
    double best_sum = 1e300;
    int best = -1;
    for (int c : cluster) {
        double sum = 0;
        for (int o : cluster) {
            double sq = 0;
            for (int d = 0; d < 7; ++d) {
                const double diff = f.rows[static_cast<size_t>(c)][d] -
                                    f.rows[static_cast<size_t>(o)][d];
                sq += diff * diff;
            }
            sum += std::sqrt(sq);
        }
        if (sum < best_sum ||
            (sum == best_sum && f.frames[static_cast<size_t>(c)] <
                                    f.frames[static_cast<size_t>(best)])) {
            best_sum = sum;
            best = c;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("pose_features of the identity pose") {
    PoseFeature f = pose_features(Eigen::Matrix4d::Identity(), 0, 1.0);
    Eigen::Matrix<double, 7, 1> expected;
    expected << 0, 0, 0, 1, 0, 0, 0;  // (t; w*q) with scalar-first quaternion
    CHECK((f.vector - expected).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pose_features canonicalizes the quaternion sign for Rz(pi)") {
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose.block<3, 3>(0, 0) << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    PoseFeature f = pose_features(pose, 0, 1.0);
    Eigen::Matrix<double, 7, 1> expected;
    expected << 0, 0, 0, 0, 0, 0, 1;
    CHECK((f.vector - expected).norm() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pose_features with w=0 zeroes the rotation block") {
    Eigen::Matrix4d pose = fx::make_pose({1, 2, 3}, 0.7, 0.2);
    PoseFeature f = pose_features(pose, 0, 0.0);
    CHECK(f.vector.tail<4>().norm() == 0.0);
    CHECK(f.vector.head<3>().isApprox(Eigen::Vector3d(1, 2, 3)));
}

TEST_CASE("pose_features rejects a non-rigid pose") {
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose(0, 0) = 2.0;
    CHECK_THROWS_AS(pose_features(pose, 0, 1.0), Error);
}

TEST_CASE("standardize matches the hand-computed population z-scores") {
    auto s = standardize({feature_1d(1, 0), feature_1d(2, 1), feature_1d(3, 2)});
    // Population std of {1,2,3} is sqrt(2/3).
    CHECK(s.rows[0][0] == doctest::Approx(-1.2247448713915890).epsilon(1e-12));
    CHECK(s.rows[1][0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.rows[2][0] == doctest::Approx(1.2247448713915890).epsilon(1e-12));
    for (int d = 1; d < 7; ++d)
        for (int i = 0; i < 3; ++i) CHECK(s.rows[static_cast<size_t>(i)][d] == 0.0);
}

TEST_CASE("standardize of a single feature is all zeros") {
    auto s = standardize({feature_1d(42, 0)});
    CHECK(s.rows[0].norm() == 0.0);
}

TEST_CASE("standardize is idempotent and centers every dimension") {
    fx::Rng rng(3);
    std::vector<PoseFeature> feats;
    for (int i = 0; i < 40; ++i) {
        PoseFeature f;
        f.frame = i;
        for (int d = 0; d < 7; ++d) f.vector[d] = rng.range(-4, 9);
        feats.push_back(f);
    }
    auto s1 = standardize(feats);
    for (int d = 0; d < 7; ++d) {
        double mean = 0, var = 0;
        for (const auto& r : s1.rows) mean += r[d];
        mean /= static_cast<double>(s1.rows.size());
        for (const auto& r : s1.rows) var += (r[d] - mean) * (r[d] - mean);
        var /= static_cast<double>(s1.rows.size());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
    }
    std::vector<PoseFeature> again;
    for (size_t i = 0; i < s1.rows.size(); ++i) {
        PoseFeature f;
        f.frame = static_cast<int>(i);
        f.vector = s1.rows[i];
        again.push_back(f);
    }
    auto s2 = standardize(again);
    for (size_t i = 0; i < s1.rows.size(); ++i)
        CHECK((s2.rows[i] - s1.rows[i]).norm() < 1e-9);
}

TEST_CASE("dbscan recovers two well-separated blobs") {
    fx::Rng rng(9);
    std::vector<Eigen::Matrix<double, 7, 1>> rows;
    std::vector<int> truth;
    for (int blob = 0; blob < 2; ++blob)
        for (int i = 0; i < 30; ++i) {
            Eigen::Matrix<double, 7, 1> r = Eigen::Matrix<double, 7, 1>::Zero();
            r[0] = blob * 20.0 + rng.gauss() * 0.1;
            r[1] = rng.gauss() * 0.1;
            rows.push_back(r);
            truth.push_back(blob);
        }
    auto cs = dbscan(raw_rows(rows), 0.8, 3);
    REQUIRE(cs.clusters.size() == 2);
    CHECK(cs.noise.empty());
    for (const auto& cluster : cs.clusters) {
        const int label = truth[static_cast<size_t>(cluster.front())];
        for (int idx : cluster) CHECK(truth[static_cast<size_t>(idx)] == label);
    }
}

TEST_CASE("dbscan puts identical points into one cluster") {
    std::vector<Eigen::Matrix<double, 7, 1>> rows(12, Eigen::Matrix<double, 7, 1>::Constant(0.5));
    auto cs = dbscan(raw_rows(rows), 0.8, 3);
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.clusters[0].size() == 12);
}

TEST_CASE("dbscan marks an isolated point as noise") {
    std::vector<Eigen::Matrix<double, 7, 1>> rows;
    rows.push_back(Eigen::Matrix<double, 7, 1>::Zero());
    auto cs = dbscan(raw_rows(rows), 0.8, 2);
    CHECK(cs.clusters.empty());
    REQUIRE(cs.noise.size() == 1);
}

TEST_CASE("medoid of a collinear triple is the middle point") {
    auto s = raw_rows({Eigen::Matrix<double, 7, 1>::Zero(),
                       Eigen::Matrix<double, 7, 1>::Constant(0).unaryExpr([](double) { return 0.0; }),
                       Eigen::Matrix<double, 7, 1>::Zero()});
    s.rows[0][0] = 0;
    s.rows[1][0] = 1;
    s.rows[2][0] = 2;
    CHECK(medoid({0, 1, 2}, s) == 1);
    CHECK(medoid({2, 0, 1}, s) == 1);  // permutation invariance
}

TEST_CASE("medoid of a singleton is its only member") {
    auto s = raw_rows({Eigen::Matrix<double, 7, 1>::Constant(3.0)});
    CHECK(medoid({0}, s) == 0);
}

TEST_CASE("medoid agrees with the exhaustive oracle on random clusters") {
    fx::Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + rng.uniform_int(50);
        std::vector<Eigen::Matrix<double, 7, 1>> rows;
        for (int i = 0; i < n; ++i) {
            Eigen::Matrix<double, 7, 1> r;
            for (int d = 0; d < 7; ++d) r[d] = rng.range(-2, 2);
            // Occasional exact duplicates exercise the tie-break rule.
            if (i > 0 && rng.uniform() < 0.2) r = rows[static_cast<size_t>(rng.uniform_int(i))];
            rows.push_back(r);
        }
        auto s = raw_rows(rows);
        std::vector<int> cluster(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) cluster[static_cast<size_t>(i)] = i;
        const int got = medoid(cluster, s);
        CHECK(got == medoid_oracle(cluster, s));
        // Eq.-style optimality: the winner's distance sum is minimal.
        auto sum_of = [&](int c) {
            double sum = 0;
            for (int o : cluster) sum += (s.rows[static_cast<size_t>(c)] -
                                          s.rows[static_cast<size_t>(o)]).norm();
            return sum;
        };
        for (int c : cluster) CHECK(sum_of(got) <= sum_of(c) + 1e-12);
    }
}

TEST_CASE("assign_frames matches dwell counts on a two-room layout") {
    std::vector<RoomRegion> rooms = {square_room(0, 0, 4, 4), square_room(5, 0, 9, 4)};
    rooms[0].floor_index = 0;
    rooms[1].floor_index = 0;
    std::vector<FloorSlab> floors = {unit_floor()};
    std::vector<PosedFrame> frames;
    auto add_frame_at = [&](double x, double y, double z) {
        PosedFrame f;
        f.index = static_cast<int>(frames.size());
        f.pose = Eigen::Matrix4d::Identity();
        f.pose.block<3, 1>(0, 3) << x, y, z;
        frames.push_back(f);
    };
    for (int i = 0; i < 10; ++i) add_frame_at(2.0, 2.0, 1.4);   // room 0
    for (int i = 0; i < 7; ++i) add_frame_at(7.0, 1.0, 1.4);    // room 1
    add_frame_at(4.5, 2.0, 1.4);                                // corridor gap
    add_frame_at(2.0, 2.0, 10.0);                               // above the slab

    auto sets = assign_frames(frames, rooms, floors);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].dense.size() == 10);
    CHECK(sets[1].dense.size() == 7);
}

TEST_CASE("filter_by_projection keeps in-room frames and drops doorway gazers") {
    // Room polygon [0,4]x[0,4]; the camera either looks at the room floor or
    // through the doorway into [5,9]x[0,4].
    RoomRegion room = square_room(0, 0, 4, 4);
    Intrinsics intr = fx::small_intrinsics();

    fx::World inside_world;
    inside_world.intr = intr;
    inside_world.add_box({0, 0, -0.2f}, {4, 4, 0});  // own floor only
    PosedFrame inside =
        fx::make_frame(inside_world, fx::make_pose({2, 2, 1.4}, 0.3, M_PI / 2 - 0.2), 0);

    fx::World neighbor_world;
    neighbor_world.intr = intr;
    neighbor_world.add_box({5, 0, -0.2f}, {9, 4, 0});      // neighbor floor
    neighbor_world.add_box({5, 0, 0}, {9, 4, 0.01f});       // thin clutter for density
    PosedFrame doorway =
        fx::make_frame(neighbor_world, fx::make_pose({3.8, 2, 1.4}, 0.0, 0.5), 1);

    std::vector<PosedFrame> frames = {inside, doorway};
    CHECK(filter_by_projection({0, 1}, frames, room, intr, 1.0) == std::vector<int>{0});
    CHECK(filter_by_projection({0, 1}, frames, room, intr, 0.5) == std::vector<int>{0});
    // eta = 0 keeps everything with valid depth.
    CHECK(filter_by_projection({0, 1}, frames, room, intr, 0.0) == std::vector<int>{0, 1});
}

TEST_CASE("select_keyframes returns one medoid per cluster") {
    std::vector<PosedFrame> frames;
    fx::Rng rng(5);
    const Eigen::Vector3d centers[3] = {{0, 0, 1}, {10, 0, 1}, {0, 10, 1}};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 5; ++i) {
            PosedFrame f;
            f.index = static_cast<int>(frames.size());
            f.pose = fx::make_pose(centers[c] + Eigen::Vector3d(rng.range(-0.01, 0.01),
                                                                rng.range(-0.01, 0.01), 0),
                                   0.0, 0.0);
            frames.push_back(f);
        }
    std::vector<int> dense(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) dense[i] = static_cast<int>(i);
    auto selected = select_keyframes(dense, frames, KeyframeParams{});
    CHECK(selected.size() == 3);
}

TEST_CASE("select_keyframes promotes all-noise inputs to the dense set") {
    std::vector<PosedFrame> frames;
    for (int i = 0; i < 6; ++i) {
        PosedFrame f;
        f.index = i;
        f.pose = fx::make_pose({i * 50.0, -i * 30.0, 1.0 + i}, 0.0, 0.0);
        frames.push_back(f);
    }
    std::vector<int> dense = {0, 1, 2, 3, 4, 5};
    auto selected = select_keyframes(dense, frames, KeyframeParams{});
    CHECK(selected == dense);
}

TEST_CASE("select_keyframes raises EmptyRoom on an empty dense set") {
    try {
        select_keyframes({}, {}, KeyframeParams{});
        FAIL("expected EmptyRoom");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyRoom);
    }
}

TEST_CASE("select_keyframes is invariant to uniform translation of all poses") {
    std::vector<PosedFrame> frames;
    fx::Rng rng(8);
    for (int i = 0; i < 60; ++i) {
        PosedFrame f;
        f.index = i;
        f.pose = fx::make_pose({rng.range(0, 2) + (i % 3) * 8.0, rng.range(0, 2), 1.4},
                               rng.range(0, 0.2), 0.0);
        frames.push_back(f);
    }
    std::vector<int> dense(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) dense[i] = static_cast<int>(i);
    auto base = select_keyframes(dense, frames, KeyframeParams{});

    std::vector<PosedFrame> moved = frames;
    for (auto& f : moved) f.pose.block<3, 1>(0, 3) += Eigen::Vector3d(123.0, -45.0, 6.0);
    auto shifted = select_keyframes(dense, moved, KeyframeParams{});
    CHECK(base == shifted);
}

TEST_CASE("coverage endpoints: full set gives 1, empty set gives 0") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-4, -4, -0.2f}, {4, 4, 0});
    world.add_box({-4, -4, 0}, {-3.8f, 4, 2.5f});
    std::vector<PosedFrame> frames;
    for (int i = 0; i < 5; ++i)
        frames.push_back(
            fx::make_frame(world, fx::make_pose({0.3 * i, 0.1, 1.4}, 0.4 * i, 0.3), i));
    std::vector<int> dense = {0, 1, 2, 3, 4};
    CHECK(coverage(dense, dense, frames, world.intr, 0.05) == doctest::Approx(1.0));
    CHECK(coverage({}, dense, frames, world.intr, 0.05) == doctest::Approx(0.0));
}

TEST_CASE("coverage is monotone in the keyframe set") {
    fx::World world;
    world.intr = fx::small_intrinsics();
    world.add_box({-4, -4, -0.2f}, {4, 4, 0});
    world.add_box({3.8f, -4, 0}, {4, 4, 2.5f});
    world.add_box({-4, 3.8f, 0}, {4, 4, 2.5f});
    std::vector<PosedFrame> frames;
    for (int i = 0; i < 8; ++i)
        frames.push_back(
            fx::make_frame(world, fx::make_pose({0.2 * i - 0.8, 0, 1.4}, 2 * M_PI * i / 8, 0.2), i));
    std::vector<int> dense = {0, 1, 2, 3, 4, 5, 6, 7};
    double prev = 0.0;
    std::vector<int> keys;
    for (int i = 0; i < 8; ++i) {
        keys.push_back(i);
        const double c = coverage(keys, dense, frames, world.intr, 0.05);
        CHECK(c >= prev - 1e-12);
        prev = c;
    }
    CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("medoid keyframes of a station sweep stay sparse and cover the room") {
    fx::World world = fx::furnished_room_world(240);
    fx::SweepSpec spec = fx::room_sweep_spec(4, 4);
    auto poses = fx::station_sweep({0, 0}, {4.6, 3.6}, spec);
    std::vector<PosedFrame> frames;
    for (size_t i = 0; i < poses.size(); ++i)
        frames.push_back(fx::make_frame(world, poses[i], static_cast<int>(i)));
    std::vector<int> dense(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) dense[i] = static_cast<int>(i);

    auto selected = select_keyframes(dense, frames, KeyframeParams{});
    CHECK(selected.size() <= dense.size() / 2);
    CHECK(coverage(selected, dense, frames, world.intr, 0.05) >= 0.95);
}
