#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "keysg/camera.hpp"
#include "keysg/hierseg.hpp"
#include "keysg/pointcloud.hpp"

namespace keysg {

// 7D pose feature: translation followed by the rotation-weighted quaternion,
// scalar component first and sign-canonicalized.
struct PoseFeature {
    int frame = 0;
    Eigen::Matrix<double, 7, 1> vector = Eigen::Matrix<double, 7, 1>::Zero();
    double rotation_weight = 1.0;
};

// Frame membership for one room as it moves through the selection pipeline.
struct RoomFrameSets {
    std::vector<int> dense;      // frames assigned to the room (post-filter)
    std::vector<int> keyframes;  // selected subset
    double eta = 0.0;
    bool flagged_empty = false;  // no frames survived filtering
};

struct StandardizedFeatures {
    // Row i corresponds to features[i] of the input order.
    std::vector<Eigen::Matrix<double, 7, 1>> rows;
    std::vector<int> frames;
    Eigen::Matrix<double, 7, 1> mean = Eigen::Matrix<double, 7, 1>::Zero();
    Eigen::Matrix<double, 7, 1> std_dev = Eigen::Matrix<double, 7, 1>::Ones();
};

struct ClusterSet {
    std::vector<std::vector<int>> clusters;  // indices into the feature rows
    std::vector<int> noise;
    double eps = 0.0;
    int min_pts = 0;
};

struct KeyframeParams {
    double rotation_weight = 1.0;  // w
    double eta = 0.5;
    double eps = 0.8;
    int min_pts = 3;
    double coverage_voxel = 0.05;
};

// Frame t joins room i when its camera center lies inside Vol(R_i). Rooms are
// disjoint, so a frame lands in at most one room.
std::vector<RoomFrameSets> assign_frames(const std::vector<PosedFrame>& frames,
                                         const std::vector<RoomRegion>& rooms,
                                         const std::vector<FloorSlab>& floors);

// Keep a frame when at least eta of its back-projected points fall inside the
// room polygon (in the XY plane).
std::vector<int> filter_by_projection(const std::vector<int>& dense,
                                      const std::vector<PosedFrame>& frames,
                                      const RoomRegion& room, const Intrinsics& intr, double eta,
                                      int stride = 4);

PoseFeature pose_features(const Eigen::Matrix4d& pose, int frame_index, double rotation_weight);

// Per-dimension population mean/std; constant dimensions pass through (std=1).
StandardizedFeatures standardize(const std::vector<PoseFeature>& features);

// Euclidean-metric density clustering. Deterministic: points are processed in
// ascending index order and border points attach to the first core cluster
// that reaches them.
ClusterSet dbscan(const StandardizedFeatures& features, double eps, int min_pts);

// argmin of the summed distance to all cluster members; ties break toward the
// lowest frame index.
int medoid(const std::vector<int>& cluster, const StandardizedFeatures& features);

// Medoid of every cluster plus each noise point promoted to a keyframe.
// Returns frame indices in ascending order.
std::vector<int> select_keyframes(const std::vector<int>& dense,
                                  const std::vector<PosedFrame>& frames,
                                  const KeyframeParams& params);

// |voxels(keyframes) intersect voxels(dense)| / |voxels(dense)| at stride 1.
double coverage(const std::vector<int>& keyframes, const std::vector<int>& dense,
                const std::vector<PosedFrame>& frames, const Intrinsics& intr,
                double voxel_size);

}  // namespace keysg
