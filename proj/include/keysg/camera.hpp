#pragma once

#include <Eigen/Core>
#include <optional>

#include "keysg/image.hpp"
#include "keysg/pointcloud.hpp"

namespace keysg {

struct Intrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
    double depth_scale = 1000.0;  // raw depth units per meter

    void validate() const;  // throws BadIntrinsics
};

// One posed RGB-D observation. Pose is camera-to-world in meters.
struct PosedFrame {
    int index = 0;
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    ImageU8 color;
    ImageU16 depth;

    Eigen::Vector3d camera_center() const { return pose.block<3, 1>(0, 3); }
};

// Rotation block orthonormal within tolerance and det(R) = +1.
bool is_rigid_pose(const Eigen::Matrix4d& pose, double tol = 1e-5);

// Pinhole back-projection of every stride-th pixel with positive depth into the
// world frame. Zero depth is the invalid sentinel. max_depth <= 0 disables the
// far cutoff.
PointCloud backproject(const PosedFrame& frame, const Intrinsics& intr, int stride = 1,
                       double max_depth = 0.0, bool with_color = false);

// World point -> pixel coordinates and camera-frame depth. Returns nullopt when
// the point is behind the camera.
struct Projection {
    double u = 0, v = 0;
    double depth = 0;  // meters along the camera z axis
};
std::optional<Projection> project(const Eigen::Vector3f& world, const Eigen::Matrix4d& pose,
                                  const Intrinsics& intr);

}  // namespace keysg
