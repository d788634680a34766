#include "keysg/camera.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "keysg/errors.hpp"

namespace keysg {

void Intrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw Error(ErrorCode::BadIntrinsics, "focal lengths must be > 0");
    if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
        throw Error(ErrorCode::BadIntrinsics, "principal point outside image");
    if (!(depth_scale > 0)) throw Error(ErrorCode::BadIntrinsics, "depth_scale must be > 0");
}

bool is_rigid_pose(const Eigen::Matrix4d& pose, double tol) {
    const Eigen::Matrix3d r = pose.block<3, 3>(0, 0);
    const Eigen::Matrix3d err = r * r.transpose() - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() >= tol) return false;
    if (r.determinant() <= 0.0) return false;
    const Eigen::RowVector4d bottom = pose.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() >= tol) return false;
    return true;
}

PointCloud backproject(const PosedFrame& frame, const Intrinsics& intr, int stride,
                       double max_depth, bool with_color) {
    if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
    PointCloud cloud;
    const double s = 1.0 / intr.depth_scale;
    const Eigen::Matrix3d rot = frame.pose.block<3, 3>(0, 0);
    const Eigen::Vector3d trans = frame.pose.block<3, 1>(0, 3);
    const bool colored = with_color && !frame.color.empty() &&
                         frame.color.width == frame.depth.width &&
                         frame.color.height == frame.depth.height;
    for (int v = 0; v < frame.depth.height; v += stride) {
        for (int u = 0; u < frame.depth.width; u += stride) {
            const uint16_t raw = frame.depth.at(u, v);
            if (raw == 0) continue;
            const double d = raw * s;
            if (max_depth > 0.0 && d > max_depth) continue;
            const Eigen::Vector3d cam((u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d);
            cloud.points.push_back((rot * cam + trans).cast<float>());
            if (colored) {
                const uint8_t* px = frame.color.pixel(u, v);
                cloud.colors.push_back({px[0], px[1], px[2]});
            }
        }
    }
    return cloud;
}

std::optional<Projection> project(const Eigen::Vector3f& world, const Eigen::Matrix4d& pose,
                                  const Intrinsics& intr) {
    const Eigen::Matrix3d rot = pose.block<3, 3>(0, 0);
    const Eigen::Vector3d trans = pose.block<3, 1>(0, 3);
    const Eigen::Vector3d cam = rot.transpose() * (world.cast<double>() - trans);
    if (cam.z() <= 0.0) return std::nullopt;
    Projection p;
    p.u = cam.x() / cam.z() * intr.fx + intr.cx;
    p.v = cam.y() / cam.z() * intr.fy + intr.cy;
    p.depth = cam.z();
    return p;
}

}  // namespace keysg
