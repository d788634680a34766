#include "keysg/keyframes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "keysg/errors.hpp"

namespace keysg {

std::vector<RoomFrameSets> assign_frames(const std::vector<PosedFrame>& frames,
                                         const std::vector<RoomRegion>& rooms,
                                         const std::vector<FloorSlab>& floors) {
    std::vector<RoomFrameSets> sets(rooms.size());
    for (const auto& frame : frames) {
        const Eigen::Vector3d center = frame.camera_center();
        for (size_t r = 0; r < rooms.size(); ++r) {
            const FloorSlab& floor = floors.at(static_cast<size_t>(rooms[r].floor_index));
            if (room_volume_test(center, rooms[r], floor)) {
                sets[r].dense.push_back(frame.index);
                break;  // rooms are disjoint
            }
        }
    }
    return sets;
}

std::vector<int> filter_by_projection(const std::vector<int>& dense,
                                      const std::vector<PosedFrame>& frames,
                                      const RoomRegion& room, const Intrinsics& intr, double eta,
                                      int stride) {
    if (eta < 0.0 || eta > 1.0) throw Error(ErrorCode::InvalidArgument, "eta must be in [0,1]");
    std::vector<int> kept;
    for (int idx : dense) {
        const PosedFrame& frame = frames.at(static_cast<size_t>(idx));
        const PointCloud cloud = backproject(frame, intr, stride);
        if (cloud.empty()) continue;
        size_t inside = 0;
        for (const auto& p : cloud.points)
            if (point_in_polygon({p.x(), p.y()}, room.polygon)) ++inside;
        if (static_cast<double>(inside) / static_cast<double>(cloud.size()) >= eta)
            kept.push_back(idx);
    }
    return kept;
}

PoseFeature pose_features(const Eigen::Matrix4d& pose, int frame_index, double rotation_weight) {
    if (!is_rigid_pose(pose)) throw Error(ErrorCode::BadPose, "pose_features on non-rigid pose");
    if (rotation_weight < 0.0) throw Error(ErrorCode::InvalidArgument, "w must be >= 0");
    const Eigen::Matrix3d rot = pose.block<3, 3>(0, 0);
    Eigen::Quaterniond q(rot);
    // Canonical sign: scalar component >= 0; if zero, the first nonzero
    // component of (x,y,z) is made positive. The double cover q == -q would
    // otherwise split identical orientations apart in feature space.
    double flip = 1.0;
    if (q.w() < 0.0) {
        flip = -1.0;
    } else if (q.w() == 0.0) {
        const double comps[3] = {q.x(), q.y(), q.z()};
        for (double c : comps) {
            if (c != 0.0) {
                flip = c > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
    }
    PoseFeature f;
    f.frame = frame_index;
    f.rotation_weight = rotation_weight;
    f.vector.head<3>() = pose.block<3, 1>(0, 3);
    f.vector[3] = rotation_weight * flip * q.w();
    f.vector[4] = rotation_weight * flip * q.x();
    f.vector[5] = rotation_weight * flip * q.y();
    f.vector[6] = rotation_weight * flip * q.z();
    return f;
}

StandardizedFeatures standardize(const std::vector<PoseFeature>& features) {
    if (features.empty()) throw Error(ErrorCode::InvalidArgument, "standardize needs >= 1 feature");
    StandardizedFeatures out;
    const double n = static_cast<double>(features.size());
    for (const auto& f : features) out.mean += f.vector;
    out.mean /= n;
    Eigen::Matrix<double, 7, 1> var = Eigen::Matrix<double, 7, 1>::Zero();
    for (const auto& f : features) {
        const Eigen::Matrix<double, 7, 1> d = f.vector - out.mean;
        var += d.cwiseProduct(d);
    }
    var /= n;  // population variance
    for (int i = 0; i < 7; ++i) {
        const double s = std::sqrt(var[i]);
        out.std_dev[i] = s < 1e-12 ? 1.0 : s;
    }
    out.rows.reserve(features.size());
    out.frames.reserve(features.size());
    for (const auto& f : features) {
        out.rows.push_back((f.vector - out.mean).cwiseQuotient(out.std_dev));
        out.frames.push_back(f.frame);
    }
    return out;
}

ClusterSet dbscan(const StandardizedFeatures& features, double eps, int min_pts) {
    if (eps <= 0.0) throw Error(ErrorCode::InvalidArgument, "eps must be > 0");
    if (min_pts < 1) throw Error(ErrorCode::InvalidArgument, "min_pts must be >= 1");
    const size_t n = features.rows.size();
    ClusterSet out;
    out.eps = eps;
    out.min_pts = min_pts;

    const double eps_sq = eps * eps;
    auto neighbors_of = [&](size_t i) {
        std::vector<size_t> nb;
        for (size_t j = 0; j < n; ++j)
            if ((features.rows[i] - features.rows[j]).squaredNorm() <= eps_sq) nb.push_back(j);
        return nb;  // includes i itself
    };

    constexpr int kUnvisited = -2, kNoise = -1;
    std::vector<int> assignment(n, kUnvisited);
    for (size_t i = 0; i < n; ++i) {
        if (assignment[i] != kUnvisited) continue;
        auto nb = neighbors_of(i);
        if (nb.size() < static_cast<size_t>(min_pts)) {
            assignment[i] = kNoise;
            continue;
        }
        const int cluster_id = static_cast<int>(out.clusters.size());
        out.clusters.emplace_back();
        assignment[i] = cluster_id;
        std::vector<size_t> frontier(nb.begin(), nb.end());
        for (size_t fi = 0; fi < frontier.size(); ++fi) {
            const size_t j = frontier[fi];
            if (assignment[j] == kNoise) assignment[j] = cluster_id;  // border point
            if (assignment[j] != kUnvisited) continue;
            assignment[j] = cluster_id;
            auto nb_j = neighbors_of(j);
            if (nb_j.size() >= static_cast<size_t>(min_pts))
                frontier.insert(frontier.end(), nb_j.begin(), nb_j.end());
        }
    }
    for (size_t i = 0; i < n; ++i) {
        if (assignment[i] == kNoise)
            out.noise.push_back(static_cast<int>(i));
        else
            out.clusters[static_cast<size_t>(assignment[i])].push_back(static_cast<int>(i));
    }
    return out;
}

int medoid(const std::vector<int>& cluster, const StandardizedFeatures& features) {
    if (cluster.empty()) throw Error(ErrorCode::InvalidArgument, "medoid of empty cluster");
    int best = -1;
    double best_sum = 0.0;
    int best_frame = 0;
    for (int candidate : cluster) {
        double sum = 0.0;
        for (int other : cluster)
            sum += (features.rows[static_cast<size_t>(candidate)] -
                    features.rows[static_cast<size_t>(other)])
                       .norm();
        const int frame = features.frames[static_cast<size_t>(candidate)];
        if (best < 0 || sum < best_sum || (sum == best_sum && frame < best_frame)) {
            best = candidate;
            best_sum = sum;
            best_frame = frame;
        }
    }
    return best;
}

std::vector<int> select_keyframes(const std::vector<int>& dense,
                                  const std::vector<PosedFrame>& frames,
                                  const KeyframeParams& params) {
    if (dense.empty()) throw Error(ErrorCode::EmptyRoom, "no frames survive filtering");
    std::vector<PoseFeature> feats;
    feats.reserve(dense.size());
    for (int idx : dense)
        feats.push_back(pose_features(frames.at(static_cast<size_t>(idx)).pose, idx,
                                      params.rotation_weight));
    const StandardizedFeatures standardized = standardize(feats);
    const ClusterSet clusters = dbscan(standardized, params.eps, params.min_pts);

    std::vector<int> selected;
    for (const auto& cluster : clusters.clusters)
        selected.push_back(standardized.frames[static_cast<size_t>(medoid(cluster, standardized))]);
    for (int idx : clusters.noise)
        selected.push_back(standardized.frames[static_cast<size_t>(idx)]);
    std::sort(selected.begin(), selected.end());
    return selected;
}

double coverage(const std::vector<int>& keyframes, const std::vector<int>& dense,
                const std::vector<PosedFrame>& frames, const Intrinsics& intr,
                double voxel_size) {
    if (voxel_size <= 0.0) throw Error(ErrorCode::InvalidArgument, "voxel_size must be > 0");
    if (dense.empty()) throw Error(ErrorCode::EmptyRoom, "coverage over empty dense set");

    VoxelSet dense_voxels;
    dense_voxels.voxel_size = voxel_size;
    for (int idx : dense) {
        const PointCloud cloud = backproject(frames.at(static_cast<size_t>(idx)), intr, 1);
        for (const auto& p : cloud.points) dense_voxels.keys.insert(voxel_key(p, voxel_size));
    }
    if (dense_voxels.empty()) throw Error(ErrorCode::EmptyRoom, "dense set has no valid depth");

    VoxelSet key_voxels;
    key_voxels.voxel_size = voxel_size;
    for (int idx : keyframes) {
        const PointCloud cloud = backproject(frames.at(static_cast<size_t>(idx)), intr, 1);
        for (const auto& p : cloud.points) key_voxels.keys.insert(voxel_key(p, voxel_size));
    }
    return static_cast<double>(intersection_size(key_voxels, dense_voxels)) /
           static_cast<double>(dense_voxels.size());
}

}  // namespace keysg
