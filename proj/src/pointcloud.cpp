#include "keysg/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "keysg/errors.hpp"

namespace keysg {

void PointCloud::append(const PointCloud& other) {
    const bool keep_colors = (points.empty() || !colors.empty()) && !other.colors.empty();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (keep_colors) {
        colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    } else {
        colors.clear();
    }
}

VoxelKey voxel_key(const Eigen::Vector3f& p, double voxel_size) {
    return VoxelKey{
        static_cast<int32_t>(std::floor(static_cast<double>(p.x()) / voxel_size)),
        static_cast<int32_t>(std::floor(static_cast<double>(p.y()) / voxel_size)),
        static_cast<int32_t>(std::floor(static_cast<double>(p.z()) / voxel_size)),
    };
}

VoxelSet to_voxels(const PointCloud& cloud, double voxel_size) {
    if (voxel_size <= 0.0) throw Error(ErrorCode::InvalidArgument, "voxel_size must be > 0");
    VoxelSet set;
    set.voxel_size = voxel_size;
    set.keys.reserve(cloud.points.size());
    for (const auto& p : cloud.points) set.keys.insert(voxel_key(p, voxel_size));
    return set;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (voxel_size <= 0.0) throw Error(ErrorCode::InvalidArgument, "voxel_size must be > 0");
    struct Acc {
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        size_t count = 0;
    };
    std::unordered_map<VoxelKey, Acc, VoxelKeyHash> cells;
    cells.reserve(cloud.points.size());
    for (const auto& p : cloud.points) {
        Acc& a = cells[voxel_key(p, voxel_size)];
        a.sum += p.cast<double>();
        a.count += 1;
    }
    std::vector<std::pair<VoxelKey, Acc>> ordered(cells.begin(), cells.end());
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    PointCloud out;
    out.points.reserve(ordered.size());
    for (const auto& [key, acc] : ordered)
        out.points.push_back((acc.sum / static_cast<double>(acc.count)).cast<float>());
    return out;
}

size_t intersection_size(const VoxelSet& a, const VoxelSet& b) {
    const VoxelSet& small = a.size() <= b.size() ? a : b;
    const VoxelSet& large = a.size() <= b.size() ? b : a;
    size_t n = 0;
    for (const auto& k : small.keys)
        if (large.contains(k)) ++n;
    return n;
}

size_t union_size(const VoxelSet& a, const VoxelSet& b) {
    return a.size() + b.size() - intersection_size(a, b);
}

}  // namespace keysg
