#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

namespace keysg {

// World-frame point set, meters. Color is optional and parallel to points.
struct PointCloud {
    std::vector<Eigen::Vector3f> points;
    std::vector<std::array<uint8_t, 3>> colors;  // empty or same size as points

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    void append(const PointCloud& other);
};

// Integer voxel index. The origin is fixed at (0,0,0) for every voxelization so
// that sets produced from different clouds intersect meaningfully.
struct VoxelKey {
    int32_t x = 0, y = 0, z = 0;

    bool operator==(const VoxelKey&) const = default;
    bool operator<(const VoxelKey& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }
};

struct VoxelKeyHash {
    size_t operator()(const VoxelKey& k) const {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&h](uint32_t v) {
            for (int i = 0; i < 4; ++i) {
                h ^= (v >> (i * 8)) & 0xffu;
                h *= 1099511628211ull;
            }
        };
        mix(static_cast<uint32_t>(k.x));
        mix(static_cast<uint32_t>(k.y));
        mix(static_cast<uint32_t>(k.z));
        return static_cast<size_t>(h);
    }
};

struct VoxelSet {
    double voxel_size = 0.0;
    std::unordered_set<VoxelKey, VoxelKeyHash> keys;

    size_t size() const { return keys.size(); }
    bool empty() const { return keys.empty(); }
    bool contains(const VoxelKey& k) const { return keys.count(k) != 0; }
};

VoxelKey voxel_key(const Eigen::Vector3f& p, double voxel_size);

// key(p) = floor(p / voxel_size) per axis, shared origin (0,0,0).
VoxelSet to_voxels(const PointCloud& cloud, double voxel_size);

// One representative point per occupied voxel: the centroid of its members.
// Output sorted by voxel key, so the result is independent of input order.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

size_t intersection_size(const VoxelSet& a, const VoxelSet& b);
size_t union_size(const VoxelSet& a, const VoxelSet& b);

}  // namespace keysg
