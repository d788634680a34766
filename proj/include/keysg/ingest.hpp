#pragma once

#include <string>
#include <vector>

#include "keysg/camera.hpp"
#include "keysg/pointcloud.hpp"

namespace keysg {

struct Sequence {
    Intrinsics intrinsics;
    std::vector<PosedFrame> frames;  // sorted by index
};

// Input layout under <root>:
//   intrinsics.txt          "fx fy cx cy width height depth_scale"
//   color/%06d.png          8-bit RGB
//   depth/%06d.png          16-bit grayscale, raw units
//   poses/%06d.txt          4x4 camera-to-world, row-major
Sequence load_sequence(const std::string& root_path);

// Union of per-frame back-projections, voxel-downsampled to one centroid per
// occupied voxel. Frame order does not affect the result.
PointCloud fuse_scene(const std::vector<PosedFrame>& frames, const Intrinsics& intr,
                      double voxel_size, int stride = 4, double max_depth = 0.0, int jobs = 1);

}  // namespace keysg
