#include "keysg/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "keysg/errors.hpp"
#include "keysg/parallel.hpp"

namespace fs = std::filesystem;

namespace keysg {

namespace {

std::string frame_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d%s", index, ext);
    return buf;
}

Eigen::Matrix4d read_pose_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (!(in >> m(r, c)))
                throw Error(ErrorCode::BadPose, "pose file truncated: " + path.string());
    return m;
}

int count_frames(const fs::path& dir, const char* ext) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "missing directory " + dir.string());
    int n = 0;
    while (fs::exists(dir / frame_name(n, ext))) ++n;
    return n;
}

}  // namespace

Sequence load_sequence(const std::string& root_path) {
    const fs::path root(root_path);
    const fs::path intr_path = root / "intrinsics.txt";
    std::ifstream in(intr_path);
    if (!in) throw Error(ErrorCode::MissingFile, "missing " + intr_path.string());

    Sequence seq;
    Intrinsics& intr = seq.intrinsics;
    if (!(in >> intr.fx >> intr.fy >> intr.cx >> intr.cy >> intr.width >> intr.height >>
          intr.depth_scale))
        throw Error(ErrorCode::BadIntrinsics, "malformed " + intr_path.string());
    intr.validate();

    const int n_color = count_frames(root / "color", ".png");
    const int n_depth = count_frames(root / "depth", ".png");
    const int n_pose = count_frames(root / "poses", ".txt");
    if (n_color == 0 || n_color != n_depth || n_color != n_pose)
        throw Error(ErrorCode::MissingFile,
                    "frame streams disagree: color=" + std::to_string(n_color) +
                        " depth=" + std::to_string(n_depth) + " poses=" + std::to_string(n_pose));

    seq.frames.resize(static_cast<size_t>(n_color));
    for (int i = 0; i < n_color; ++i) {
        PosedFrame& frame = seq.frames[static_cast<size_t>(i)];
        frame.index = i;
        frame.color = read_png_rgb8((root / "color" / frame_name(i, ".png")).string());
        frame.depth = read_png_gray16((root / "depth" / frame_name(i, ".png")).string());
        frame.pose = read_pose_file(root / "poses" / frame_name(i, ".txt"));
        if (frame.depth.width != intr.width || frame.depth.height != intr.height)
            throw Error(ErrorCode::BadIntrinsics,
                        "depth dims mismatch at frame " + std::to_string(i));
        if (frame.color.width != intr.width || frame.color.height != intr.height)
            throw Error(ErrorCode::BadIntrinsics,
                        "color dims mismatch at frame " + std::to_string(i));
        if (!is_rigid_pose(frame.pose))
            throw Error(ErrorCode::BadPose, "non-rigid pose at frame " + std::to_string(i));
    }
    return seq;
}

PointCloud fuse_scene(const std::vector<PosedFrame>& frames, const Intrinsics& intr,
                      double voxel_size, int stride, double max_depth, int jobs) {
    if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "fuse_scene needs >= 1 frame");
    std::vector<PointCloud> partial(frames.size());
    parallel_for(frames.size(), jobs, [&](size_t i) {
        partial[i] = backproject(frames[i], intr, stride, max_depth);
    });
    PointCloud merged;
    for (const auto& cloud : partial) merged.append(cloud);
    if (merged.empty()) throw Error(ErrorCode::EmptyScene, "no valid depth in any frame");
    return voxel_downsample(merged, voxel_size);
}

}  // namespace keysg
