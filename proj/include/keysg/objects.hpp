#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "keysg/camera.hpp"
#include "keysg/pointcloud.hpp"
#include "keysg/providers.hpp"

namespace keysg {

struct ObjectView {
    int frame = 0;
    PixelMask mask;
    double score = 0.0;
};

struct FunctionalElement {
    std::string id;
    std::string parent_id;
    std::string label;
    PointCloud cloud;
    int source_frame = 0;
};

// One merged 3D object instance with its 2D evidence.
struct ObjectSegment {
    std::string id;
    std::string room_id;
    PointCloud cloud;  // world frame, voxel-deduplicated
    std::vector<ObjectView> views;
    std::map<std::string, int> label_counts;  // detection label multiset
    int best_view_index = -1;                 // into views, set by best_view
    Embedding embedding;                      // best-view image embedding
    bool has_embedding = false;
    std::vector<FunctionalElement> functional_elements;

    // Modal detection label; ties break lexicographically.
    std::string modal_label() const;
    Eigen::Vector3f centroid() const;
};

struct MergeParams {
    double threshold = 0.3;  // min overlap_ratio to merge
    double voxel = 0.05;     // dedup voxel for merged clouds
};

// Back-projects exactly the masked pixels with valid depth.
PointCloud lift_mask(const PixelMask& mask, const PosedFrame& frame, const Intrinsics& intr);

// |vox(a) & vox(b)| / min(|vox(a)|, |vox(b)|).
double overlap_ratio(const PointCloud& a, const PointCloud& b, double voxel);

// One lifted detection ready for merging.
struct SegmentObservation {
    int frame = 0;
    Detection detection;
    PointCloud cloud;
};

// Incremental frame-order merge: each observation joins the existing object
// with the highest overlap at or above the threshold (ties toward the lowest
// object index), otherwise founds a new object. Serialized by specification.
std::vector<ObjectSegment> merge_objects(const std::vector<SegmentObservation>& observations,
                                         const MergeParams& params);

// (mask area / image area) * (2 * centroid distance to nearest image border /
// min(width, height)); centroid at the image center scores boundary factor 1,
// on an edge 0.
double score_view(const PixelMask& mask, int image_width, int image_height);

// Picks the argmax-score view (ties toward the earliest frame), embeds the
// mask-cropped region via the provider, stores the result on the object.
void best_view(ObjectSegment& object, const std::vector<PosedFrame>& frames, Provider& provider);

// Runs detect on the best view restricted to the object's mask bounding box
// with the room's functional-element vocabulary and lifts each hit.
std::vector<FunctionalElement> segment_functional_elements(
    ObjectSegment& object, const std::vector<std::string>& functional_tags,
    const std::vector<PosedFrame>& frames, const Intrinsics& intr, Provider& provider);

// Fraction of object points that project into the keyframe and pass the
// depth-map occlusion check (visible when at or in front of the stored
// surface within depth_tol).
double visible_fraction(const PointCloud& cloud, const PosedFrame& keyframe,
                        const Intrinsics& intr, double depth_tol);

// Object ids whose visible fraction reaches theta_vis, ordered by descending
// fraction (ties by id).
std::vector<std::string> visible_objects(const PosedFrame& keyframe,
                                         const std::vector<ObjectSegment>& objects,
                                         const Intrinsics& intr, double theta_vis,
                                         double depth_tol);

}  // namespace keysg
