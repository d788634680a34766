#include "keysg/objects.hpp"

#include <algorithm>
#include <cmath>

#include "keysg/errors.hpp"
#include "keysg/image.hpp"

namespace keysg {

std::string ObjectSegment::modal_label() const {
    std::string best;
    int best_count = -1;
    for (const auto& [label, count] : label_counts)
        if (count > best_count) {  // map iteration is sorted, ties keep the first
            best = label;
            best_count = count;
        }
    return best;
}

Eigen::Vector3f ObjectSegment::centroid() const {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (const auto& p : cloud.points) acc += p.cast<double>();
    if (!cloud.points.empty()) acc /= static_cast<double>(cloud.points.size());
    return acc.cast<float>();
}

PointCloud lift_mask(const PixelMask& mask, const PosedFrame& frame, const Intrinsics& intr) {
    if (frame.depth.width != intr.width || frame.depth.height != intr.height)
        throw Error(ErrorCode::InvalidArgument, "mask/depth dims mismatch");
    PointCloud cloud;
    const double s = 1.0 / intr.depth_scale;
    const Eigen::Matrix3d rot = frame.pose.block<3, 3>(0, 0);
    const Eigen::Vector3d trans = frame.pose.block<3, 1>(0, 3);
    const int v0 = std::max(0, mask.box.y0), v1 = std::min(intr.height, mask.box.y1);
    const int u0 = std::max(0, mask.box.x0), u1 = std::min(intr.width, mask.box.x1);
    for (int v = v0; v < v1; ++v) {
        for (int u = u0; u < u1; ++u) {
            if (!mask.at(u, v)) continue;
            const uint16_t raw = frame.depth.at(u, v);
            if (raw == 0) continue;
            const double d = raw * s;
            const Eigen::Vector3d cam((u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d);
            cloud.points.push_back((rot * cam + trans).cast<float>());
        }
    }
    if (cloud.empty()) throw Error(ErrorCode::EmptySegment, "no valid depth under mask");
    return cloud;
}

double overlap_ratio(const PointCloud& a, const PointCloud& b, double voxel) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySegment, "overlap of empty cloud");
    const VoxelSet va = to_voxels(a, voxel);
    const VoxelSet vb = to_voxels(b, voxel);
    const size_t inter = intersection_size(va, vb);
    return static_cast<double>(inter) / static_cast<double>(std::min(va.size(), vb.size()));
}

std::vector<ObjectSegment> merge_objects(const std::vector<SegmentObservation>& observations,
                                         const MergeParams& params) {
    if (params.threshold <= 0.0 || params.threshold > 1.0)
        throw Error(ErrorCode::InvalidArgument, "merge threshold must be in (0,1]");

    std::vector<SegmentObservation> ordered(observations);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const SegmentObservation& a, const SegmentObservation& b) {
                         return a.frame < b.frame;
                     });

    std::vector<ObjectSegment> objects;
    for (const auto& obs : ordered) {
        if (obs.cloud.empty()) continue;
        int best = -1;
        double best_overlap = 0.0;
        for (size_t i = 0; i < objects.size(); ++i) {
            const double ratio = overlap_ratio(objects[i].cloud, obs.cloud, params.voxel);
            if (ratio >= params.threshold && ratio > best_overlap) {
                best = static_cast<int>(i);
                best_overlap = ratio;
            }
        }
        if (best < 0) {
            objects.emplace_back();
            best = static_cast<int>(objects.size()) - 1;
        }
        ObjectSegment& target = objects[static_cast<size_t>(best)];
        target.cloud.append(obs.cloud);
        target.cloud = voxel_downsample(target.cloud, params.voxel);
        target.views.push_back(
            {obs.frame, obs.detection.mask, 0.0});  // scores assigned by the caller
        ++target.label_counts[obs.detection.label];
    }

    // Consolidate to a fixpoint: early sliver observations can seed objects
    // that later views grow into overlap with. At completion no two objects
    // may overlap at or above the threshold.
    for (;;) {
        int best_a = -1, best_b = -1;
        double best_overlap = 0.0;
        for (size_t a = 0; a < objects.size(); ++a)
            for (size_t b = a + 1; b < objects.size(); ++b) {
                const double ratio = overlap_ratio(objects[a].cloud, objects[b].cloud,
                                                   params.voxel);
                if (ratio >= params.threshold && ratio > best_overlap) {
                    best_a = static_cast<int>(a);
                    best_b = static_cast<int>(b);
                    best_overlap = ratio;
                }
            }
        if (best_a < 0) break;
        ObjectSegment& keep = objects[static_cast<size_t>(best_a)];
        ObjectSegment& absorb = objects[static_cast<size_t>(best_b)];
        keep.cloud.append(absorb.cloud);
        keep.cloud = voxel_downsample(keep.cloud, params.voxel);
        keep.views.insert(keep.views.end(), absorb.views.begin(), absorb.views.end());
        for (const auto& [label, count] : absorb.label_counts) keep.label_counts[label] += count;
        objects.erase(objects.begin() + best_b);
    }
    for (auto& object : objects)
        std::stable_sort(object.views.begin(), object.views.end(),
                         [](const ObjectView& a, const ObjectView& b) { return a.frame < b.frame; });
    return objects;
}

double score_view(const PixelMask& mask, int image_width, int image_height) {
    const size_t area = mask.count();
    if (area == 0) throw Error(ErrorCode::EmptyMask, "score_view on empty mask");
    // Centroid in continuous pixel coordinates (pixel centers at +0.5).
    double cx = 0.0, cy = 0.0;
    for (int v = mask.box.y0; v < mask.box.y1; ++v)
        for (int u = mask.box.x0; u < mask.box.x1; ++u)
            if (mask.at(u, v)) {
                cx += u + 0.5;
                cy += v + 0.5;
            }
    cx /= static_cast<double>(area);
    cy /= static_cast<double>(area);
    const double edge_dist =
        std::min(std::min(cx, static_cast<double>(image_width) - cx),
                 std::min(cy, static_cast<double>(image_height) - cy));
    const double boundary_factor =
        std::max(0.0, 2.0 * edge_dist / static_cast<double>(std::min(image_width, image_height)));
    const double area_factor =
        static_cast<double>(area) / (static_cast<double>(image_width) * image_height);
    return area_factor * boundary_factor;
}

void best_view(ObjectSegment& object, const std::vector<PosedFrame>& frames, Provider& provider) {
    if (object.views.empty()) throw Error(ErrorCode::InvalidArgument, "object has no views");
    for (auto& view : object.views) {
        const PosedFrame* vf = nullptr;
        for (const auto& f : frames)
            if (f.index == view.frame) {
                vf = &f;
                break;
            }
        if (!vf) throw Error(ErrorCode::InconsistentIds, "view frame not loaded");
        view.score = score_view(view.mask, vf->color.width, vf->color.height);
    }
    int best = 0;
    for (size_t i = 1; i < object.views.size(); ++i) {
        const auto& view = object.views[i];
        const auto& incumbent = object.views[static_cast<size_t>(best)];
        if (view.score > incumbent.score ||
            (view.score == incumbent.score && view.frame < incumbent.frame))
            best = static_cast<int>(i);
    }
    object.best_view_index = best;

    const ObjectView& view = object.views[static_cast<size_t>(best)];
    const PosedFrame* frame = nullptr;
    for (const auto& f : frames)
        if (f.index == view.frame) {
            frame = &f;
            break;
        }
    if (!frame) throw Error(ErrorCode::InconsistentIds, "best view frame not loaded");
    const ImageU8 cropped =
        crop(frame->color, view.mask.box.x0, view.mask.box.y0, view.mask.box.x1, view.mask.box.y1);
    object.embedding = provider.embed_image(cropped);
    object.has_embedding = true;
}

std::vector<FunctionalElement> segment_functional_elements(
    ObjectSegment& object, const std::vector<std::string>& functional_tags,
    const std::vector<PosedFrame>& frames, const Intrinsics& intr, Provider& provider) {
    if (object.best_view_index < 0)
        throw Error(ErrorCode::InvalidArgument, "object needs a best view first");
    if (functional_tags.empty()) return {};

    const ObjectView& view = object.views[static_cast<size_t>(object.best_view_index)];
    const PosedFrame* frame = nullptr;
    for (const auto& f : frames)
        if (f.index == view.frame) {
            frame = &f;
            break;
        }
    if (!frame) throw Error(ErrorCode::InconsistentIds, "best view frame not loaded");

    std::vector<FunctionalElement> elements;
    int next = 0;
    for (const auto& det : provider.detect(frame->color, functional_tags)) {
        // Only detections inside the object's own extent qualify as its parts.
        if (!view.mask.box.contains(det.box)) continue;
        FunctionalElement fe;
        fe.parent_id = object.id;
        fe.label = det.label;
        fe.source_frame = view.frame;
        fe.id = object.id + "_fe" + std::to_string(next);
        try {
            fe.cloud = lift_mask(det.mask, *frame, intr);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::EmptySegment) continue;  // logged by the caller
            throw;
        }
        ++next;
        elements.push_back(std::move(fe));
    }
    object.functional_elements = elements;
    return elements;
}

double visible_fraction(const PointCloud& cloud, const PosedFrame& keyframe,
                        const Intrinsics& intr, double depth_tol) {
    if (cloud.empty()) throw Error(ErrorCode::EmptySegment, "visible_fraction of empty cloud");
    if (depth_tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "depth_tol must be > 0");
    const double s = 1.0 / intr.depth_scale;
    size_t visible = 0;
    for (const auto& p : cloud.points) {
        const auto proj = project(p, keyframe.pose, intr);
        if (!proj) continue;  // behind the camera
        const int u = static_cast<int>(std::lround(proj->u));
        const int v = static_cast<int>(std::lround(proj->v));
        if (u < 0 || v < 0 || u >= intr.width || v >= intr.height) continue;
        const double stored = keyframe.depth.at(u, v) * s;
        // In front of the stored surface counts as visible: thin foreground
        // objects are often missing from the fused depth.
        if (proj->depth <= stored + depth_tol) ++visible;
    }
    return static_cast<double>(visible) / static_cast<double>(cloud.size());
}

std::vector<std::string> visible_objects(const PosedFrame& keyframe,
                                         const std::vector<ObjectSegment>& objects,
                                         const Intrinsics& intr, double theta_vis,
                                         double depth_tol) {
    if (theta_vis <= 0.0 || theta_vis > 1.0)
        throw Error(ErrorCode::InvalidArgument, "theta_vis must be in (0,1]");
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& object : objects) {
        if (object.cloud.empty()) continue;
        const double fraction = visible_fraction(object.cloud, keyframe, intr, depth_tol);
        if (fraction >= theta_vis) scored.emplace_back(fraction, object.id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    ids.reserve(scored.size());
    for (const auto& [fraction, id] : scored) ids.push_back(id);
    return ids;
}

}  // namespace keysg
