#include "keysg/evalharness.hpp"

#include <algorithm>
#include <set>

#include "keysg/errors.hpp"

namespace keysg {

double iou3d(const PointCloud& a, const PointCloud& b, double voxel) {
    if (voxel <= 0.0) throw Error(ErrorCode::InvalidArgument, "voxel must be > 0");
    if (a.empty() && b.empty()) return 0.0;
    const VoxelSet va = to_voxels(a, voxel);
    const VoxelSet vb = to_voxels(b, voxel);
    const size_t inter = intersection_size(va, vb);
    const size_t uni = va.size() + vb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::string> classify_objects(const std::vector<Embedding>& object_embeddings,
                                          const std::vector<std::string>& class_names,
                                          Provider& provider) {
    if (class_names.empty()) throw Error(ErrorCode::InvalidArgument, "no class names");
    std::vector<Embedding> class_embeddings;
    class_embeddings.reserve(class_names.size());
    for (const auto& name : class_names)
        class_embeddings.push_back(provider.embed_text("an image of " + name));

    std::vector<std::string> out;
    out.reserve(object_embeddings.size());
    for (const auto& embedding : object_embeddings) {
        int best = 0;
        double best_score = embedding.dot(class_embeddings[0]);
        for (size_t c = 1; c < class_embeddings.size(); ++c) {
            const double score = embedding.dot(class_embeddings[c]);
            if (score > best_score) {  // ties keep the first class in list order
                best = static_cast<int>(c);
                best_score = score;
            }
        }
        out.push_back(class_names[static_cast<size_t>(best)]);
    }
    return out;
}

SegMetrics semantic_seg_metrics(const std::vector<std::string>& pred,
                                const std::vector<std::string>& gt) {
    if (gt.empty()) throw Error(ErrorCode::EmptyGT, "no ground-truth points");
    if (pred.size() != gt.size())
        throw Error(ErrorCode::InvalidArgument, "pred/gt must be aligned");

    std::set<std::string> gt_classes(gt.begin(), gt.end());
    std::map<std::string, size_t> tp, fp, fn, gt_count;
    for (size_t i = 0; i < gt.size(); ++i) {
        ++gt_count[gt[i]];
        if (pred[i] == gt[i]) {
            ++tp[gt[i]];
        } else {
            ++fn[gt[i]];
            if (!pred[i].empty()) ++fp[pred[i]];  // missing predictions are only wrong
        }
    }

    SegMetrics metrics;
    double recall_sum = 0.0;
    for (const auto& cls : gt_classes) {
        const double recall =
            static_cast<double>(tp[cls]) / static_cast<double>(gt_count[cls]);
        metrics.per_class_recall[cls] = recall;
        recall_sum += recall;
        const double denom = static_cast<double>(tp[cls] + fp[cls] + fn[cls]);
        metrics.per_class_iou[cls] =
            denom == 0.0 ? 0.0 : static_cast<double>(tp[cls]) / denom;
    }
    metrics.mean_accuracy = recall_sum / static_cast<double>(gt_classes.size());
    for (const auto& cls : gt_classes) {
        const double freq =
            static_cast<double>(gt_count[cls]) / static_cast<double>(gt.size());
        metrics.f_miou += freq * metrics.per_class_iou[cls];
    }
    return metrics;
}

int label_rank(const std::string& pred_label, const std::string& gt_class,
               const std::vector<std::string>& dataset_labels, Provider& provider) {
    const Embedding gt_embedding = provider.embed_text(gt_class);
    const double pred_score = provider.embed_text(pred_label).dot(gt_embedding);
    int rank = 1;
    for (const auto& label : dataset_labels) {
        if (label == pred_label) continue;
        const double score = provider.embed_text(label).dot(gt_embedding);
        if (score > pred_score || (score == pred_score && label < pred_label)) ++rank;
    }
    return rank;
}

double recall_at_k(const std::vector<std::vector<RankedCandidate>>& candidates_per_gt, int k,
                   double iou_threshold) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (candidates_per_gt.empty()) throw Error(ErrorCode::EmptyGT, "no ground-truth items");
    size_t hits = 0;
    for (const auto& candidates : candidates_per_gt) {
        for (const auto& candidate : candidates) {
            if (candidate.label_rank <= k && candidate.iou >= iou_threshold) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(candidates_per_gt.size());
}

GroundingReport grounding_accuracy(const std::vector<GroundingQuery>& queries,
                                   double iou_threshold) {
    if (queries.empty()) throw Error(ErrorCode::EmptyGT, "no queries");
    GroundingReport report;
    report.total = queries.size();
    std::set<std::string> flag_names;
    for (const auto& query : queries)
        for (const auto& [flag, value] : query.flags) flag_names.insert(flag);

    for (const auto& query : queries)
        if (query.iou >= iou_threshold) ++report.correct;
    report.overall = static_cast<double>(report.correct) / static_cast<double>(report.total);

    for (const auto& flag : flag_names) {
        size_t with_total = 0, with_hit = 0, without_total = 0, without_hit = 0;
        for (const auto& query : queries) {
            const auto it = query.flags.find(flag);
            const bool has = it != query.flags.end() && it->second;
            const bool hit = query.iou >= iou_threshold;
            if (has) {
                ++with_total;
                with_hit += hit;
            } else {
                ++without_total;
                without_hit += hit;
            }
        }
        report.by_flag[flag] = {
            with_total == 0 ? 0.0 : static_cast<double>(with_hit) / with_total,
            without_total == 0 ? 0.0 : static_cast<double>(without_hit) / without_total};
    }
    return report;
}

}  // namespace keysg
