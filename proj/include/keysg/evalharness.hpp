#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keysg/pointcloud.hpp"
#include "keysg/providers.hpp"

namespace keysg {

// |vox(a) & vox(b)| / |vox(a) | vox(b)|; both empty -> 0.
double iou3d(const PointCloud& a, const PointCloud& b, double voxel);

// "an image of {class}" prompt embeddings vs. object embeddings; argmax
// cosine, ties toward the first class in list order.
std::vector<std::string> classify_objects(const std::vector<Embedding>& object_embeddings,
                                          const std::vector<std::string>& class_names,
                                          Provider& provider);

struct SegMetrics {
    double mean_accuracy = 0.0;   // class-mean recall over gt classes
    double f_miou = 0.0;          // frequency-weighted mean IoU
    std::map<std::string, double> per_class_iou;
    std::map<std::string, double> per_class_recall;
};

// Aligned per-point labels; empty prediction strings count as wrong.
SegMetrics semantic_seg_metrics(const std::vector<std::string>& pred,
                                const std::vector<std::string>& gt);

// One candidate match for a ground-truth item: the rank of its label embedding
// against the gt class (1 = closest among the dataset labels) and its 3D IoU.
struct RankedCandidate {
    int label_rank = 0;
    double iou = 0.0;
};

// Rank of `pred_label` among `dataset_labels` by cosine similarity to the gt
// class embedding; ties resolve lexicographically.
int label_rank(const std::string& pred_label, const std::string& gt_class,
               const std::vector<std::string>& dataset_labels, Provider& provider);

// gt item is a hit when some candidate has label_rank <= k and iou >= threshold.
double recall_at_k(const std::vector<std::vector<RankedCandidate>>& candidates_per_gt, int k,
                   double iou_threshold);

struct GroundingQuery {
    std::string query;
    std::map<std::string, bool> flags;  // e.g. "spatial" -> true
    double iou = 0.0;                   // predicted-vs-gt segment IoU
};

struct GroundingReport {
    double overall = 0.0;
    // flag name -> (accuracy with flag, accuracy without flag)
    std::map<std::string, std::pair<double, double>> by_flag;
    size_t total = 0;
    size_t correct = 0;
};

GroundingReport grounding_accuracy(const std::vector<GroundingQuery>& queries,
                                   double iou_threshold);

}  // namespace keysg
