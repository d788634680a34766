#pragma once

#include <string>
#include <vector>

#include "keysg/objects.hpp"
#include "keysg/providers.hpp"
#include "keysg/scene_graph.hpp"

namespace keysg {

struct SummaryParams {
    double theta_vis = 0.25;
    double depth_tol = 0.08;
    int chunk_size = 20;  // map-reduce width for long description lists
};

// Fills each keyframe record's description with the provider's grounded text:
// the label list passed to describe_frame is exactly the visible-object set of
// that keyframe, ordered by descending visible fraction. Frames whose provider
// call fails are skipped and reported in the returned list.
std::vector<int> describe_keyframes(std::vector<KeyframeRecord>& keyframes,
                                    const std::vector<ObjectSegment>& objects,
                                    const std::vector<PosedFrame>& frames,
                                    const Intrinsics& intr, Provider& provider,
                                    const SummaryParams& params, int jobs = 1);

// Bottom-up aggregation, one pass. Lists longer than chunk_size are summarized
// map-then-reduce. Rooms with no descriptions get the sentinel text.
inline constexpr const char* kUnobservedRoom = "unobserved room";

std::string summarize_texts(const std::vector<std::string>& texts, SummaryLevel level,
                            Provider& provider, int chunk_size);
std::string summarize_room(const std::vector<std::string>& descriptions, Provider& provider,
                           int chunk_size = 20);
std::string summarize_floor(const std::vector<std::string>& room_summaries, Provider& provider,
                            int chunk_size = 20);

}  // namespace keysg
