#include "keysg/summaries.hpp"

#include <map>

#include "keysg/errors.hpp"
#include "keysg/parallel.hpp"

namespace keysg {

std::vector<int> describe_keyframes(std::vector<KeyframeRecord>& keyframes,
                                    const std::vector<ObjectSegment>& objects,
                                    const std::vector<PosedFrame>& frames,
                                    const Intrinsics& intr, Provider& provider,
                                    const SummaryParams& params, int jobs) {
    std::map<std::string, std::string> label_of;
    for (const auto& object : objects) label_of[object.id] = object.modal_label();
    std::map<int, const PosedFrame*> frame_of;
    for (const auto& frame : frames) frame_of[frame.index] = &frame;

    std::vector<int> skipped(keyframes.size(), 0);
    parallel_for(keyframes.size(), jobs, [&](size_t i) {
        KeyframeRecord& record = keyframes[i];
        auto it = frame_of.find(record.frame);
        if (it == frame_of.end())
            throw Error(ErrorCode::InconsistentIds,
                        "keyframe " + std::to_string(record.frame) + " not loaded");
        const PosedFrame& frame = *it->second;
        std::vector<std::string> labels;
        for (const auto& id :
             visible_objects(frame, objects, intr, params.theta_vis, params.depth_tol))
            labels.push_back(label_of.at(id));
        try {
            record.description = provider.describe_frame(frame.color, labels);
        } catch (const ProviderError&) {
            skipped[i] = 1;
        }
    });
    std::vector<int> failed;
    for (size_t i = 0; i < keyframes.size(); ++i)
        if (skipped[i]) failed.push_back(keyframes[i].frame);
    return failed;
}

std::string summarize_texts(const std::vector<std::string>& texts, SummaryLevel level,
                            Provider& provider, int chunk_size) {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "summarize_texts needs >= 1 text");
    if (chunk_size < 2) chunk_size = 2;
    if (static_cast<int>(texts.size()) <= chunk_size) return provider.summarize(texts, level);
    // Map: summarize each chunk; reduce: summarize the partial summaries.
    std::vector<std::string> partials;
    for (size_t start = 0; start < texts.size(); start += static_cast<size_t>(chunk_size)) {
        const size_t end = std::min(texts.size(), start + static_cast<size_t>(chunk_size));
        partials.push_back(
            provider.summarize({texts.begin() + static_cast<long>(start),
                                texts.begin() + static_cast<long>(end)},
                               level));
    }
    return summarize_texts(partials, level, provider, chunk_size);
}

std::string summarize_room(const std::vector<std::string>& descriptions, Provider& provider,
                           int chunk_size) {
    if (descriptions.empty()) return kUnobservedRoom;
    return summarize_texts(descriptions, SummaryLevel::Room, provider, chunk_size);
}

std::string summarize_floor(const std::vector<std::string>& room_summaries, Provider& provider,
                            int chunk_size) {
    if (room_summaries.empty())
        throw Error(ErrorCode::InvalidArgument, "summarize_floor needs >= 1 room");
    return summarize_texts(room_summaries, SummaryLevel::Floor, provider, chunk_size);
}

}  // namespace keysg
