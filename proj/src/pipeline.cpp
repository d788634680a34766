#include "keysg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "keysg/errors.hpp"
#include "keysg/ingest.hpp"
#include "keysg/parallel.hpp"
#include "keysg/summaries.hpp"

namespace fs = std::filesystem;

namespace keysg {

namespace {

// Counts every call that reaches the wrapped provider, for the build log.
class CountingProvider : public Provider {
public:
    explicit CountingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}
    std::atomic<size_t> calls{0};

    std::string name() const override { return inner_->name(); }
    TagResult tag_frame(const ImageU8& i) override { ++calls; return inner_->tag_frame(i); }
    std::vector<Detection> detect(const ImageU8& i, const std::vector<std::string>& v) override {
        ++calls;
        return inner_->detect(i, v);
    }
    Embedding embed_text(const std::string& t) override { ++calls; return inner_->embed_text(t); }
    Embedding embed_image(const ImageU8& i) override { ++calls; return inner_->embed_image(i); }
    std::string describe_frame(const ImageU8& i, const std::vector<std::string>& l) override {
        ++calls;
        return inner_->describe_frame(i, l);
    }
    std::string summarize(const std::vector<std::string>& t, SummaryLevel l) override {
        ++calls;
        return inner_->summarize(t, l);
    }
    ParsedQuery parse_query(const std::string& q) override {
        ++calls;
        return inner_->parse_query(q);
    }
    HierQuery decompose_hierarchical(const std::string& q) override {
        ++calls;
        return inner_->decompose_hierarchical(q);
    }
    std::string generate_answer(const std::string& q,
                                const std::vector<ContextItem>& c) override {
        ++calls;
        return inner_->generate_answer(q, c);
    }

private:
    std::shared_ptr<Provider> inner_;
};

class StageTimer {
public:
    explicit StageTimer(std::vector<std::string>& log) : log_(log) {}

    template <typename Fn>
    auto run(const std::string& stage, Fn&& fn) -> decltype(fn()) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(stage, start);
        } else {
            auto result = fn();
            record(stage, start);
            return result;
        }
    }

    void note(const std::string& stage, const std::string& message) {
        log_.push_back("[" + stage + "] " + message);
    }

private:
    void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        log_.push_back("[" + stage + "] ms=" + std::to_string(ms));
    }

    std::vector<std::string>& log_;
};

std::string frame_rel(int index, const char* kind) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%s/%06d.png", kind, index);
    return buf;
}

std::vector<std::string> sorted_union(const std::vector<std::vector<std::string>>& lists) {
    std::set<std::string> acc;
    for (const auto& list : lists) acc.insert(list.begin(), list.end());
    return {acc.begin(), acc.end()};
}

}  // namespace

std::shared_ptr<Provider> make_provider(const BuildOptions& options) {
    const char* env_mock = std::getenv("KEYSG_MOCK");
    const bool mock = options.mock || (env_mock && std::string(env_mock) == "1");

    std::shared_ptr<Provider> base;
    if (mock) {
        std::string fixtures = options.mock_fixtures;
        if (fixtures.empty()) {
            const fs::path candidate = fs::path(options.input_dir) / "mock_fixtures.json";
            if (fs::exists(candidate)) fixtures = candidate.string();
        }
        base = fixtures.empty() ? std::make_shared<MockProvider>()
                                : std::make_shared<MockProvider>(fixtures);
    } else {
        std::string toml = options.providers_toml;
        if (toml.empty()) {
            for (const fs::path candidate :
                 {fs::path(options.input_dir) / "providers.toml", fs::path("providers.toml")})
                if (fs::exists(candidate)) {
                    toml = candidate.string();
                    break;
                }
        }
        if (toml.empty())
            throw Error(ErrorCode::MissingFile,
                        "providers.toml required for live providers (or pass --mock)");
        base = std::make_shared<HttpProvider>(load_provider_config(toml));
    }

    std::string cache = options.cache_dir;
    if (const char* env_cache = std::getenv("KEYSG_CACHE_DIR")) cache = env_cache;
    if (cache.empty()) cache = (fs::path(options.out_dir) / "cache").string();
    return std::make_shared<CachingProvider>(std::move(base), cache);
}

BuildResult build_scene(const BuildOptions& options) {
    BuildResult result;
    StageTimer timer(result.log);
    const Config& config = options.config;
    const int jobs = config.effective_jobs();
    fs::create_directories(options.out_dir);

    auto counting = std::make_shared<CountingProvider>(make_provider(options));
    Provider& provider = *counting;
    bool partial = false;

    // 1. Ingest.
    Sequence seq = timer.run("ingest", [&] { return load_sequence(options.input_dir); });
    timer.note("ingest", "frames=" + std::to_string(seq.frames.size()));

    PointCloud scene = timer.run("fuse", [&] {
        return fuse_scene(seq.frames, seq.intrinsics, config.scene_voxel, config.stride,
                          config.max_depth, jobs);
    });
    timer.note("fuse", "points=" + std::to_string(scene.size()));

    // 2. Hierarchical segmentation.
    std::vector<FloorSlab> floors =
        timer.run("floors", [&] { return detect_floors(scene, config.floors); });
    timer.note("floors", "count=" + std::to_string(floors.size()));

    struct RoomWork {
        RoomRegion region;
        int floor_index = 0;
        std::vector<int> dense;
        std::vector<int> keyframes;
        std::vector<TagResult> keyframe_tags;
        std::vector<KeyframeRecord> records;
        double coverage = 0.0;
        std::vector<std::string> flags;
        std::vector<std::string> object_tags;
        std::vector<std::string> functional_tags;
    };
    std::vector<RoomWork> rooms;
    timer.run("rooms", [&] {
        for (const auto& floor : floors) {
            const Grid2D grid = bev_histogram(floor, config.rooms.cell);
            for (auto& region : segment_rooms(grid, floor, config.rooms)) {
                RoomWork work;
                work.floor_index = floor.index;
                work.region = std::move(region);
                rooms.push_back(std::move(work));
            }
        }
    });
    timer.note("rooms", "count=" + std::to_string(rooms.size()));

    // 3. Frame assignment, projection filter, keyframe selection.
    timer.run("keyframes", [&] {
        std::vector<RoomRegion> regions;
        for (const auto& room : rooms) regions.push_back(room.region);
        auto assigned = assign_frames(seq.frames, regions, floors);
        for (size_t r = 0; r < rooms.size(); ++r) {
            rooms[r].dense = filter_by_projection(assigned[r].dense, seq.frames,
                                                  rooms[r].region, seq.intrinsics,
                                                  config.keyframes.eta, config.stride);
            if (rooms[r].dense.empty()) {
                rooms[r].flags.push_back("no_keyframes");
                continue;
            }
            rooms[r].keyframes = select_keyframes(rooms[r].dense, seq.frames, config.keyframes);
            rooms[r].coverage = coverage(rooms[r].keyframes, rooms[r].dense, seq.frames,
                                         seq.intrinsics, config.keyframes.coverage_voxel);
        }
    });

    // 4. Keyframe tags -> room vocabularies.
    timer.run("tags", [&] {
        for (auto& room : rooms) {
            room.keyframe_tags.resize(room.keyframes.size());
            parallel_for(room.keyframes.size(), jobs, [&](size_t i) {
                const PosedFrame& frame =
                    seq.frames.at(static_cast<size_t>(room.keyframes[i]));
                room.keyframe_tags[i] = provider.tag_frame(frame.color);
            });
            std::vector<std::vector<std::string>> object_lists, functional_lists;
            for (const auto& tags : room.keyframe_tags) {
                object_lists.push_back(tags.object_tags);
                functional_lists.push_back(tags.functional_tags);
            }
            room.object_tags = sorted_union(object_lists);
            room.functional_tags = sorted_union(functional_lists);
        }
    });

    // 5. Detection over the dense room frames, lifting, then one global merge:
    // clouds live in world coordinates, so duplicates seen from neighboring
    // rooms consolidate here and room assignment is settled by centroid later.
    std::vector<ObjectSegment> segments;
    std::mutex skip_mutex;
    timer.run("objects", [&] {
        struct FrameTask {
            int frame;
            const std::vector<std::string>* vocabulary;
        };
        std::vector<FrameTask> tasks;
        for (const auto& room : rooms) {
            if (room.object_tags.empty()) continue;
            for (int frame : room.dense) tasks.push_back({frame, &room.object_tags});
        }
        std::vector<std::vector<SegmentObservation>> per_frame(tasks.size());
        parallel_for(tasks.size(), jobs, [&](size_t i) {
            const PosedFrame& frame = seq.frames.at(static_cast<size_t>(tasks[i].frame));
            try {
                for (auto& det : provider.detect(frame.color, *tasks[i].vocabulary)) {
                    SegmentObservation obs;
                    obs.frame = frame.index;
                    obs.detection = std::move(det);
                    try {
                        obs.cloud = lift_mask(obs.detection.mask, frame, seq.intrinsics);
                    } catch (const Error& e) {
                        if (e.code() == ErrorCode::EmptySegment) continue;
                        throw;
                    }
                    per_frame[i].push_back(std::move(obs));
                }
            } catch (const ProviderError&) {
                std::lock_guard<std::mutex> lock(skip_mutex);
                result.skipped_frames.push_back(frame.index);
            }
        });
        std::vector<SegmentObservation> observations;
        for (auto& frame_obs : per_frame)
            for (auto& obs : frame_obs) observations.push_back(std::move(obs));
        segments = merge_objects(observations, config.merge);
        int next_object = 0;
        for (auto& segment : segments) {
            char id[16];
            std::snprintf(id, sizeof(id), "obj_%04d", next_object++);
            segment.id = id;
        }
    });

    // The functional-element vocabulary comes from the room holding the
    // object's centroid.
    auto room_of_segment = [&](const ObjectSegment& segment) -> const RoomWork* {
        const Eigen::Vector3f c = segment.centroid();
        for (const auto& room : rooms)
            if (point_in_polygon({c.x(), c.y()}, room.region.polygon)) return &room;
        return nullptr;
    };

    // 6. Best views, embeddings, functional elements.
    timer.run("views", [&] {
        for (auto& segment : segments) {
            try {
                best_view(segment, seq.frames, provider);
                const RoomWork* room = room_of_segment(segment);
                if (room && !room->functional_tags.empty())
                    segment_functional_elements(segment, room->functional_tags, seq.frames,
                                                seq.intrinsics, provider);
            } catch (const ProviderError&) {
                partial = true;
            }
        }
    });

    // 7. Grounded keyframe descriptions against the room's own objects.
    timer.run("describe", [&] {
        SummaryParams params;
        params.theta_vis = config.theta_vis;
        params.depth_tol = config.depth_tol;
        params.chunk_size = config.summary_chunk_size;
        for (auto& room : rooms) {
            std::vector<ObjectSegment> room_objects;
            for (const auto& segment : segments)
                if (room_of_segment(segment) == &room) room_objects.push_back(segment);
            for (size_t i = 0; i < room.keyframes.size(); ++i) {
                KeyframeRecord record;
                record.frame = room.keyframes[i];
                record.pose = seq.frames.at(static_cast<size_t>(room.keyframes[i])).pose;
                record.color_path = frame_rel(room.keyframes[i], "color");
                record.depth_path = frame_rel(room.keyframes[i], "depth");
                record.tags = room.keyframe_tags[i];
                room.records.push_back(std::move(record));
            }
            auto failed = describe_keyframes(room.records, room_objects, seq.frames,
                                             seq.intrinsics, provider, params, jobs);
            if (!failed.empty()) {
                partial = true;
                for (int frame : failed) result.skipped_frames.push_back(frame);
            }
        }
    });

    // 8. Bottom-up summaries and graph assembly.
    SceneGraph graph = timer.run("assemble", [&] {
        std::vector<FloorNode> floor_nodes;
        for (const auto& floor : floors) {
            FloorNode node;
            node.id = "floor_" + std::to_string(floor.index);
            node.index = floor.index;
            node.z_min = floor.z_min;
            node.z_max = floor.z_max;
            floor_nodes.push_back(std::move(node));
        }
        std::vector<ObjectNode> objects;
        int room_counter = 0;
        for (auto& room : rooms) {
            RoomNode node;
            node.id = "room_" + std::to_string(room.floor_index) + "_" +
                      std::to_string(room_counter++);
            node.region = room.region;
            node.keyframes = room.records;
            node.object_tags = room.object_tags;
            node.functional_tags = room.functional_tags;
            node.coverage = room.coverage;
            node.flags = room.flags;
            std::vector<std::string> descriptions;
            for (const auto& record : node.keyframes)
                if (!record.description.empty()) descriptions.push_back(record.description);
            node.summary = summarize_room(descriptions, provider, config.summary_chunk_size);
            floor_nodes.at(static_cast<size_t>(room.floor_index)).rooms.push_back(std::move(node));
        }
        for (const auto& segment : segments) {
            ObjectNode object;
            object.id = segment.id;
            object.label = segment.modal_label();
            object.label_counts = segment.label_counts;
            object.cloud = segment.cloud;
            object.views = segment.views;
            object.best_view_index = segment.best_view_index;
            object.embedding = segment.embedding;
            object.has_embedding = segment.has_embedding;
            for (const auto& fe : segment.functional_elements) {
                FunctionalElementNode fe_node;
                fe_node.id = fe.id;
                fe_node.label = fe.label;
                fe_node.source_frame = fe.source_frame;
                fe_node.cloud = fe.cloud;
                object.functional_elements.push_back(std::move(fe_node));
            }
            objects.push_back(std::move(object));
        }
        for (auto& floor_node : floor_nodes) {
            std::vector<std::string> summaries;
            for (const auto& room : floor_node.rooms) summaries.push_back(room.summary);
            floor_node.summary = summaries.empty()
                                     ? std::string("unobserved floor")
                                     : summarize_floor(summaries, provider,
                                                       config.summary_chunk_size);
        }
        return assemble(std::move(floor_nodes), std::move(objects), provider.name(),
                        config.canonical_text(), config.hash());
    });

    timer.run("save-graph", [&] { save_graph(graph, options.out_dir); });

    // 9. Retrieval index.
    timer.run("index", [&] {
        ChunkIndex index = build_index(chunk_graph(graph), provider, jobs);
        add_visual_stores(index, graph, seq.frames, provider, jobs);
        save_index(index, fs::path(options.out_dir) / "index");
    });

    // Keep the fixture table next to the graph so query/serve/eval reuse it.
    if (!options.mock_fixtures.empty() ||
        fs::exists(fs::path(options.input_dir) / "mock_fixtures.json")) {
        const fs::path src = options.mock_fixtures.empty()
                                 ? fs::path(options.input_dir) / "mock_fixtures.json"
                                 : fs::path(options.mock_fixtures);
        fs::copy_file(src, fs::path(options.out_dir) / "mock_fixtures.json",
                      fs::copy_options::overwrite_existing);
    }

    result.provider_calls = counting->calls;
    timer.note("done", "provider_calls=" + std::to_string(result.provider_calls) +
                           " skipped_frames=" + std::to_string(result.skipped_frames.size()));
    result.exit_code = (partial || !result.skipped_frames.empty()) ? 2 : 0;

    std::ofstream log(fs::path(options.out_dir) / "build.log");
    for (const auto& line : result.log) log << line << "\n";
    return result;
}

LoadedScene load_scene(const std::string& graph_dir) {
    LoadedScene scene;
    scene.graph = load_graph(graph_dir);
    scene.index = load_index(fs::path(graph_dir) / "index");
    return scene;
}

}  // namespace keysg
