#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "fixtures/synthetic.hpp"
#include "keysg/errors.hpp"
#include "keysg/summaries.hpp"

using namespace keysg;
namespace fx = keysg::fixtures;

namespace {

// Two visible boxes, one box hidden behind a wall.
struct VisibilityScene {
    fx::World world;
    std::vector<PosedFrame> frames;
    std::vector<ObjectSegment> objects;
};

VisibilityScene make_scene() {
    VisibilityScene scene;
    scene.world.intr = fx::small_intrinsics();
    scene.world.add_box({-6, -6, -0.2f}, {6, 6, 0});
    const int mug = scene.world.add_box({-0.8f, 1.4f, 0.2f}, {-0.2f, 2.0f, 0.8f}, "mug");
    const int table = scene.world.add_box({0.4f, 1.6f, 0}, {1.4f, 2.6f, 0.7f}, "table");
    scene.world.add_box({-2.0f, 2.8f, 0}, {2.0f, 3.0f, 2.2f});  // occluder
    const int lamp = scene.world.add_box({0.0f, 3.4f, 0}, {0.6f, 4.0f, 1.2f}, "lamp");

    scene.frames.push_back(
        fx::make_frame(scene.world, fx::make_pose({0, -0.6, 1.0}, M_PI / 2, 0.0), 0));

    auto sample_box = [&](int idx, const std::string& id) {
        const fx::Box& box = scene.world.boxes[static_cast<size_t>(idx)];
        ObjectSegment object;
        object.id = id;
        object.label_counts[box.label] = 3;
        for (double x = box.lo.x() + 0.02; x < box.hi.x(); x += 0.06)
            for (double z = box.lo.z() + 0.02; z < box.hi.z(); z += 0.06)
                object.cloud.points.emplace_back(static_cast<float>(x), box.lo.y() + 0.001f,
                                                 static_cast<float>(z));
        return object;
    };
    scene.objects.push_back(sample_box(mug, "obj_mug"));
    scene.objects.push_back(sample_box(table, "obj_table"));
    scene.objects.push_back(sample_box(lamp, "obj_lamp"));
    return scene;
}

}  // namespace

TEST_CASE("describe_keyframes grounds descriptions in the visible set") {
    VisibilityScene scene = make_scene();
    MockProvider mock;
    std::vector<KeyframeRecord> keyframes(1);
    keyframes[0].frame = 0;
    keyframes[0].pose = scene.frames[0].pose;

    SummaryParams params;
    auto failed = describe_keyframes(keyframes, scene.objects, scene.frames, scene.world.intr,
                                     mock, params);
    CHECK(failed.empty());
    const std::string& desc = keyframes[0].description;
    REQUIRE(desc.rfind("Frame shows: ", 0) == 0);

    // Grounding guarantee: every listed label belongs to an object whose
    // visible fraction clears the threshold; the occluded lamp is absent.
    CHECK(desc.find("mug") != std::string::npos);
    CHECK(desc.find("table") != std::string::npos);
    CHECK(desc.find("lamp") == std::string::npos);
    auto visible = visible_objects(scene.frames[0], scene.objects, scene.world.intr,
                                   params.theta_vis, params.depth_tol);
    std::string listed = desc.substr(std::string("Frame shows: ").size());
    std::istringstream ss(listed);
    std::string token;
    size_t count = 0;
    while (std::getline(ss, token, ',')) {
        token.erase(0, token.find_first_not_of(' '));
        bool found = false;
        for (const auto& id : visible)
            for (const auto& object : scene.objects)
                if (object.id == id && object.modal_label() == token) found = true;
        CHECK(found);
        ++count;
    }
    CHECK(count == visible.size());
}

TEST_CASE("describe_keyframes still describes frames with nothing visible") {
    VisibilityScene scene = make_scene();
    MockProvider mock;
    std::vector<KeyframeRecord> keyframes(1);
    keyframes[0].frame = 0;
    // No objects at all: the provider still runs with an empty list.
    std::vector<ObjectSegment> none;
    describe_keyframes(keyframes, none, scene.frames, scene.world.intr, mock, SummaryParams{});
    CHECK(keyframes[0].description == "Frame shows:");
}

TEST_CASE("summarize_room concatenates through the mock and handles the sentinel") {
    MockProvider mock;
    CHECK(summarize_room({"a", "b"}, mock) == "ROOM SUMMARY: a | b");
    CHECK(summarize_room({}, mock) == std::string(kUnobservedRoom));
    CHECK(summarize_room({"solo"}, mock) == "ROOM SUMMARY: solo");

    // Input order is preserved.
    std::vector<std::string> many;
    for (int i = 0; i < 30; ++i) many.push_back("d" + std::to_string(i));
    const std::string summary = summarize_room(many, mock, 64);
    CHECK(summary.find("d0 | d1") != std::string::npos);
    CHECK(summary.find("d28 | d29") != std::string::npos);
}

TEST_CASE("summarize_floor uses the floor prefix") {
    MockProvider mock;
    CHECK(summarize_floor({"r1", "r2"}, mock) == "FLOOR SUMMARY: r1 | r2");
    CHECK(summarize_floor({"only"}, mock) == "FLOOR SUMMARY: only");
    CHECK_THROWS_AS(summarize_floor({}, mock), Error);
}

TEST_CASE("long description lists reduce through chunked summaries") {
    MockProvider mock;
    const std::string summary = summarize_texts({"a", "b", "c"}, SummaryLevel::Room, mock, 2);
    // Map over {a,b} and {c}, then reduce the two partials.
    CHECK(summary == "ROOM SUMMARY: ROOM SUMMARY: a | b | ROOM SUMMARY: c");
}

TEST_CASE("provider failures skip frames and report them") {
    class FailingProvider : public MockProvider {
    public:
        std::string describe_frame(const ImageU8&, const std::vector<std::string>&) override {
            throw ProviderError(500, true, "boom");
        }
    };
    VisibilityScene scene = make_scene();
    FailingProvider provider;
    std::vector<KeyframeRecord> keyframes(1);
    keyframes[0].frame = 0;
    auto failed = describe_keyframes(keyframes, scene.objects, scene.frames, scene.world.intr,
                                     provider, SummaryParams{});
    CHECK(failed == std::vector<int>{0});
    CHECK(keyframes[0].description.empty());
}
