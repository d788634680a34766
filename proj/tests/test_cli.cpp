#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures/synthetic.hpp"
#include "json.hpp"
#include "keysg/scene_graph.hpp"

using namespace keysg;
namespace fx = keysg::fixtures;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string keysg_bin() {
    const char* bin = std::getenv("KEYSG_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "KEYSG_BIN must point at the keysg binary");
    return bin;
}

CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_path = scratch / "stdout.txt";
    const fs::path err_path = scratch / "stderr.txt";
    const std::string cmd =
        keysg_bin() + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

// One shared scene + build for the whole binary-level suite.
struct BuiltScene {
    fx::TempDir dir{"cli"};
    fs::path scene;
    fs::path graph;

    BuiltScene() {
        scene = dir.path() / "scene";
        graph = dir.path() / "graph";
        fx::World world = fx::make_building_world();
        fx::write_scene(scene, world, fx::building_trajectory(world));
        {
            std::ofstream config(dir.path() / "e2e.toml");
            config << "# fixture capture tuning\n"
                   << "[ingest]\nstride = 2\n"
                   << "[rooms]\nwall_frac = 0.6\n";
        }
        CliResult build = run_cli("build --input " + scene.string() + " --out " +
                                      graph.string() + " --mock --jobs 2 --config " +
                                      (dir.path() / "e2e.toml").string(),
                                  dir.path());
        REQUIRE_MESSAGE(build.exit_code == 0, build.err);
    }
};

BuiltScene& built() {
    static BuiltScene scene;
    return scene;
}

std::string object_id_for_label(const SceneGraph& graph, const std::string& label) {
    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms)
            for (const auto& object : room.objects)
                if (object.label == label) return object.id;
    return {};
}

}  // namespace

TEST_CASE("build produces the expected graph shape") {
    BuiltScene& scene = built();
    REQUIRE(fs::exists(scene.graph / "graph.json"));
    REQUIRE(fs::exists(scene.graph / "build.log"));
    SceneGraph graph = load_graph(scene.graph);
    REQUIRE(graph.floors.size() == 1);
    CHECK(graph.floors[0].rooms.size() == 3);
    size_t objects = 0, elements = 0, keyframes = 0;
    for (const auto& room : graph.floors[0].rooms) {
        objects += room.objects.size();
        keyframes += room.keyframes.size();
        CHECK(room.coverage > 0.8);
        CHECK(!room.summary.empty());
        for (const auto& object : room.objects) elements += object.functional_elements.size();
    }
    CHECK(objects == 12);
    CHECK(elements == 4);
    CHECK(keyframes > 0);
    // Index files exist per type.
    for (const char* name : {"floor", "room", "frame", "object", "frame_visual",
                             "object_visual"}) {
        CHECK(fs::exists(scene.graph / "index" / (std::string(name) + ".jsonl")));
        CHECK(fs::exists(scene.graph / "index" / (std::string(name) + ".vec")));
    }
}

TEST_CASE("build fails with a stage-tagged error on a broken capture") {
    BuiltScene& scene = built();
    fx::TempDir broken("broken");
    fs::create_directories(broken.path() / "in");
    fs::copy(scene.scene, broken.path() / "in", fs::copy_options::recursive);
    fs::remove_all(broken.path() / "in" / "poses");
    CliResult result = run_cli("build --input " + (broken.path() / "in").string() + " --out " +
                                   (broken.path() / "out").string() + " --mock",
                               broken.path());
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("poses") != std::string::npos);
}

TEST_CASE("query grounds the planted mug") {
    BuiltScene& scene = built();
    SceneGraph graph = load_graph(scene.graph);
    const std::string mug_id = object_id_for_label(graph, "mug");
    REQUIRE(!mug_id.empty());
    CliResult result =
        run_cli("query --graph " + scene.graph.string() + " \"where is the mug\" --json",
                scene.dir.path());
    CHECK(result.exit_code == 0);
    json out = json::parse(result.out);
    REQUIRE(!out["node_ids"].empty());
    CHECK(out["node_ids"][0] == mug_id);
}

TEST_CASE("parsed and raw modes agree on an unambiguous fixture query") {
    // Mock-built room summaries list object labels, not room types, so the
    // unambiguous phrasing names the object only; both descents must land on
    // the same toilet node.
    BuiltScene& scene = built();
    SceneGraph graph = load_graph(scene.graph);
    const std::string toilet_id = object_id_for_label(graph, "toilet");
    for (const char* mode : {"parsed", "raw"}) {
        CliResult result = run_cli("query --graph " + scene.graph.string() +
                                       " \"find the toilet\" --json --mode " + mode,
                                   scene.dir.path());
        CHECK(result.exit_code == 0);
        json out = json::parse(result.out);
        CHECK(out["ranked"][0]["node"] == toilet_id);
    }
}

TEST_CASE("query on a missing graph path exits 1") {
    BuiltScene& scene = built();
    CliResult result =
        run_cli("query --graph /no/such/graph \"mug\"", scene.dir.path());
    CHECK(result.exit_code == 1);
}

TEST_CASE("unknown eval task is a usage error") {
    BuiltScene& scene = built();
    CliResult result = run_cli("eval --graph " + scene.graph.string() +
                                   " --gt missing.json --task bogus",
                               scene.dir.path());
    CHECK(result.exit_code != 0);
}

TEST_CASE("eval seg scores a perfect-prediction fixture at one") {
    BuiltScene& scene = built();
    SceneGraph graph = load_graph(scene.graph);
    const fs::path gt_dir = scene.dir.path() / "gt_seg";
    fs::create_directories(gt_dir / "clouds");
    json gt;
    gt["task"] = "seg";
    gt["voxel"] = 0.05;
    json items = json::array();
    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms)
            for (const auto& object : room.objects) {
                const std::string rel = "clouds/" + object.id + ".kpc";
                std::ofstream out(gt_dir / rel, std::ios::binary);
                out << encode_kpc(object.cloud, 0.05f);
                items.push_back({{"class", object.label}, {"cloud", rel}});
            }
    gt["items"] = items;
    {
        std::ofstream out(gt_dir / "gt.json");
        out << gt.dump();
    }
    CliResult result = run_cli("eval --graph " + scene.graph.string() + " --gt " +
                                   (gt_dir / "gt.json").string() + " --task seg --out " +
                                   (gt_dir / "metrics.json").string(),
                               scene.dir.path());
    REQUIRE_MESSAGE(result.exit_code == 0, result.err);
    json metrics = json::parse(std::ifstream(gt_dir / "metrics.json"));
    CHECK(metrics["mAcc"].get<double>() == doctest::Approx(1.0));
    CHECK(metrics["f_mIoU"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("eval grounding scores the fixture queries") {
    BuiltScene& scene = built();
    SceneGraph graph = load_graph(scene.graph);
    const fs::path gt_dir = scene.dir.path() / "gt_ground";
    fs::create_directories(gt_dir / "clouds");
    json gt;
    gt["task"] = "grounding";
    gt["iou_threshold"] = 0.1;
    json queries = json::array();
    for (const std::string label : {"mug", "bed", "toilet"}) {
        for (const auto& floor : graph.floors)
            for (const auto& room : floor.rooms)
                for (const auto& object : room.objects)
                    if (object.label == label) {
                        const std::string rel = "clouds/" + object.id + ".kpc";
                        std::ofstream out(gt_dir / rel, std::ios::binary);
                        out << encode_kpc(object.cloud, 0.05f);
                        queries.push_back({{"query", "where is the " + label},
                                           {"cloud", rel},
                                           {"flags", {{"spatial", label == "bed"}}}});
                    }
    }
    gt["queries"] = queries;
    {
        std::ofstream out(gt_dir / "gt.json");
        out << gt.dump();
    }
    CliResult result = run_cli("eval --graph " + scene.graph.string() + " --gt " +
                                   (gt_dir / "gt.json").string() + " --task grounding --out " +
                                   (gt_dir / "metrics.json").string(),
                               scene.dir.path());
    REQUIRE_MESSAGE(result.exit_code == 0, result.err);
    json metrics = json::parse(std::ifstream(gt_dir / "metrics.json"));
    CHECK(metrics["overall"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("inspect renders room masks and emits keyframe JSON") {
    BuiltScene& scene = built();
    CliResult rooms = run_cli("inspect --graph " + scene.graph.string() + " --rooms --out " +
                                  (scene.dir.path() / "inspect").string(),
                              scene.dir.path());
    CHECK(rooms.exit_code == 0);
    CHECK(fs::exists(scene.dir.path() / "inspect" / "floor_0_rooms.png"));

    SceneGraph graph = load_graph(scene.graph);
    const std::string room_id = graph.floors[0].rooms[0].id;
    CliResult keyframes = run_cli(
        "inspect --graph " + scene.graph.string() + " --keyframes " + room_id, scene.dir.path());
    CHECK(keyframes.exit_code == 0);
    json out = json::parse(keyframes.out);
    CHECK(out["room"] == room_id);
    CHECK(out["keyframes"].size() > 0);
    CHECK(out["coverage"].get<double>() > 0.8);
}
