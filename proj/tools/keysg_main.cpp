#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "keysg/errors.hpp"
#include "keysg/evalharness.hpp"
#include "keysg/pipeline.hpp"
#include "keysg/ragindex_server.hpp"

// httplib must follow the Eigen-bearing headers: its transitive system
// includes define macros that collide with Eigen internals.
#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace keysg;

namespace {

std::shared_ptr<Provider> provider_for_graph(const std::string& graph_dir, bool force_mock) {
    BuildOptions options;
    options.input_dir = graph_dir;
    options.out_dir = graph_dir;
    options.mock = force_mock;
    const fs::path fixtures = fs::path(graph_dir) / "mock_fixtures.json";
    if (fs::exists(fixtures)) options.mock_fixtures = fixtures.string();
    return make_provider(options);
}

bool graph_built_with_mock(const SceneGraph& graph) {
    return graph.provider_name.rfind("mock", 0) == 0;
}

int run_build(const std::string& input, const std::string& out, const std::string& config_path,
              bool mock, int jobs, double max_depth,
              const std::vector<std::string>& overrides) {
    BuildOptions options;
    options.input_dir = input;
    options.out_dir = out;
    options.mock = mock;
    if (!config_path.empty()) options.config = Config::load(config_path);
    if (jobs > 0) options.config.jobs = jobs;
    if (max_depth > 0) options.config.max_depth = max_depth;
    for (const auto& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::SchemaError, "--set expects key=value, got " + kv);
        options.config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    BuildResult result = build_scene(options);
    for (const auto& line : result.log) std::fprintf(stderr, "%s\n", line.c_str());
    if (result.exit_code == 2)
        std::fprintf(stderr, "[build] partial: %zu provider failures skipped\n",
                     result.skipped_frames.size());
    return result.exit_code;
}

int run_query(const std::string& graph_dir, const std::string& query, const std::string& mode,
              bool as_json, bool mock) {
    LoadedScene scene = load_scene(graph_dir);
    auto provider = provider_for_graph(graph_dir, mock || graph_built_with_mock(scene.graph));

    AnswerResult result = answer(query, scene.graph, scene.index, *provider);
    // Hierarchical retrieval trace for the requested mode.
    RetrievalResult retrieval = retrieve_hierarchical(
        query, scene.graph, scene.index,
        mode == "raw" ? RetrievalMode::Raw : RetrievalMode::Parsed, *provider);

    if (as_json) {
        ordered_json out;
        out["text"] = result.text;
        out["node_ids"] = result.grounded_node_ids;
        out["ungrounded_fallback"] = result.ungrounded_fallback;
        out["trace"] = ordered_json::parse(retrieval.trace.to_json());
        ordered_json ranked = ordered_json::array();
        for (size_t i = 0; i < std::min<size_t>(10, retrieval.hits.size()); ++i)
            ranked.push_back({{"node", retrieval.hits[i].node_id},
                              {"score", retrieval.hits[i].score}});
        out["ranked"] = ranked;
        std::printf("%s\n", out.dump(2).c_str());
    } else {
        std::printf("%s\n", result.text.c_str());
        std::printf("grounded:");
        for (const auto& id : result.grounded_node_ids) std::printf(" %s", id.c_str());
        std::printf("\n");
    }
    return result.ungrounded_fallback ? 3 : 0;
}

int run_inspect(const std::string& graph_dir, bool rooms, const std::string& keyframes_room,
                const std::string& out_dir) {
    SceneGraph graph = load_graph(graph_dir);
    if (rooms) {
        const fs::path dir = out_dir.empty() ? fs::path(graph_dir) / "inspect" : fs::path(out_dir);
        fs::create_directories(dir);
        const uint8_t palette[8][3] = {{230, 80, 80},   {80, 180, 90},  {90, 110, 230},
                                       {230, 200, 70},  {180, 90, 200}, {90, 210, 200},
                                       {240, 140, 60},  {150, 150, 150}};
        for (const auto& floor : graph.floors) {
            if (floor.rooms.empty()) continue;
            const auto& first = floor.rooms.front().region;
            ImageU8 img(first.grid_width, first.grid_height);
            for (size_t r = 0; r < floor.rooms.size(); ++r) {
                const auto& region = floor.rooms[r].region;
                const auto& color = palette[r % 8];
                for (int j = 0; j < region.grid_height; ++j)
                    for (int i = 0; i < region.grid_width; ++i)
                        if (region.mask_at(i, j))
                            img.set_pixel(i, j, color[0], color[1], color[2]);
            }
            const std::string path = (dir / (floor.id + "_rooms.png")).string();
            write_png_rgb8(path, img);
            std::printf("%s\n", path.c_str());
        }
    }
    if (!keyframes_room.empty()) {
        const auto ref = graph.lookup(keyframes_room);
        const RoomNode& room = graph.room_at(ref);
        ordered_json out;
        out["room"] = room.id;
        ordered_json frames = ordered_json::array();
        for (const auto& kf : room.keyframes) frames.push_back(kf.frame);
        out["keyframes"] = frames;
        out["coverage"] = room.coverage;
        out["flags"] = room.flags;
        std::printf("%s\n", out.dump(2).c_str());
    }
    return 0;
}

PointCloud load_gt_cloud(const fs::path& gt_dir, const std::string& rel) {
    std::ifstream in(gt_dir / rel, std::ios::binary);
    if (!in) throw Error(ErrorCode::SchemaError, "missing gt cloud " + rel);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_kpc(bytes);
}

void write_results(const std::string& out_path, const ordered_json& results) {
    if (out_path.empty()) return;
    std::ofstream out(out_path);
    out << results.dump(2) << "\n";
}

int run_eval(const std::string& graph_dir, const std::string& gt_path, const std::string& task,
             const std::string& out_path, bool mock) {
    std::ifstream gt_in(gt_path);
    if (!gt_in) throw Error(ErrorCode::SchemaError, "cannot open gt file " + gt_path);
    ordered_json gt;
    try {
        gt = ordered_json::parse(gt_in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("gt parse: ") + e.what());
    }
    const fs::path gt_dir = fs::path(gt_path).parent_path();
    LoadedScene scene = load_scene(graph_dir);
    auto provider = provider_for_graph(graph_dir, mock || graph_built_with_mock(scene.graph));
    ordered_json results;
    results["task"] = task;

    if (task == "seg") {
        const double voxel = gt.value("voxel", 0.05);
        std::set<std::string> class_set;
        for (const auto& item : gt.at("items")) class_set.insert(item.at("class"));
        const std::vector<std::string> classes(class_set.begin(), class_set.end());

        // Classify every embedded object, then paint its voxels with the class.
        std::vector<const ObjectNode*> objects;
        std::vector<Embedding> embeddings;
        for (const auto& floor : scene.graph.floors)
            for (const auto& room : floor.rooms)
                for (const auto& object : room.objects)
                    if (object.has_embedding) {
                        objects.push_back(&object);
                        embeddings.push_back(object.embedding);
                    }
        const auto predicted = classify_objects(embeddings, classes, *provider);
        std::map<VoxelKey, std::pair<std::string, std::string>, std::less<>> voxel_label;
        std::map<VoxelKey, std::pair<std::string, std::string>> owner;
        for (size_t i = 0; i < objects.size(); ++i)
            for (const auto& p : objects[i]->cloud.points) {
                const VoxelKey key = voxel_key(p, voxel);
                auto it = owner.find(key);
                // Deterministic collision rule: lowest object id wins.
                if (it == owner.end() || objects[i]->id < it->second.first)
                    owner[key] = {objects[i]->id, predicted[i]};
            }
        std::vector<std::string> pred_labels, gt_labels;
        for (const auto& item : gt.at("items")) {
            const PointCloud cloud = load_gt_cloud(gt_dir, item.at("cloud"));
            const std::string cls = item.at("class");
            for (const auto& p : cloud.points) {
                gt_labels.push_back(cls);
                auto it = owner.find(voxel_key(p, voxel));
                pred_labels.push_back(it == owner.end() ? "" : it->second.second);
            }
        }
        const SegMetrics metrics = semantic_seg_metrics(pred_labels, gt_labels);
        results["mAcc"] = metrics.mean_accuracy;
        results["f_mIoU"] = metrics.f_miou;
        for (const auto& [cls, iou] : metrics.per_class_iou) results["iou"][cls] = iou;
        std::printf("%-14s %8s %8s\n", "metric", "value", "");
        std::printf("%-14s %8.4f\n", "mAcc", metrics.mean_accuracy);
        std::printf("%-14s %8.4f\n", "f_mIoU", metrics.f_miou);
    } else if (task == "func" || task == "retrieval") {
        const std::vector<int> ks = gt.value("ks", std::vector<int>{1, 5, 10});
        const std::vector<double> thresholds =
            gt.value("iou_thresholds", std::vector<double>{0.0, 0.1, 0.25});
        const double voxel = gt.value("voxel", 0.05);
        std::vector<std::vector<RankedCandidate>> per_gt;

        if (task == "func") {
            const auto dataset_labels = gt.at("dataset_labels").get<std::vector<std::string>>();
            std::vector<const FunctionalElementNode*> elements;
            for (const auto& floor : scene.graph.floors)
                for (const auto& room : floor.rooms)
                    for (const auto& object : room.objects)
                        for (const auto& fe : object.functional_elements)
                            elements.push_back(&fe);
            for (const auto& item : gt.at("items")) {
                const PointCloud cloud = load_gt_cloud(gt_dir, item.at("cloud"));
                const std::string cls = item.at("class");
                std::vector<RankedCandidate> candidates;
                for (const auto* fe : elements)
                    candidates.push_back({label_rank(fe->label, cls, dataset_labels, *provider),
                                          iou3d(fe->cloud, cloud, voxel)});
                per_gt.push_back(std::move(candidates));
            }
        } else {
            const std::string mode = gt.value("mode", "parsed");
            for (const auto& item : gt.at("queries")) {
                const PointCloud cloud = load_gt_cloud(gt_dir, item.at("cloud"));
                RetrievalResult retrieval = retrieve_hierarchical(
                    item.at("query"), scene.graph, scene.index,
                    mode == "raw" ? RetrievalMode::Raw : RetrievalMode::Parsed, *provider);
                std::vector<RankedCandidate> candidates;
                for (size_t rank = 0; rank < retrieval.hits.size(); ++rank) {
                    const auto ref = scene.graph.lookup(retrieval.hits[rank].node_id);
                    candidates.push_back(
                        {static_cast<int>(rank) + 1,
                         iou3d(scene.graph.object_at(ref).cloud, cloud, voxel)});
                }
                per_gt.push_back(std::move(candidates));
            }
        }
        std::printf("%-10s", "R@k");
        for (double threshold : thresholds) std::printf(" IoU>=%-6.2f", threshold);
        std::printf("\n");
        for (int k : ks) {
            std::printf("%-10d", k);
            for (double threshold : thresholds) {
                const double recall = recall_at_k(per_gt, k, threshold);
                results["recall"]["k" + std::to_string(k)]
                       ["iou" + std::to_string(threshold)] = recall;
                std::printf(" %10.4f", recall);
            }
            std::printf("\n");
        }
    } else if (task == "grounding") {
        const double threshold = gt.value("iou_threshold", 0.1);
        const double voxel = gt.value("voxel", 0.05);
        std::vector<GroundingQuery> queries;
        for (const auto& item : gt.at("queries")) {
            GroundingQuery query;
            query.query = item.at("query");
            if (item.contains("flags"))
                query.flags = item.at("flags").get<std::map<std::string, bool>>();
            const PointCloud gt_cloud = load_gt_cloud(gt_dir, item.at("cloud"));
            AnswerResult ans = answer(query.query, scene.graph, scene.index, *provider);
            if (!ans.grounded_node_ids.empty()) {
                const auto ref = scene.graph.lookup(ans.grounded_node_ids.front());
                if (ref.level == NodeLevel::Object)
                    query.iou = iou3d(scene.graph.object_at(ref).cloud, gt_cloud, voxel);
                else if (ref.level == NodeLevel::FunctionalElement)
                    query.iou = iou3d(scene.graph.element_at(ref).cloud, gt_cloud, voxel);
            }
            queries.push_back(std::move(query));
        }
        const GroundingReport report = grounding_accuracy(queries, threshold);
        results["overall"] = report.overall;
        std::printf("%-22s %8.4f (%zu/%zu)\n", "grounding overall", report.overall,
                    report.correct, report.total);
        for (const auto& [flag, accs] : report.by_flag) {
            results["flags"][flag]["with"] = accs.first;
            results["flags"][flag]["without"] = accs.second;
            std::printf("  with %-12s %8.4f | without %8.4f\n", flag.c_str(), accs.first,
                        accs.second);
        }
    }
    write_results(out_path, results);
    return 0;
}

int run_serve(const std::string& graph_dir, const std::string& host, int port, bool mock) {
    LoadedScene scene = load_scene(graph_dir);
    auto provider = provider_for_graph(graph_dir, mock || graph_built_with_mock(scene.graph));
    httplib::Server server;
    register_query_routes(server, scene.graph, scene.index, *provider);
    std::fprintf(stderr, "serving on %s:%d\n", host.c_str(), port);
    if (!server.listen(host, port)) {
        std::fprintf(stderr, "failed to bind %s:%d\n", host.c_str(), port);
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keysg: hierarchical keyframe scene graphs from posed RGB-D captures"};
    app.require_subcommand(1);

    // build
    auto* build = app.add_subcommand("build", "build graph and index from a capture");
    std::string input, out, config_path;
    bool mock = false;
    int jobs = 0;
    double max_depth = 0.0;
    std::vector<std::string> overrides;
    build->add_option("--input", input, "capture directory")->required();
    build->add_option("--out", out, "output directory")->required();
    build->add_option("--config", config_path, "TOML-style config file");
    build->add_flag("--mock", mock, "use the deterministic offline provider");
    build->add_option("--jobs", jobs, "worker threads (default: logical cores)");
    build->add_option("--max-depth", max_depth, "far depth cutoff in meters");
    build->add_option("--set", overrides, "config override section.key=value")
        ->take_all();

    // query
    auto* query_cmd = app.add_subcommand("query", "answer a natural-language query");
    std::string graph_dir, query_text, mode = "parsed";
    bool as_json = false, query_mock = false;
    query_cmd->add_option("--graph", graph_dir, "graph directory")->required();
    query_cmd->add_option("query", query_text, "query text")->required();
    query_cmd->add_option("--mode", mode, "parsed|raw")
        ->check(CLI::IsMember({"parsed", "raw"}));
    query_cmd->add_flag("--json", as_json, "machine-readable output");
    query_cmd->add_flag("--mock", query_mock, "force the offline provider");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "debug views of a built graph");
    std::string inspect_graph, keyframes_room, inspect_out;
    bool rooms = false;
    inspect->add_option("--graph", inspect_graph, "graph directory")->required();
    inspect->add_flag("--rooms", rooms, "write room label masks as PNG");
    inspect->add_option("--keyframes", keyframes_room, "emit keyframes JSON for a room id");
    inspect->add_option("--out", inspect_out, "output directory for images");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run an evaluation protocol");
    std::string eval_graph, gt_path, task, eval_out;
    bool eval_mock = false;
    eval_cmd->add_option("--graph", eval_graph, "graph directory")->required();
    eval_cmd->add_option("--gt", gt_path, "ground-truth JSON")->required();
    eval_cmd->add_option("--task", task, "seg|func|retrieval|grounding")
        ->required()
        ->check(CLI::IsMember({"seg", "func", "retrieval", "grounding"}));
    eval_cmd->add_option("--out", eval_out, "write metrics JSON here");
    eval_cmd->add_flag("--mock", eval_mock, "force the offline provider");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP query endpoint");
    std::string serve_graph, host = "127.0.0.1";
    int port = 8717;
    bool serve_mock = false;
    serve->add_option("--graph", serve_graph, "graph directory")->required();
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port");
    serve->add_flag("--mock", serve_mock, "force the offline provider");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed())
            return run_build(input, out, config_path, mock, jobs, max_depth, overrides);
        if (query_cmd->parsed())
            return run_query(graph_dir, query_text, mode, as_json, query_mock);
        if (inspect->parsed())
            return run_inspect(inspect_graph, rooms, keyframes_room, inspect_out);
        if (eval_cmd->parsed()) return run_eval(eval_graph, gt_path, task, eval_out, eval_mock);
        if (serve->parsed()) return run_serve(serve_graph, host, port, serve_mock);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 1;
    }
    return 1;
}
