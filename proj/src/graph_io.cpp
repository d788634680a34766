#include <cstring>
#include <fstream>

#include "json.hpp"
#include "keysg/errors.hpp"
#include "keysg/scene_graph.hpp"

using ordered_json = nlohmann::ordered_json;

namespace keysg {

namespace {

uint32_t fnv1a32(const void* data, size_t len) {
    const uint8_t* bytes = static_cast<const uint8_t*>(data);
    uint32_t h = 2166136261u;
    for (size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 16777619u;
    }
    return h;
}

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const std::string& bytes, size_t offset) {
    return static_cast<uint32_t>(static_cast<uint8_t>(bytes[offset])) |
           static_cast<uint32_t>(static_cast<uint8_t>(bytes[offset + 1])) << 8 |
           static_cast<uint32_t>(static_cast<uint8_t>(bytes[offset + 2])) << 16 |
           static_cast<uint32_t>(static_cast<uint8_t>(bytes[offset + 3])) << 24;
}

uint32_t float_bits(float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    return bits;
}

float bits_float(uint32_t bits) {
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

// Run-length encoding local to a bit vector.
std::vector<int64_t> bits_to_runs(const std::vector<uint8_t>& bits) {
    std::vector<int64_t> runs;
    int64_t start = -1;
    for (size_t i = 0; i <= bits.size(); ++i) {
        const bool on = i < bits.size() && bits[i] != 0;
        if (on && start < 0) start = static_cast<int64_t>(i);
        if (!on && start >= 0) {
            runs.push_back(start);
            runs.push_back(static_cast<int64_t>(i) - start);
            start = -1;
        }
    }
    return runs;
}

std::vector<uint8_t> runs_to_bits(const std::vector<int64_t>& runs, size_t size) {
    std::vector<uint8_t> bits(size, 0);
    for (size_t i = 0; i + 1 < runs.size(); i += 2) {
        const int64_t start = runs[i], len = runs[i + 1];
        if (start < 0 || len <= 0 || static_cast<size_t>(start + len) > size)
            throw Error(ErrorCode::SchemaError, "mask runs out of bounds");
        for (int64_t k = 0; k < len; ++k) bits[static_cast<size_t>(start + k)] = 1;
    }
    return bits;
}

ordered_json mask_to_json(const PixelMask& mask) {
    ordered_json j;
    j["box"] = {mask.box.x0, mask.box.y0, mask.box.x1, mask.box.y1};
    j["runs"] = bits_to_runs(mask.bits);
    return j;
}

PixelMask mask_from_json(const ordered_json& j) {
    PixelMask mask;
    auto b = j.at("box");
    mask.box = PixelBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    mask.bits = runs_to_bits(j.at("runs").get<std::vector<int64_t>>(),
                             static_cast<size_t>(mask.box.width()) * mask.box.height());
    return mask;
}

ordered_json pose_to_json(const Eigen::Matrix4d& pose) {
    ordered_json arr = ordered_json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) arr.push_back(pose(r, c));
    return arr;
}

Eigen::Matrix4d pose_from_json(const ordered_json& arr) {
    Eigen::Matrix4d pose;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) pose(r, c) = arr[static_cast<size_t>(r * 4 + c)].get<double>();
    return pose;
}

std::string cloud_path(const std::string& node_id) { return "clouds/" + node_id + ".kpc"; }

}  // namespace

std::string encode_kpc(const PointCloud& cloud, float voxel_size) {
    std::string payload;
    payload.reserve(cloud.points.size() * 12);
    for (const auto& p : cloud.points) {
        put_u32(payload, float_bits(p.x()));
        put_u32(payload, float_bits(p.y()));
        put_u32(payload, float_bits(p.z()));
    }
    std::string out = "KPC1";
    put_u32(out, static_cast<uint32_t>(cloud.points.size()));
    put_u32(out, float_bits(voxel_size));
    put_u32(out, fnv1a32(payload.data(), payload.size()));
    out += payload;
    return out;
}

PointCloud decode_kpc(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "KPC1") != 0)
        throw Error(ErrorCode::CorruptSidecar, "bad KPC header");
    const uint32_t count = get_u32(bytes, 4);
    const uint32_t checksum = get_u32(bytes, 12);
    if (bytes.size() != 16 + static_cast<size_t>(count) * 12)
        throw Error(ErrorCode::CorruptSidecar, "KPC size mismatch");
    if (fnv1a32(bytes.data() + 16, bytes.size() - 16) != checksum)
        throw Error(ErrorCode::CorruptSidecar, "KPC checksum mismatch");
    PointCloud cloud;
    cloud.points.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        const size_t base = 16 + static_cast<size_t>(i) * 12;
        cloud.points[i] = Eigen::Vector3f(bits_float(get_u32(bytes, base)),
                                          bits_float(get_u32(bytes, base + 4)),
                                          bits_float(get_u32(bytes, base + 8)));
    }
    return cloud;
}

SerializedGraph serialize(const SceneGraph& graph) {
    SerializedGraph out;
    ordered_json doc;
    doc["keysg_schema"] = graph.schema_version;
    doc["metadata"] = {{"provider", graph.provider_name},
                       {"config_hash", graph.config_hash},
                       {"config", graph.config_text}};

    ordered_json floors = ordered_json::array();
    for (const auto& floor : graph.floors) {
        ordered_json jf;
        jf["id"] = floor.id;
        jf["index"] = floor.index;
        jf["z_min"] = floor.z_min;
        jf["z_max"] = floor.z_max;
        jf["summary"] = floor.summary;
        ordered_json rooms = ordered_json::array();
        for (const auto& room : floor.rooms) {
            ordered_json jr;
            jr["id"] = room.id;
            jr["summary"] = room.summary;
            jr["coverage"] = room.coverage;
            jr["flags"] = room.flags;
            jr["object_tags"] = room.object_tags;
            jr["functional_tags"] = room.functional_tags;
            ordered_json region;
            region["cell_size"] = room.region.cell_size;
            region["origin"] = {room.region.grid_origin.x(), room.region.grid_origin.y()};
            region["width"] = room.region.grid_width;
            region["height"] = room.region.grid_height;
            region["mask_runs"] = bits_to_runs(room.region.mask);
            ordered_json polygon = ordered_json::array();
            for (const auto& v : room.region.polygon) polygon.push_back({v.x(), v.y()});
            region["polygon"] = polygon;
            jr["region"] = region;
            jr["cloud"] = cloud_path(room.id);
            out.sidecars[cloud_path(room.id)] =
                encode_kpc(room.region.cloud, static_cast<float>(room.region.cell_size));

            ordered_json keyframes = ordered_json::array();
            for (const auto& kf : room.keyframes) {
                ordered_json jk;
                jk["frame"] = kf.frame;
                jk["pose"] = pose_to_json(kf.pose);
                jk["color"] = kf.color_path;
                jk["depth"] = kf.depth_path;
                jk["description"] = kf.description;
                jk["object_tags"] = kf.tags.object_tags;
                jk["functional_tags"] = kf.tags.functional_tags;
                keyframes.push_back(jk);
            }
            jr["keyframes"] = keyframes;

            ordered_json objects = ordered_json::array();
            for (const auto& object : room.objects) {
                ordered_json jo;
                jo["id"] = object.id;
                jo["label"] = object.label;
                jo["label_counts"] = object.label_counts;  // std::map: sorted keys
                jo["containment"] = object.containment;
                jo["best_view_index"] = object.best_view_index;
                ordered_json views = ordered_json::array();
                for (const auto& view : object.views) {
                    ordered_json jv;
                    jv["frame"] = view.frame;
                    jv["score"] = view.score;
                    jv["mask"] = mask_to_json(view.mask);
                    views.push_back(jv);
                }
                jo["views"] = views;
                if (object.has_embedding) {
                    ordered_json emb = ordered_json::array();
                    for (float v : object.embedding.vec) emb.push_back(v);
                    jo["embedding"] = emb;
                }
                jo["cloud"] = cloud_path(object.id);
                out.sidecars[cloud_path(object.id)] = encode_kpc(object.cloud, 0.0f);
                ordered_json elements = ordered_json::array();
                for (const auto& fe : object.functional_elements) {
                    ordered_json je;
                    je["id"] = fe.id;
                    je["label"] = fe.label;
                    je["source_frame"] = fe.source_frame;
                    je["cloud"] = cloud_path(fe.id);
                    out.sidecars[cloud_path(fe.id)] = encode_kpc(fe.cloud, 0.0f);
                    elements.push_back(je);
                }
                jo["functional_elements"] = elements;
                objects.push_back(jo);
            }
            jr["objects"] = objects;
            rooms.push_back(jr);
        }
        jf["rooms"] = rooms;
        floors.push_back(jf);
    }
    doc["floors"] = floors;
    out.graph_json = doc.dump(2) + "\n";
    return out;
}

SceneGraph deserialize(const std::string& graph_json,
                       const std::function<std::string(const std::string&)>& read_sidecar) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(graph_json);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("graph.json parse: ") + e.what());
    }
    const int schema = doc.value("keysg_schema", -1);
    if (schema != 1)
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "keysg_schema " + std::to_string(schema) + " unsupported");

    SceneGraph graph;
    graph.schema_version = schema;
    const auto& meta = doc.at("metadata");
    graph.provider_name = meta.value("provider", "");
    graph.config_hash = meta.value("config_hash", "");
    graph.config_text = meta.value("config", "");

    for (const auto& jf : doc.value("floors", ordered_json::array())) {
        FloorNode floor;
        floor.id = jf.at("id").get<std::string>();
        floor.index = jf.at("index").get<int>();
        floor.z_min = jf.at("z_min").get<double>();
        floor.z_max = jf.at("z_max").get<double>();
        floor.summary = jf.at("summary").get<std::string>();
        for (const auto& jr : jf.value("rooms", ordered_json::array())) {
            RoomNode room;
            room.id = jr.at("id").get<std::string>();
            room.summary = jr.at("summary").get<std::string>();
            room.coverage = jr.at("coverage").get<double>();
            room.flags = jr.at("flags").get<std::vector<std::string>>();
            room.object_tags = jr.at("object_tags").get<std::vector<std::string>>();
            room.functional_tags = jr.at("functional_tags").get<std::vector<std::string>>();
            const auto& region = jr.at("region");
            room.region.index = static_cast<int>(floor.rooms.size());
            room.region.floor_index = floor.index;
            room.region.cell_size = region.at("cell_size").get<double>();
            room.region.grid_origin =
                Eigen::Vector2d(region.at("origin")[0].get<double>(),
                                region.at("origin")[1].get<double>());
            room.region.grid_width = region.at("width").get<int>();
            room.region.grid_height = region.at("height").get<int>();
            room.region.mask = runs_to_bits(
                region.at("mask_runs").get<std::vector<int64_t>>(),
                static_cast<size_t>(room.region.grid_width) * room.region.grid_height);
            for (const auto& v : region.at("polygon"))
                room.region.polygon.emplace_back(v[0].get<double>(), v[1].get<double>());
            room.region.cloud = decode_kpc(read_sidecar(jr.at("cloud").get<std::string>()));

            for (const auto& jk : jr.value("keyframes", ordered_json::array())) {
                KeyframeRecord kf;
                kf.frame = jk.at("frame").get<int>();
                kf.pose = pose_from_json(jk.at("pose"));
                kf.color_path = jk.at("color").get<std::string>();
                kf.depth_path = jk.at("depth").get<std::string>();
                kf.description = jk.at("description").get<std::string>();
                kf.tags.object_tags = jk.at("object_tags").get<std::vector<std::string>>();
                kf.tags.functional_tags =
                    jk.at("functional_tags").get<std::vector<std::string>>();
                room.keyframes.push_back(std::move(kf));
            }
            for (const auto& jo : jr.value("objects", ordered_json::array())) {
                ObjectNode object;
                object.id = jo.at("id").get<std::string>();
                object.label = jo.at("label").get<std::string>();
                object.label_counts = jo.at("label_counts").get<std::map<std::string, int>>();
                object.containment = jo.at("containment").get<std::string>();
                object.best_view_index = jo.at("best_view_index").get<int>();
                for (const auto& jv : jo.value("views", ordered_json::array())) {
                    ObjectView view;
                    view.frame = jv.at("frame").get<int>();
                    view.score = jv.at("score").get<double>();
                    view.mask = mask_from_json(jv.at("mask"));
                    object.views.push_back(std::move(view));
                }
                if (jo.contains("embedding")) {
                    object.embedding.vec = jo.at("embedding").get<std::vector<float>>();
                    object.embedding.modality = Modality::Image;
                    object.has_embedding = true;
                }
                object.cloud = decode_kpc(read_sidecar(jo.at("cloud").get<std::string>()));
                for (const auto& je : jo.value("functional_elements", ordered_json::array())) {
                    FunctionalElementNode fe;
                    fe.id = je.at("id").get<std::string>();
                    fe.label = je.at("label").get<std::string>();
                    fe.source_frame = je.at("source_frame").get<int>();
                    fe.cloud = decode_kpc(read_sidecar(je.at("cloud").get<std::string>()));
                    object.functional_elements.push_back(std::move(fe));
                }
                room.objects.push_back(std::move(object));
            }
            floor.rooms.push_back(std::move(room));
        }
        graph.floors.push_back(std::move(floor));
    }
    graph.build_lookup();
    return graph;
}

void save_graph(const SceneGraph& graph, const std::filesystem::path& dir) {
    const SerializedGraph serialized = serialize(graph);
    std::filesystem::create_directories(dir / "clouds");
    {
        std::ofstream out(dir / "graph.json", std::ios::binary);
        out << serialized.graph_json;
    }
    for (const auto& [path, bytes] : serialized.sidecars) {
        std::ofstream out(dir / path, std::ios::binary);
        out << bytes;
    }
}

SceneGraph load_graph(const std::filesystem::path& dir) {
    std::ifstream in(dir / "graph.json", std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, (dir / "graph.json").string());
    std::string graph_json((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    return deserialize(graph_json, [&dir](const std::string& rel) {
        std::ifstream side(dir / rel, std::ios::binary);
        if (!side) throw Error(ErrorCode::CorruptSidecar, "missing sidecar " + rel);
        return std::string((std::istreambuf_iterator<char>(side)),
                           std::istreambuf_iterator<char>());
    });
}

}  // namespace keysg
