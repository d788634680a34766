#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "keysg/hierseg.hpp"
#include "keysg/objects.hpp"
#include "keysg/providers.hpp"

namespace keysg {

struct KeyframeRecord {
    int frame = 0;
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    std::string color_path;  // relative to the capture root
    std::string depth_path;
    std::string description;
    TagResult tags;

    std::string node_id() const;  // "frame_%06d"
};

struct FunctionalElementNode {
    std::string id;
    std::string label;
    int source_frame = 0;
    PointCloud cloud;
};

struct ObjectNode {
    std::string id;
    std::string label;  // modal detection label
    std::map<std::string, int> label_counts;
    PointCloud cloud;
    std::vector<ObjectView> views;
    int best_view_index = -1;
    Embedding embedding;
    bool has_embedding = false;
    std::string containment = "inside";  // or "nearest"
    std::vector<FunctionalElementNode> functional_elements;

    Eigen::Vector3f centroid() const;
};

struct RoomNode {
    std::string id;
    RoomRegion region;
    std::vector<KeyframeRecord> keyframes;
    std::vector<ObjectNode> objects;
    std::string summary;
    std::vector<std::string> object_tags;      // union of keyframe object tags
    std::vector<std::string> functional_tags;  // union of keyframe functional tags
    double coverage = 0.0;
    std::vector<std::string> flags;
};

struct FloorNode {
    std::string id;
    int index = 0;
    double z_min = 0.0, z_max = 0.0;
    std::vector<RoomNode> rooms;
    std::string summary;
};

enum class NodeLevel { Building, Floor, Room, Object, FunctionalElement };

// Immutable after assemble; all access is read-only.
struct SceneGraph {
    int schema_version = 1;
    std::string provider_name;
    std::string config_hash;
    std::string config_text;  // effective config, canonical key=value lines
    std::vector<FloorNode> floors;

    struct NodeRef {
        NodeLevel level = NodeLevel::Building;
        int floor = -1, room = -1, object = -1, element = -1;
    };

    void build_lookup();
    NodeRef lookup(const std::string& id) const;  // throws UnknownId
    bool contains(const std::string& id) const;
    // Ids of the node's direct children (rooms of a floor, objects of a room,
    // elements of an object).
    std::vector<std::string> children(const std::string& id) const;

    const FloorNode& floor_at(const NodeRef& ref) const;
    const RoomNode& room_at(const NodeRef& ref) const;
    const ObjectNode& object_at(const NodeRef& ref) const;
    const FunctionalElementNode& element_at(const NodeRef& ref) const;

    static constexpr const char* kRootId = "building";

private:
    std::map<std::string, NodeRef> lookup_;
};

// Places each object under the room containing its centroid; objects whose
// centroid lies in no room attach to the nearest room by polygon distance and
// are flagged "containment: nearest". Throws InconsistentIds on duplicates.
SceneGraph assemble(std::vector<FloorNode> floors, std::vector<ObjectNode> objects,
                    const std::string& provider_name, const std::string& config_text,
                    const std::string& config_hash);

// --- serialization ---
// graph.json (deterministic key order, shortest round-trip floats) plus one
// little-endian float32 sidecar per node cloud under clouds/<node>.kpc.

struct SerializedGraph {
    std::string graph_json;
    std::map<std::string, std::string> sidecars;  // relative path -> bytes
};

SerializedGraph serialize(const SceneGraph& graph);
SceneGraph deserialize(const std::string& graph_json,
                       const std::function<std::string(const std::string&)>& read_sidecar);

void save_graph(const SceneGraph& graph, const std::filesystem::path& dir);
SceneGraph load_graph(const std::filesystem::path& dir);

// .kpc sidecar payload: 16-byte header (magic "KPC1", u32 point count,
// f32 voxel size, u32 FNV-1a checksum of the payload), then N xyz float32
// triplets, all little-endian.
std::string encode_kpc(const PointCloud& cloud, float voxel_size);
PointCloud decode_kpc(const std::string& bytes);  // throws CorruptSidecar

}  // namespace keysg
