#include "keysg/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "keysg/errors.hpp"

namespace keysg {

std::string KeyframeRecord::node_id() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "frame_%06d", frame);
    return buf;
}

Eigen::Vector3f ObjectNode::centroid() const {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (const auto& p : cloud.points) acc += p.cast<double>();
    if (!cloud.points.empty()) acc /= static_cast<double>(cloud.points.size());
    return acc.cast<float>();
}

void SceneGraph::build_lookup() {
    lookup_.clear();
    auto insert = [&](const std::string& id, const NodeRef& ref) {
        if (id.empty()) throw Error(ErrorCode::InconsistentIds, "empty node id");
        if (!lookup_.emplace(id, ref).second)
            throw Error(ErrorCode::InconsistentIds, "duplicate node id " + id);
    };
    insert(kRootId, NodeRef{NodeLevel::Building, -1, -1, -1, -1});
    for (int f = 0; f < static_cast<int>(floors.size()); ++f) {
        insert(floors[static_cast<size_t>(f)].id, NodeRef{NodeLevel::Floor, f, -1, -1, -1});
        const auto& rooms = floors[static_cast<size_t>(f)].rooms;
        for (int r = 0; r < static_cast<int>(rooms.size()); ++r) {
            insert(rooms[static_cast<size_t>(r)].id, NodeRef{NodeLevel::Room, f, r, -1, -1});
            const auto& objects = rooms[static_cast<size_t>(r)].objects;
            for (int o = 0; o < static_cast<int>(objects.size()); ++o) {
                insert(objects[static_cast<size_t>(o)].id,
                       NodeRef{NodeLevel::Object, f, r, o, -1});
                const auto& elements = objects[static_cast<size_t>(o)].functional_elements;
                for (int e = 0; e < static_cast<int>(elements.size()); ++e)
                    insert(elements[static_cast<size_t>(e)].id,
                           NodeRef{NodeLevel::FunctionalElement, f, r, o, e});
            }
        }
    }
}

SceneGraph::NodeRef SceneGraph::lookup(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) throw Error(ErrorCode::UnknownId, id);
    return it->second;
}

bool SceneGraph::contains(const std::string& id) const { return lookup_.count(id) != 0; }

std::vector<std::string> SceneGraph::children(const std::string& id) const {
    const NodeRef ref = lookup(id);
    std::vector<std::string> out;
    switch (ref.level) {
        case NodeLevel::Building:
            for (const auto& floor : floors) out.push_back(floor.id);
            break;
        case NodeLevel::Floor:
            for (const auto& room : floor_at(ref).rooms) out.push_back(room.id);
            break;
        case NodeLevel::Room:
            for (const auto& object : room_at(ref).objects) out.push_back(object.id);
            break;
        case NodeLevel::Object:
            for (const auto& fe : object_at(ref).functional_elements) out.push_back(fe.id);
            break;
        case NodeLevel::FunctionalElement:
            break;
    }
    return out;
}

const FloorNode& SceneGraph::floor_at(const NodeRef& ref) const {
    return floors.at(static_cast<size_t>(ref.floor));
}
const RoomNode& SceneGraph::room_at(const NodeRef& ref) const {
    return floor_at(ref).rooms.at(static_cast<size_t>(ref.room));
}
const ObjectNode& SceneGraph::object_at(const NodeRef& ref) const {
    return room_at(ref).objects.at(static_cast<size_t>(ref.object));
}
const FunctionalElementNode& SceneGraph::element_at(const NodeRef& ref) const {
    return object_at(ref).functional_elements.at(static_cast<size_t>(ref.element));
}

namespace {

double point_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
    const Eigen::Vector2d ab = b - a;
    const double len_sq = ab.squaredNorm();
    if (len_sq == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

double polygon_distance(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon) {
    if (polygon.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < polygon.size(); ++i)
        best = std::min(best, point_to_segment(p, polygon[i], polygon[(i + 1) % polygon.size()]));
    return best;
}

}  // namespace

SceneGraph assemble(std::vector<FloorNode> floors, std::vector<ObjectNode> objects,
                    const std::string& provider_name, const std::string& config_text,
                    const std::string& config_hash) {
    SceneGraph graph;
    graph.provider_name = provider_name;
    graph.config_text = config_text;
    graph.config_hash = config_hash;
    graph.floors = std::move(floors);

    // Spatial containment: centroid decides the parent room.
    for (auto& object : objects) {
        if (object.cloud.empty())
            throw Error(ErrorCode::InconsistentIds, "object with empty cloud: " + object.id);
        const Eigen::Vector3f c = object.centroid();
        const Eigen::Vector2d cxy(c.x(), c.y());

        FloorNode* best_floor = nullptr;
        RoomNode* inside_room = nullptr;
        for (auto& floor : graph.floors) {
            const bool in_slab = c.z() >= floor.z_min && c.z() < floor.z_max;
            if (!in_slab) continue;
            best_floor = &floor;
            for (auto& room : floor.rooms)
                if (point_in_polygon(cxy, room.region.polygon)) {
                    inside_room = &room;
                    break;
                }
            break;
        }
        if (inside_room) {
            object.containment = "inside";
            inside_room->objects.push_back(std::move(object));
            continue;
        }
        // Fall back to the nearest room by polygon distance, preferring the
        // containing floor slab, then all floors.
        RoomNode* nearest = nullptr;
        double nearest_dist = std::numeric_limits<double>::infinity();
        auto consider = [&](FloorNode& floor) {
            for (auto& room : floor.rooms) {
                const double d = polygon_distance(cxy, room.region.polygon);
                if (d < nearest_dist || (d == nearest_dist && nearest && room.id < nearest->id)) {
                    nearest_dist = d;
                    nearest = &room;
                }
            }
        };
        if (best_floor) consider(*best_floor);
        if (!nearest)
            for (auto& floor : graph.floors) consider(floor);
        if (!nearest) throw Error(ErrorCode::InconsistentIds, "no room to attach " + object.id);
        object.containment = "nearest";
        nearest->objects.push_back(std::move(object));
    }

    // Keyframes must be referenced by exactly one room.
    std::set<int> seen_frames;
    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms)
            for (const auto& kf : room.keyframes)
                if (!seen_frames.insert(kf.frame).second)
                    throw Error(ErrorCode::InconsistentIds,
                                "keyframe " + std::to_string(kf.frame) + " in multiple rooms");

    graph.build_lookup();
    return graph;
}

}  // namespace keysg
