#include "fixtures/planted_graph.hpp"

namespace keysg::fixtures {

namespace {

RoomNode planted_room(const std::string& id, const std::string& name,
                      const std::vector<std::string>& labels, double x0, double y0) {
    RoomNode room;
    room.id = id;
    room.region.polygon = {{x0, y0}, {x0 + 4, y0}, {x0 + 4, y0 + 4}, {x0, y0 + 4}};
    room.region.cell_size = 0.05;
    room.region.grid_width = 2;
    room.region.grid_height = 2;
    room.region.mask.assign(4, 1);
    std::string summary = "ROOM SUMMARY: " + name + " with";
    for (const auto& label : labels) summary += " " + label;
    room.summary = summary;
    room.object_tags = labels;
    return room;
}

}  // namespace

PlantedGraph planted_two_floor_graph() {
    struct RoomSpec {
        const char* id;
        const char* name;
        std::vector<std::string> labels;
        double x0, y0;
    };
    struct FloorSpec {
        const char* id;
        const char* name;
        double z0, z1;
        std::vector<RoomSpec> rooms;
    };
    const std::vector<FloorSpec> spec = {
        {"floor_0",
         "ground floor",
         0.0,
         3.0,
         {{"room_0_0", "kitchen", {"oven", "kettle", "mug", "fridge", "table"}, 0, 0},
          {"room_0_1", "bathroom", {"toilet", "sink", "mirror", "bathtub", "towel"}, 5, 0}}},
        {"floor_1",
         "first floor",
         3.0,
         6.0,
         {{"room_1_0", "bedroom", {"bed", "lamp", "wardrobe", "pillow", "dresser"}, 0, 0},
          {"room_1_1", "office", {"printer", "monitor", "chair", "shelf", "sofa"}, 5, 0}}},
    };

    PlantedGraph out;
    std::vector<FloorNode> floors;
    std::vector<ObjectNode> objects;
    for (const auto& fs : spec) {
        FloorNode floor;
        floor.id = fs.id;
        floor.index = static_cast<int>(floors.size());
        floor.z_min = fs.z0;
        floor.z_max = fs.z1;
        std::string floor_summary = "FLOOR SUMMARY: " + std::string(fs.name) + " with";
        for (const auto& rs : fs.rooms) floor_summary += " " + std::string(rs.name);
        floor.summary = floor_summary;
        for (const auto& rs : fs.rooms) {
            floor.rooms.push_back(planted_room(rs.id, rs.name, rs.labels, rs.x0, rs.y0));
            int slot = 0;
            for (const auto& label : rs.labels) {
                ObjectNode object;
                object.id = "obj_" + label;
                object.label = label;
                object.label_counts[label] = 3;
                const float cx = static_cast<float>(rs.x0 + 1.0 + 0.5 * slot);
                const float cz = static_cast<float>(fs.z0 + 0.5);
                for (int i = 0; i < 4; ++i)
                    object.cloud.points.emplace_back(cx + 0.02f * i, static_cast<float>(rs.y0 + 2),
                                                     cz);
                ObjectView view;
                view.frame = slot;
                view.mask = box_fill_mask(PixelBox{1, 1, 4, 4});
                object.views.push_back(view);
                objects.push_back(std::move(object));
                out.objects.push_back({"obj_" + label, label, rs.id, rs.name, fs.name});
                ++slot;
            }
        }
        floors.push_back(std::move(floor));
    }
    out.graph = assemble(std::move(floors), std::move(objects), "mock-1", "", "");
    return out;
}

}  // namespace keysg::fixtures
