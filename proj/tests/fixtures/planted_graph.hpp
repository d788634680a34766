#pragma once

#include <string>
#include <vector>

#include "keysg/scene_graph.hpp"

namespace keysg::fixtures {

// A hand-planted 2-floor / 4-room / 20-object graph with summaries that name
// the rooms and floors, for retrieval tests. All node texts avoid bare
// articles so bag-of-token scores stay clean.
struct PlantedObject {
    std::string id;
    std::string label;
    std::string room_id;
    std::string room_name;
    std::string floor_name;
};

struct PlantedGraph {
    SceneGraph graph;
    std::vector<PlantedObject> objects;
};

PlantedGraph planted_two_floor_graph();

}  // namespace keysg::fixtures
