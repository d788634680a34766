#pragma once

#include "keysg/ragindex.hpp"

namespace httplib {
class Server;
}

namespace keysg {

// POST /query {"q": "...", "mode"?: "parsed"|"raw"} -> {text, node_ids, trace};
// GET /health -> {"status":"ok"}. The graph and index must outlive the server.
void register_query_routes(httplib::Server& server, const SceneGraph& graph,
                           const ChunkIndex& index, Provider& provider);

}  // namespace keysg
