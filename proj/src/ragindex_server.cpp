#include "keysg/ragindex_server.hpp"

#include "httplib.h"
#include "json.hpp"
#include "keysg/errors.hpp"

using ordered_json = nlohmann::ordered_json;

namespace keysg {

void register_query_routes(httplib::Server& server, const SceneGraph& graph,
                           const ChunkIndex& index, Provider& provider) {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"status\":\"ok\"}", "application/json");
    });
    server.Post("/query", [&graph, &index, &provider](const httplib::Request& req,
                                                      httplib::Response& res) {
        ordered_json out;
        try {
            const auto body = ordered_json::parse(req.body);
            const std::string query = body.at("q").get<std::string>();
            AnswerResult result = answer(query, graph, index, provider);
            out["text"] = result.text;
            out["node_ids"] = result.grounded_node_ids;
            out["ungrounded_fallback"] = result.ungrounded_fallback;
            out["trace"] = ordered_json::parse(result.trace.to_json());
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            out["error"] = e.what();
            res.status = 400;
            res.set_content(out.dump(), "application/json");
        } catch (const nlohmann::json::exception& e) {
            out["error"] = std::string("bad request: ") + e.what();
            res.status = 400;
            res.set_content(out.dump(), "application/json");
        }
    });
}

}  // namespace keysg
