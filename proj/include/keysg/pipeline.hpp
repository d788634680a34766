#pragma once

#include <memory>
#include <string>
#include <vector>

#include "keysg/config.hpp"
#include "keysg/providers.hpp"
#include "keysg/ragindex.hpp"
#include "keysg/scene_graph.hpp"

namespace keysg {

struct BuildOptions {
    std::string input_dir;
    std::string out_dir;
    Config config;
    bool mock = false;            // or KEYSG_MOCK=1
    std::string mock_fixtures;    // default: <input>/mock_fixtures.json when present
    std::string cache_dir;        // default: <out>/cache, or KEYSG_CACHE_DIR
    std::string providers_toml;   // live mode endpoints
};

struct BuildResult {
    int exit_code = 0;  // 0 complete, 2 partial (provider failures skipped)
    std::vector<std::string> log;
    size_t provider_calls = 0;
    std::vector<int> skipped_frames;
};

// Provider per options/environment, wrapped in the disk cache.
std::shared_ptr<Provider> make_provider(const BuildOptions& options);

// Runs the full capture-to-index pipeline and writes graph.json, cloud
// sidecars, index files, and build.log under out_dir.
BuildResult build_scene(const BuildOptions& options);

struct LoadedScene {
    SceneGraph graph;
    ChunkIndex index;
};

LoadedScene load_scene(const std::string& graph_dir);

}  // namespace keysg
