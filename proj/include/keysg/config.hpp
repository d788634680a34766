#pragma once

#include <string>
#include <vector>

#include "keysg/hierseg.hpp"
#include "keysg/keyframes.hpp"
#include "keysg/objects.hpp"
#include "keysg/providers_http.hpp"

namespace keysg {

// Every tunable of the build pipeline. Values mirror the per-module defaults;
// a TOML-style config file and command-line overrides adjust them. The
// canonical text form is embedded in graph metadata for provenance.
struct Config {
    // ingest
    int stride = 4;
    double scene_voxel = 0.05;
    double max_depth = 0.0;  // <= 0: no far cutoff

    // hierseg
    FloorParams floors;
    RoomParams rooms;

    // keyframes
    KeyframeParams keyframes;

    // objects
    MergeParams merge;
    double depth_tol = 0.08;
    double theta_vis = 0.25;

    // summaries
    int summary_chunk_size = 20;

    // ragindex
    int retrieval_k = 5;
    int token_budget = 4000;

    // execution
    int jobs = 0;  // 0 = hardware concurrency

    // Applies "section.key = value" lines from a TOML-style file.
    static Config load(const std::string& path);
    // Single "section.key=value" override; throws SchemaError on unknown keys.
    void set(const std::string& dotted_key, const std::string& value);

    std::string canonical_text() const;  // sorted section.key = value lines
    std::string hash() const;            // FNV-1a 64 of the canonical text, hex

    int effective_jobs() const;
};

// providers.toml: [providers] base_url/api_key_env/prompts_dir/timeout_ms/
// max_retries/backoff_ms/max_inflight plus [providers.models] capability=model.
HttpProviderConfig load_provider_config(const std::string& path);

}  // namespace keysg
