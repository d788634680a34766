#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keysg/camera.hpp"
#include "keysg/providers.hpp"
#include "keysg/scene_graph.hpp"

namespace keysg {

enum class ChunkType { Floor, Room, Frame, Object };
const char* chunk_type_name(ChunkType type);

struct Chunk {
    std::string id;  // "<type>:<node_id>", deterministic
    ChunkType type = ChunkType::Object;
    std::string node_id;
    std::string text;
};

// Flat exact store: ids row-aligned with an embedding matrix.
struct EmbeddingStore {
    std::vector<std::string> ids;
    std::vector<std::string> node_ids;
    std::vector<float> matrix;  // rows * dim, row-major
    int dim = 0;

    size_t rows() const { return ids.size(); }
    const float* row(size_t i) const { return matrix.data() + i * static_cast<size_t>(dim); }
    void add(const std::string& id, const std::string& node_id, const Embedding& embedding);
};

struct ChunkIndex {
    std::vector<Chunk> chunks;
    std::map<ChunkType, EmbeddingStore> text_stores;
    EmbeddingStore frame_visual;   // keyframe image embeddings
    EmbeddingStore object_visual;  // best-view embeddings

    const Chunk* chunk_by_id(const std::string& id) const;
    const Chunk* chunk_by_node(ChunkType type, const std::string& node_id) const;
};

struct ScoredHit {
    std::string id;
    std::string node_id;
    double score = 0.0;
};

struct TraceStep {
    std::string level;  // "floor" | "room" | "object"
    std::string winner;
    double score = 0.0;
};

struct QueryTrace {
    std::string mode;  // "parsed" | "raw" | "raw-fallback"
    std::vector<TraceStep> steps;
    std::string to_json() const;
};

struct RetrievalResult {
    std::vector<ScoredHit> hits;  // descending score, ties by lexicographic id
    QueryTrace trace;
};

// Floor chunks carry floor summaries, room chunks room summaries, frame chunks
// keyframe descriptions plus tags, object chunks label plus room and tag
// context. Throws MissingSummary when a floor or room summary is absent.
std::vector<Chunk> chunk_graph(const SceneGraph& graph);

ChunkIndex build_index(const std::vector<Chunk>& chunks, Provider& provider, int jobs = 1);

// Visual stores: keyframe images through embed_image, object best-view
// embeddings straight from the graph nodes.
void add_visual_stores(ChunkIndex& index, const SceneGraph& graph,
                       const std::vector<PosedFrame>& frames, Provider& provider, int jobs = 1);

// Exact top-k by cosine over unit vectors. Ties break toward the smaller id.
RetrievalResult topk(const EmbeddingStore& store, const Embedding& query, int k);

enum class RetrievalMode { Parsed, Raw };

// Top-down descent: floor by floor-part and room by room-part in parsed mode,
// the whole-query embedding at every level in raw mode. The returned hits are
// the object ranking inside the selected room. ParseFailure falls back to raw
// and is recorded in the trace.
RetrievalResult retrieve_hierarchical(const std::string& query, const SceneGraph& graph,
                                      const ChunkIndex& index, RetrievalMode mode,
                                      Provider& provider);

struct BundleItem {
    std::string chunk_id;
    std::string node_id;
    std::string text;
    double score = 0.0;
    std::string kind;  // "object" | "anchor" | "keyframe" | "path"
};

struct ContextBundle {
    std::vector<BundleItem> items;  // objects first, then keyframes, then path
    QueryTrace trace;
};

// Top-k object chunks for the target and each anchor, top-k visual keyframes
// for the target, and the floor/room chunks on the descent path. Deduplicated;
// capped to the token budget by dropping the lowest-scoring items (path chunks
// always stay).
ContextBundle retrieve_multimodal(const std::string& target,
                                  const std::vector<std::string>& anchors,
                                  const SceneGraph& graph, const ChunkIndex& index,
                                  Provider& provider, int k = 5, int token_budget = 4000);

struct AnswerResult {
    std::string text;
    std::vector<std::string> grounded_node_ids;
    bool ungrounded_fallback = false;  // provider cited no valid node id
    QueryTrace trace;
};

AnswerResult answer(const std::string& query, const SceneGraph& graph, const ChunkIndex& index,
                    Provider& provider, int k = 5, int token_budget = 4000);

// On-disk layout: <type>.jsonl (one chunk record per line) plus <type>.vec
// ("KVX1", u32 rows, u32 dim, row-major float32, little-endian), and the two
// visual stores as frame_visual / object_visual.
void save_index(const ChunkIndex& index, const std::filesystem::path& dir);
ChunkIndex load_index(const std::filesystem::path& dir);

std::string encode_kvx(const EmbeddingStore& store);
void decode_kvx(const std::string& bytes, EmbeddingStore& store);

}  // namespace keysg
