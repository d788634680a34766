#include "keysg/ragindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"
#include "keysg/errors.hpp"
#include "keysg/parallel.hpp"

using ordered_json = nlohmann::ordered_json;

namespace keysg {

const char* chunk_type_name(ChunkType type) {
    switch (type) {
        case ChunkType::Floor: return "floor";
        case ChunkType::Room: return "room";
        case ChunkType::Frame: return "frame";
        case ChunkType::Object: return "object";
    }
    return "?";
}

void EmbeddingStore::add(const std::string& id, const std::string& node_id,
                         const Embedding& embedding) {
    if (dim == 0) dim = static_cast<int>(embedding.vec.size());
    if (dim != static_cast<int>(embedding.vec.size()))
        throw Error(ErrorCode::InvalidArgument, "embedding dimension mismatch in store");
    ids.push_back(id);
    node_ids.push_back(node_id);
    matrix.insert(matrix.end(), embedding.vec.begin(), embedding.vec.end());
}

const Chunk* ChunkIndex::chunk_by_id(const std::string& id) const {
    for (const auto& chunk : chunks)
        if (chunk.id == id) return &chunk;
    return nullptr;
}

const Chunk* ChunkIndex::chunk_by_node(ChunkType type, const std::string& node_id) const {
    for (const auto& chunk : chunks)
        if (chunk.type == type && chunk.node_id == node_id) return &chunk;
    return nullptr;
}

std::string QueryTrace::to_json() const {
    ordered_json j;
    j["mode"] = mode;
    ordered_json steps_json = ordered_json::array();
    for (const auto& step : steps)
        steps_json.push_back(
            {{"level", step.level}, {"winner", step.winner}, {"score", step.score}});
    j["steps"] = steps_json;
    return j.dump();
}

std::vector<Chunk> chunk_graph(const SceneGraph& graph) {
    std::vector<Chunk> chunks;
    auto join = [](const std::vector<std::string>& parts) {
        std::string out;
        for (size_t i = 0; i < parts.size(); ++i) {
            if (i) out += " ";
            out += parts[i];
        }
        return out;
    };
    for (const auto& floor : graph.floors) {
        if (floor.summary.empty())
            throw Error(ErrorCode::MissingSummary, "floor " + floor.id + " has no summary");
        chunks.push_back({"floor:" + floor.id, ChunkType::Floor, floor.id, floor.summary});
        for (const auto& room : floor.rooms) {
            if (room.summary.empty())
                throw Error(ErrorCode::MissingSummary, "room " + room.id + " has no summary");
            chunks.push_back({"room:" + room.id, ChunkType::Room, room.id, room.summary});
            for (const auto& kf : room.keyframes) {
                std::string text = kf.description;
                if (!kf.tags.object_tags.empty())
                    text += (text.empty() ? "" : " ") + std::string("tags: ") +
                            join(kf.tags.object_tags);
                if (text.empty()) text = kf.node_id();
                chunks.push_back({"frame:" + kf.node_id(), ChunkType::Frame, kf.node_id(), text});
            }
            for (const auto& object : room.objects) {
                std::vector<std::string> labels;
                for (const auto& [label, count] : object.label_counts) labels.push_back(label);
                std::string text = object.label + ". room: " + room.id;
                if (!labels.empty()) text += ". tags: " + join(labels);
                std::set<std::string> part_labels;
                for (const auto& fe : object.functional_elements) part_labels.insert(fe.label);
                if (!part_labels.empty())
                    text += ". parts: " +
                            join(std::vector<std::string>(part_labels.begin(), part_labels.end()));
                chunks.push_back({"object:" + object.id, ChunkType::Object, object.id, text});
            }
        }
    }
    return chunks;
}

ChunkIndex build_index(const std::vector<Chunk>& chunks, Provider& provider, int jobs) {
    ChunkIndex index;
    index.chunks = chunks;
    std::vector<Embedding> embeddings(chunks.size());
    parallel_for(chunks.size(), jobs,
                 [&](size_t i) { embeddings[i] = provider.embed_text(chunks[i].text); });
    for (size_t i = 0; i < chunks.size(); ++i)
        index.text_stores[chunks[i].type].add(chunks[i].id, chunks[i].node_id, embeddings[i]);
    return index;
}

void add_visual_stores(ChunkIndex& index, const SceneGraph& graph,
                       const std::vector<PosedFrame>& frames, Provider& provider, int jobs) {
    std::map<int, const PosedFrame*> frame_of;
    for (const auto& frame : frames) frame_of[frame.index] = &frame;

    std::vector<const KeyframeRecord*> records;
    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms)
            for (const auto& kf : room.keyframes) records.push_back(&kf);
    std::vector<Embedding> embeddings(records.size());
    parallel_for(records.size(), jobs, [&](size_t i) {
        auto it = frame_of.find(records[i]->frame);
        if (it == frame_of.end())
            throw Error(ErrorCode::InconsistentIds,
                        "keyframe " + std::to_string(records[i]->frame) + " not loaded");
        embeddings[i] = provider.embed_image(it->second->color);
    });
    for (size_t i = 0; i < records.size(); ++i)
        index.frame_visual.add("vis:" + records[i]->node_id(), records[i]->node_id(),
                               embeddings[i]);

    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms)
            for (const auto& object : room.objects)
                if (object.has_embedding)
                    index.object_visual.add("vis:" + object.id, object.id, object.embedding);
}

namespace {

double dot_row(const EmbeddingStore& store, size_t row, const Embedding& query) {
    if (static_cast<int>(query.vec.size()) != store.dim)
        throw Error(ErrorCode::InvalidArgument, "query dimension mismatch");
    const float* r = store.row(row);
    double acc = 0.0;
    for (int d = 0; d < store.dim; ++d) acc += static_cast<double>(r[d]) * query.vec[static_cast<size_t>(d)];
    return acc;
}

std::vector<ScoredHit> rank_all(const EmbeddingStore& store, const Embedding& query) {
    std::vector<ScoredHit> hits(store.rows());
    for (size_t i = 0; i < store.rows(); ++i)
        hits[i] = {store.ids[i], store.node_ids[i], dot_row(store, i, query)};
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return hits;
}

std::vector<ScoredHit> rank_subset(const EmbeddingStore& store, const Embedding& query,
                                   const std::set<std::string>& allowed_nodes) {
    std::vector<ScoredHit> hits;
    for (size_t i = 0; i < store.rows(); ++i) {
        if (!allowed_nodes.count(store.node_ids[i])) continue;
        hits.push_back({store.ids[i], store.node_ids[i], dot_row(store, i, query)});
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return hits;
}

const EmbeddingStore& store_or_throw(const ChunkIndex& index, ChunkType type) {
    auto it = index.text_stores.find(type);
    if (it == index.text_stores.end() || it->second.rows() == 0)
        throw Error(ErrorCode::EmptyStore,
                    std::string("no chunks of type ") + chunk_type_name(type));
    return it->second;
}

}  // namespace

RetrievalResult topk(const EmbeddingStore& store, const Embedding& query, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (store.rows() == 0) throw Error(ErrorCode::EmptyStore, "topk over empty store");
    RetrievalResult result;
    result.hits = rank_all(store, query);
    if (result.hits.size() > static_cast<size_t>(k)) result.hits.resize(static_cast<size_t>(k));
    return result;
}

RetrievalResult retrieve_hierarchical(const std::string& query, const SceneGraph& graph,
                                      const ChunkIndex& index, RetrievalMode mode,
                                      Provider& provider) {
    RetrievalResult result;
    std::optional<Embedding> floor_query, room_query;
    Embedding object_query;

    if (mode == RetrievalMode::Parsed) {
        try {
            const HierQuery parts = provider.decompose_hierarchical(query);
            if (parts.floor) floor_query = provider.embed_text(*parts.floor);
            if (parts.room) room_query = provider.embed_text(*parts.room);
            object_query = provider.embed_text(parts.object);
            result.trace.mode = "parsed";
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ParseFailure) throw;
            const Embedding whole = provider.embed_text(query);
            floor_query = whole;
            room_query = whole;
            object_query = whole;
            result.trace.mode = "raw-fallback";
        }
    } else {
        const Embedding whole = provider.embed_text(query);
        floor_query = whole;
        room_query = whole;
        object_query = whole;
        result.trace.mode = "raw";
    }

    // Floor level: argmax when a floor query exists, otherwise all floors.
    std::set<std::string> floor_ids;
    for (const auto& floor : graph.floors) floor_ids.insert(floor.id);
    std::set<std::string> selected_floors;
    if (floor_query && !graph.floors.empty()) {
        const auto ranked = rank_subset(store_or_throw(index, ChunkType::Floor), *floor_query,
                                        floor_ids);
        if (!ranked.empty()) {
            selected_floors.insert(ranked.front().node_id);
            result.trace.steps.push_back({"floor", ranked.front().node_id,
                                          ranked.front().score});
        }
    }
    if (selected_floors.empty()) selected_floors = floor_ids;

    // Room level within the selected floors.
    std::set<std::string> room_ids;
    for (const auto& floor : graph.floors) {
        if (!selected_floors.count(floor.id)) continue;
        for (const auto& room : floor.rooms) room_ids.insert(room.id);
    }
    std::set<std::string> selected_rooms;
    if (room_query && !room_ids.empty()) {
        const auto ranked =
            rank_subset(store_or_throw(index, ChunkType::Room), *room_query, room_ids);
        if (!ranked.empty()) {
            selected_rooms.insert(ranked.front().node_id);
            result.trace.steps.push_back({"room", ranked.front().node_id,
                                          ranked.front().score});
        }
    }
    if (selected_rooms.empty()) selected_rooms = room_ids;

    // Object level inside the selected rooms.
    std::set<std::string> object_ids;
    for (const auto& floor : graph.floors)
        for (const auto& room : floor.rooms) {
            if (!selected_rooms.count(room.id)) continue;
            for (const auto& object : room.objects) object_ids.insert(object.id);
        }
    if (object_ids.empty()) throw Error(ErrorCode::EmptyStore, "no objects under selected room");
    result.hits = rank_subset(store_or_throw(index, ChunkType::Object), object_query, object_ids);
    if (!result.hits.empty())
        result.trace.steps.push_back({"object", result.hits.front().node_id,
                                      result.hits.front().score});
    return result;
}

ContextBundle retrieve_multimodal(const std::string& target,
                                  const std::vector<std::string>& anchors,
                                  const SceneGraph& graph, const ChunkIndex& index,
                                  Provider& provider, int k, int token_budget) {
    if (target.empty()) throw Error(ErrorCode::InvalidArgument, "empty target");
    const Embedding target_emb = provider.embed_text(target);
    const EmbeddingStore& object_store = store_or_throw(index, ChunkType::Object);

    ContextBundle bundle;
    std::set<std::string> seen;

    auto push = [&](const std::string& chunk_id, const std::string& node_id,
                    const std::string& text, double score, const char* kind) {
        if (!seen.insert(chunk_id).second) return;
        bundle.items.push_back({chunk_id, node_id, text, score, kind});
    };

    auto text_of = [&](const std::string& chunk_id) {
        const Chunk* chunk = index.chunk_by_id(chunk_id);
        return chunk ? chunk->text : chunk_id;
    };

    for (const auto& hit : topk(object_store, target_emb, k).hits)
        push(hit.id, hit.node_id, text_of(hit.id), hit.score, "object");
    for (const auto& anchor : anchors) {
        if (anchor.empty()) continue;
        const Embedding anchor_emb = provider.embed_text(anchor);
        for (const auto& hit : topk(object_store, anchor_emb, k).hits)
            push(hit.id, hit.node_id, text_of(hit.id), hit.score, "anchor");
    }
    if (index.frame_visual.rows() > 0) {
        for (const auto& hit : topk(index.frame_visual, target_emb, k).hits) {
            const Chunk* chunk = index.chunk_by_node(ChunkType::Frame, hit.node_id);
            push(hit.id, hit.node_id, chunk ? chunk->text : hit.node_id, hit.score, "keyframe");
        }
    }

    // Path context from a raw descent with the target embedding.
    RetrievalResult descent =
        retrieve_hierarchical(target, graph, index, RetrievalMode::Raw, provider);
    bundle.trace = descent.trace;
    for (const auto& step : descent.trace.steps) {
        if (step.level == "floor")
            push("floor:" + step.winner, step.winner, text_of("floor:" + step.winner), step.score,
                 "path");
        if (step.level == "room")
            push("room:" + step.winner, step.winner, text_of("room:" + step.winner), step.score,
                 "path");
    }

    // Token budget: path chunks are the floor of the bundle, everything else
    // competes by score.
    auto tokens_of = [](const std::string& text) { return tokenize(text).size(); };
    size_t used = 0;
    std::vector<BundleItem> kept_non_path;
    std::vector<const BundleItem*> candidates;
    for (const auto& item : bundle.items)
        if (item.kind != "path") candidates.push_back(&item);
    std::sort(candidates.begin(), candidates.end(), [](const BundleItem* a, const BundleItem* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->chunk_id < b->chunk_id;
    });
    std::set<std::string> kept_ids;
    for (const BundleItem* item : candidates) {
        const size_t cost = tokens_of(item->text);
        if (used + cost > static_cast<size_t>(token_budget)) continue;
        used += cost;
        kept_ids.insert(item->chunk_id);
    }
    std::vector<BundleItem> final_items;
    for (const auto& item : bundle.items)
        if (item.kind == "path" || kept_ids.count(item.chunk_id)) final_items.push_back(item);
    bundle.items = std::move(final_items);
    return bundle;
}

AnswerResult answer(const std::string& query, const SceneGraph& graph, const ChunkIndex& index,
                    Provider& provider, int k, int token_budget) {
    ParsedQuery parsed;
    try {
        parsed = provider.parse_query(query);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseFailure) throw;
        parsed.target = query;
    }
    if (parsed.target.empty()) parsed.target = query;

    ContextBundle bundle =
        retrieve_multimodal(parsed.target, parsed.anchors, graph, index, provider, k,
                            token_budget);
    std::vector<ContextItem> context;
    for (const auto& item : bundle.items) context.push_back({item.node_id, item.text});

    AnswerResult result;
    result.trace = bundle.trace;
    result.text = provider.generate_answer(query, context);

    // Grounded ids: bracketed tokens naming bundle nodes, in citation order.
    std::set<std::string> bundle_nodes;
    for (const auto& item : bundle.items) bundle_nodes.insert(item.node_id);
    std::set<std::string> cited;
    size_t pos = 0;
    while ((pos = result.text.find('[', pos)) != std::string::npos) {
        const size_t close = result.text.find(']', pos);
        if (close == std::string::npos) break;
        const std::string id = result.text.substr(pos + 1, close - pos - 1);
        if (bundle_nodes.count(id) && graph.contains(id) && cited.insert(id).second)
            result.grounded_node_ids.push_back(id);
        pos = close + 1;
    }
    if (result.grounded_node_ids.empty()) {
        // Fall back to the top retrieval result and flag the answer.
        result.ungrounded_fallback = true;
        for (const auto& item : bundle.items)
            if (item.kind == "object") {
                result.grounded_node_ids.push_back(item.node_id);
                break;
            }
        if (result.grounded_node_ids.empty() && !bundle.items.empty())
            result.grounded_node_ids.push_back(bundle.items.front().node_id);
    }
    return result;
}

// --- persistence ---

namespace {

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

}  // namespace

std::string encode_kvx(const EmbeddingStore& store) {
    std::string out = "KVX1";
    put_u32(out, static_cast<uint32_t>(store.rows()));
    put_u32(out, static_cast<uint32_t>(store.dim));
    for (float v : store.matrix) {
        uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        put_u32(out, bits);
    }
    return out;
}

void decode_kvx(const std::string& bytes, EmbeddingStore& store) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "KVX1") != 0)
        throw Error(ErrorCode::SchemaError, "bad KVX header");
    const uint32_t rows = get_u32(bytes, 4);
    const uint32_t dim = get_u32(bytes, 8);
    if (bytes.size() != 12 + static_cast<size_t>(rows) * dim * 4)
        throw Error(ErrorCode::SchemaError, "KVX size mismatch");
    store.dim = static_cast<int>(dim);
    store.matrix.resize(static_cast<size_t>(rows) * dim);
    for (size_t i = 0; i < store.matrix.size(); ++i) {
        const uint32_t bits = get_u32(bytes, 12 + i * 4);
        std::memcpy(&store.matrix[i], &bits, sizeof(float));
    }
}

namespace {

void save_store(const EmbeddingStore& store, const std::vector<const Chunk*>* chunks,
                const std::filesystem::path& dir, const std::string& name) {
    {
        std::ofstream out(dir / (name + ".jsonl"), std::ios::binary);
        for (size_t i = 0; i < store.rows(); ++i) {
            ordered_json j;
            j["id"] = store.ids[i];
            j["node"] = store.node_ids[i];
            if (chunks) j["text"] = (*chunks)[i]->text;
            out << j.dump() << "\n";
        }
    }
    std::ofstream out(dir / (name + ".vec"), std::ios::binary);
    out << encode_kvx(store);
}

void load_store(EmbeddingStore& store, std::vector<Chunk>* chunks, ChunkType type,
                const std::filesystem::path& dir, const std::string& name) {
    std::ifstream jsonl(dir / (name + ".jsonl"));
    if (!jsonl) return;  // absent store type is fine
    std::string line;
    while (std::getline(jsonl, line)) {
        if (line.empty()) continue;
        const ordered_json j = ordered_json::parse(line);
        store.ids.push_back(j.at("id").get<std::string>());
        store.node_ids.push_back(j.at("node").get<std::string>());
        if (chunks)
            chunks->push_back({store.ids.back(), type, store.node_ids.back(),
                               j.value("text", std::string())});
    }
    std::ifstream vec(dir / (name + ".vec"), std::ios::binary);
    if (!vec) throw Error(ErrorCode::MissingFile, (dir / (name + ".vec")).string());
    std::string bytes((std::istreambuf_iterator<char>(vec)), std::istreambuf_iterator<char>());
    decode_kvx(bytes, store);
    if (store.rows() * static_cast<size_t>(store.dim) != store.matrix.size() ||
        store.ids.size() != store.rows())
        throw Error(ErrorCode::SchemaError, "store rows misaligned: " + name);
}

}  // namespace

void save_index(const ChunkIndex& index, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto type :
         {ChunkType::Floor, ChunkType::Room, ChunkType::Frame, ChunkType::Object}) {
        auto it = index.text_stores.find(type);
        if (it == index.text_stores.end()) continue;
        std::vector<const Chunk*> chunk_rows;
        for (const auto& id : it->second.ids) chunk_rows.push_back(index.chunk_by_id(id));
        save_store(it->second, &chunk_rows, dir, chunk_type_name(type));
    }
    save_store(index.frame_visual, nullptr, dir, "frame_visual");
    save_store(index.object_visual, nullptr, dir, "object_visual");
}

ChunkIndex load_index(const std::filesystem::path& dir) {
    ChunkIndex index;
    for (const auto type :
         {ChunkType::Floor, ChunkType::Room, ChunkType::Frame, ChunkType::Object}) {
        EmbeddingStore store;
        load_store(store, &index.chunks, type, dir, chunk_type_name(type));
        if (store.rows() > 0) index.text_stores[type] = std::move(store);
    }
    load_store(index.frame_visual, nullptr, ChunkType::Frame, dir, "frame_visual");
    load_store(index.object_visual, nullptr, ChunkType::Object, dir, "object_visual");
    return index;
}

}  // namespace keysg
