#include "keysg/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "keysg/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace keysg {

size_t PixelMask::count() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b != 0;
    return n;
}

PixelMask box_fill_mask(const PixelBox& box) {
    PixelMask mask;
    mask.box = box;
    mask.bits.assign(static_cast<size_t>(box.width()) * box.height(), 1);
    return mask;
}

std::vector<int64_t> mask_to_rle(const PixelMask& mask, int image_width) {
    std::vector<int64_t> runs;
    int64_t run_start = -1;
    for (int v = mask.box.y0; v < mask.box.y1; ++v) {
        for (int u = mask.box.x0; u <= mask.box.x1; ++u) {
            const bool on = u < mask.box.x1 && mask.at(u, v);
            const int64_t idx = static_cast<int64_t>(v) * image_width + u;
            if (on && run_start < 0) {
                run_start = idx;
            } else if (!on && run_start >= 0) {
                runs.push_back(run_start);
                runs.push_back(idx - run_start);
                run_start = -1;
            }
        }
    }
    return runs;
}

PixelMask rle_to_mask(const std::vector<int64_t>& runs, int image_width, int image_height) {
    if (runs.size() % 2 != 0) throw Error(ErrorCode::SchemaError, "RLE length must be even");
    int x0 = image_width, y0 = image_height, x1 = 0, y1 = 0;
    for (size_t i = 0; i < runs.size(); i += 2) {
        const int64_t start = runs[i], len = runs[i + 1];
        if (len <= 0) throw Error(ErrorCode::SchemaError, "RLE run length must be > 0");
        const int v = static_cast<int>(start / image_width);
        const int u = static_cast<int>(start % image_width);
        if (v >= image_height || u + len > image_width)
            throw Error(ErrorCode::SchemaError, "RLE run out of bounds");
        x0 = std::min(x0, u);
        x1 = std::max(x1, u + static_cast<int>(len));
        y0 = std::min(y0, v);
        y1 = std::max(y1, v + 1);
    }
    PixelMask mask;
    if (runs.empty()) return mask;
    mask.box = PixelBox{x0, y0, x1, y1};
    mask.bits.assign(static_cast<size_t>(mask.box.width()) * mask.box.height(), 0);
    for (size_t i = 0; i < runs.size(); i += 2) {
        const int v = static_cast<int>(runs[i] / image_width);
        const int u = static_cast<int>(runs[i] % image_width);
        for (int64_t k = 0; k < runs[i + 1]; ++k)
            mask.bits[static_cast<size_t>(v - mask.box.y0) * mask.box.width() + (u + k - mask.box.x0)] = 1;
    }
    return mask;
}

double Embedding::dot(const Embedding& other) const {
    if (vec.size() != other.vec.size())
        throw Error(ErrorCode::InvalidArgument, "embedding dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < vec.size(); ++i) acc += static_cast<double>(vec[i]) * other.vec[i];
    return acc;
}

double Embedding::norm() const {
    double acc = 0.0;
    for (float v : vec) acc += static_cast<double>(v) * v;
    return std::sqrt(acc);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

uint64_t fnv1a64(const void* data, size_t len) {
    const uint8_t* bytes = static_cast<const uint8_t*>(data);
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

int token_dim(const std::string& token) {
    return static_cast<int>(fnv1a64(token.data(), token.size()) % kMockEmbedDim);
}

Embedding bag_of_tokens_embedding(const std::string& text, Modality modality) {
    Embedding e;
    e.modality = modality;
    e.vec.assign(kMockEmbedDim, 0.0f);
    std::vector<double> counts(kMockEmbedDim, 0.0);
    for (const auto& tok : tokenize(text)) counts[static_cast<size_t>(token_dim(tok))] += 1.0;
    double norm = 0.0;
    for (double c : counts) norm += c * c;
    if (norm == 0.0) {
        // Empty token stream still needs a valid unit vector.
        counts[0] = 1.0;
        norm = 1.0;
    }
    norm = std::sqrt(norm);
    for (int i = 0; i < kMockEmbedDim; ++i)
        e.vec[static_cast<size_t>(i)] = static_cast<float>(counts[static_cast<size_t>(i)] / norm);
    return e;
}

uint64_t hash_image(const ImageU8& image) {
    uint64_t h = fnv1a64(&image.width, sizeof(image.width));
    h ^= fnv1a64(&image.height, sizeof(image.height));
    h *= 1099511628211ull;
    h ^= fnv1a64(image.data.data(), image.data.size());
    return h;
}

// --- MockProvider ---

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    size_t b = s.find_last_not_of(" \t\r\n?.!");
    return s.substr(a, b - a + 1);
}

std::string strip_leading(const std::string& s, const std::string& prefix) {
    if (s.rfind(prefix, 0) == 0) return s.substr(prefix.size());
    return s;
}

std::vector<std::string> normalize_tags(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    for (const auto& t : in) {
        std::string v = strip(lower(t));
        if (v.empty()) continue;
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

}  // namespace

MockProvider::MockProvider(const std::string& fixture_json_path) {
    std::ifstream in(fixture_json_path);
    if (!in) throw Error(ErrorCode::MissingFile, "mock fixture file: " + fixture_json_path);
    json doc = json::parse(in);
    const json frames_doc = doc.value("frames", json::object());
    const json colors_doc = doc.value("colors", json::object());
    const json queries_doc = doc.value("queries", json::object());
    for (const auto& [id, f] : frames_doc.items()) {
        FrameFixture fx;
        fx.tags.object_tags = normalize_tags(f.value("object_tags", std::vector<std::string>{}));
        fx.tags.functional_tags =
            normalize_tags(f.value("functional_tags", std::vector<std::string>{}));
        fx.caption = f.value("caption", "");
        const int img_w = f.value("width", 0);
        const int img_h = f.value("height", 0);
        for (auto& d : f.value("detections", json::array())) {
            Detection det;
            det.label = lower(d.at("label").get<std::string>());
            auto b = d.at("box");
            det.box = PixelBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
            det.score = d.value("score", 0.9);
            if (d.contains("rle")) {
                det.mask = rle_to_mask(d["rle"].get<std::vector<int64_t>>(), img_w, img_h);
            } else {
                det.mask = box_fill_mask(det.box);
            }
            fx.detections.push_back(std::move(det));
        }
        frames_[id] = std::move(fx);
    }
    for (const auto& [color, caption] : colors_doc.items())
        color_captions_[color] = caption.get<std::string>();
    for (const auto& [q, p] : queries_doc.items()) {
        ParsedQuery pq;
        pq.target = p.value("target", "");
        pq.anchors = p.value("anchors", std::vector<std::string>{});
        parse_table_[q] = pq;
        if (p.contains("object")) {
            HierQuery hq;
            hq.object = p["object"].get<std::string>();
            if (p.contains("room")) hq.room = p["room"].get<std::string>();
            if (p.contains("floor")) hq.floor = p["floor"].get<std::string>();
            decompose_table_[q] = hq;
        }
    }
}

TagResult MockProvider::tag_frame(const ImageU8& image) {
    const std::string id = extract_image_id(image);
    auto it = frames_.find(id);
    if (it == frames_.end()) return {};
    return it->second.tags;
}

std::vector<Detection> MockProvider::detect(const ImageU8& image,
                                            const std::vector<std::string>& vocabulary) {
    if (vocabulary.empty())
        throw Error(ErrorCode::InvalidArgument, "detect requires a non-empty vocabulary");
    std::vector<Detection> out;
    auto it = frames_.find(extract_image_id(image));
    if (it == frames_.end()) return out;
    for (const auto& det : it->second.detections) {
        bool wanted = false;
        for (const auto& v : vocabulary)
            if (lower(v) == det.label) {
                wanted = true;
                break;
            }
        if (wanted) out.push_back(det);
    }
    return out;
}

Embedding MockProvider::embed_text(const std::string& text) {
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "embed_text requires non-empty text");
    return bag_of_tokens_embedding(text, Modality::Text);
}

std::string MockProvider::caption_for(const ImageU8& image) const {
    const std::string id = extract_image_id(image);
    if (!id.empty()) {
        auto it = frames_.find(id);
        if (it != frames_.end() && !it->second.caption.empty()) return it->second.caption;
    }
    // Majority vote over pixels whose exact color appears in the fixture color
    // table; lets mask-cropped object views resolve without the id row.
    std::map<std::string, size_t> votes;
    const int v0 = image.height > 1 ? 1 : 0;  // skip the id row when possible
    for (int v = v0; v < image.height; ++v) {
        for (int u = 0; u < image.width; ++u) {
            const uint8_t* p = image.pixel(u, v);
            std::string key = std::to_string(p[0]) + "," + std::to_string(p[1]) + "," +
                              std::to_string(p[2]);
            auto it = color_captions_.find(key);
            if (it != color_captions_.end()) ++votes[key];
        }
    }
    std::string best;
    size_t best_count = 0;
    for (const auto& [key, count] : votes) {
        if (count > best_count) {
            best = key;
            best_count = count;
        }
    }
    if (!best.empty()) return color_captions_.at(best);
    return "unknown view";
}

Embedding MockProvider::embed_image(const ImageU8& image) {
    if (image.empty()) throw Error(ErrorCode::InvalidArgument, "embed_image requires an image");
    return bag_of_tokens_embedding(caption_for(image), Modality::Image);
}

std::string MockProvider::describe_frame(const ImageU8&,
                                         const std::vector<std::string>& visible_labels) {
    if (visible_labels.empty()) return "Frame shows:";
    std::string out = "Frame shows: ";
    for (size_t i = 0; i < visible_labels.size(); ++i) {
        if (i) out += ", ";
        out += visible_labels[i];
    }
    return out;
}

std::string MockProvider::summarize(const std::vector<std::string>& texts, SummaryLevel level) {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "summarize requires >= 1 text");
    std::string out = level == SummaryLevel::Room ? "ROOM SUMMARY: " : "FLOOR SUMMARY: ";
    for (size_t i = 0; i < texts.size(); ++i) {
        if (i) out += " | ";
        out += texts[i];
    }
    return out;
}

ParsedQuery MockProvider::parse_query(const std::string& query) {
    if (strip(query).empty()) throw Error(ErrorCode::ParseFailure, "empty query");
    auto table = parse_table_.find(query);
    if (table != parse_table_.end()) return table->second;

    HierQuery hq = decompose_hierarchical(query);
    std::string target = hq.object;
    ParsedQuery out;
    // Anchor clauses: "the mug near the sink" -> target "mug", anchor "sink".
    static const char* kAnchorSplits[] = {" near ", " next to ", " beside ", " close to "};
    for (const char* sep : kAnchorSplits) {
        size_t pos = target.find(sep);
        if (pos != std::string::npos) {
            std::string anchor = strip(strip_leading(strip(target.substr(pos + strlen(sep))), "the "));
            target = strip(target.substr(0, pos));
            if (!anchor.empty()) out.anchors.push_back(anchor);
        }
    }
    out.target = strip(strip_leading(target, "the "));
    if (out.target.empty()) throw Error(ErrorCode::ParseFailure, "no target in query");
    return out;
}

HierQuery MockProvider::decompose_hierarchical(const std::string& query) {
    std::string q = strip(lower(query));
    if (q.empty()) throw Error(ErrorCode::ParseFailure, "empty query");
    auto table = decompose_table_.find(query);
    if (table != decompose_table_.end()) return table->second;

    for (const char* prefix : {"where is ", "where are ", "find ", "locate "})
        q = strip_leading(q, prefix);

    HierQuery out;
    // Floor clause: last " on the ..." whose tail mentions a floor.
    size_t on = q.rfind(" on the ");
    if (on != std::string::npos) {
        std::string tail = strip(q.substr(on + 8));
        if (tail.find("floor") != std::string::npos) {
            out.floor = tail;
            q = strip(q.substr(0, on));
        }
    }
    size_t in = q.find(" in the ");
    if (in != std::string::npos) {
        out.room = strip(q.substr(in + 8));
        q = strip(q.substr(0, in));
    }
    out.object = strip(strip_leading(q, "the "));
    if (out.object.empty()) throw Error(ErrorCode::ParseFailure, "no object in query");
    return out;
}

std::string MockProvider::generate_answer(const std::string& query,
                                          const std::vector<ContextItem>& context) {
    if (context.empty()) return "No grounded answer available for: " + query;
    return "Best match [" + context[0].node_id + "]: " + context[0].text;
}

// --- CachingProvider ---

namespace {

std::mutex g_cache_write_mutex;

json embedding_to_json(const Embedding& e) {
    json j;
    j["modality"] = e.modality == Modality::Text ? "text" : "image";
    j["vec"] = e.vec;
    return j;
}

Embedding embedding_from_json(const json& j) {
    Embedding e;
    e.modality = j.at("modality") == "image" ? Modality::Image : Modality::Text;
    e.vec = j.at("vec").get<std::vector<float>>();
    return e;
}

json detection_to_json(const Detection& d) {
    json j;
    j["label"] = d.label;
    j["box"] = {d.box.x0, d.box.y0, d.box.x1, d.box.y1};
    j["score"] = d.score;
    j["mask_box"] = {d.mask.box.x0, d.mask.box.y0, d.mask.box.x1, d.mask.box.y1};
    j["mask_bits"] = d.mask.bits;
    return j;
}

Detection detection_from_json(const json& j) {
    Detection d;
    d.label = j.at("label").get<std::string>();
    auto b = j.at("box");
    d.box = PixelBox{b[0], b[1], b[2], b[3]};
    d.score = j.at("score").get<double>();
    auto mb = j.at("mask_box");
    d.mask.box = PixelBox{mb[0], mb[1], mb[2], mb[3]};
    d.mask.bits = j.at("mask_bits").get<std::vector<uint8_t>>();
    return d;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

CachingProvider::CachingProvider(std::shared_ptr<Provider> inner, std::string cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {
    fs::create_directories(cache_dir_);
}

std::string CachingProvider::name() const { return inner_->name(); }

std::optional<std::string> CachingProvider::load(const std::string& key) const {
    const fs::path path = fs::path(cache_dir_) / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void CachingProvider::store(const std::string& key, const std::string& payload) const {
    std::lock_guard<std::mutex> lock(g_cache_write_mutex);
    const fs::path path = fs::path(cache_dir_) / (key + ".json");
    const fs::path tmp = fs::path(cache_dir_) / (key + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        out << payload;
    }
    fs::rename(tmp, path);
}

TagResult CachingProvider::tag_frame(const ImageU8& image) {
    const std::string key = "tag_" + hex64(hash_image(image));
    if (auto hit = load(key)) {
        json j = json::parse(*hit);
        TagResult t;
        t.object_tags = j.at("object_tags").get<std::vector<std::string>>();
        t.functional_tags = j.at("functional_tags").get<std::vector<std::string>>();
        return t;
    }
    TagResult t = inner_->tag_frame(image);
    json j{{"object_tags", t.object_tags}, {"functional_tags", t.functional_tags}};
    store(key, j.dump());
    return t;
}

std::vector<Detection> CachingProvider::detect(const ImageU8& image,
                                               const std::vector<std::string>& vocabulary) {
    std::string joined;
    for (const auto& v : vocabulary) joined += v + "\x1f";
    const std::string key =
        "det_" + hex64(hash_image(image) ^ fnv1a64(joined.data(), joined.size()));
    if (auto hit = load(key)) {
        std::vector<Detection> out;
        for (const auto& j : json::parse(*hit)) out.push_back(detection_from_json(j));
        return out;
    }
    auto out = inner_->detect(image, vocabulary);
    json arr = json::array();
    for (const auto& d : out) arr.push_back(detection_to_json(d));
    store(key, arr.dump());
    return out;
}

Embedding CachingProvider::embed_text(const std::string& text) {
    const std::string key = "etx_" + hex64(fnv1a64(text.data(), text.size()));
    if (auto hit = load(key)) return embedding_from_json(json::parse(*hit));
    Embedding e = inner_->embed_text(text);
    store(key, embedding_to_json(e).dump());
    return e;
}

Embedding CachingProvider::embed_image(const ImageU8& image) {
    const std::string key = "eim_" + hex64(hash_image(image));
    if (auto hit = load(key)) return embedding_from_json(json::parse(*hit));
    Embedding e = inner_->embed_image(image);
    store(key, embedding_to_json(e).dump());
    return e;
}

std::string CachingProvider::describe_frame(const ImageU8& image,
                                            const std::vector<std::string>& visible_labels) {
    std::string joined;
    for (const auto& v : visible_labels) joined += v + "\x1f";
    const std::string key =
        "dsc_" + hex64(hash_image(image) ^ fnv1a64(joined.data(), joined.size()));
    if (auto hit = load(key)) return json::parse(*hit).at("text").get<std::string>();
    std::string text = inner_->describe_frame(image, visible_labels);
    store(key, json{{"text", text}}.dump());
    return text;
}

std::string CachingProvider::summarize(const std::vector<std::string>& texts,
                                       SummaryLevel level) {
    std::string joined = level == SummaryLevel::Room ? "room\x1f" : "floor\x1f";
    for (const auto& t : texts) joined += t + "\x1f";
    const std::string key = "sum_" + hex64(fnv1a64(joined.data(), joined.size()));
    if (auto hit = load(key)) return json::parse(*hit).at("text").get<std::string>();
    std::string text = inner_->summarize(texts, level);
    store(key, json{{"text", text}}.dump());
    return text;
}

ParsedQuery CachingProvider::parse_query(const std::string& query) {
    const std::string key = "prs_" + hex64(fnv1a64(query.data(), query.size()));
    if (auto hit = load(key)) {
        json j = json::parse(*hit);
        return ParsedQuery{j.at("target"), j.at("anchors").get<std::vector<std::string>>()};
    }
    ParsedQuery p = inner_->parse_query(query);
    store(key, json{{"target", p.target}, {"anchors", p.anchors}}.dump());
    return p;
}

HierQuery CachingProvider::decompose_hierarchical(const std::string& query) {
    const std::string key = "dec_" + hex64(fnv1a64(query.data(), query.size()));
    if (auto hit = load(key)) {
        json j = json::parse(*hit);
        HierQuery h;
        h.object = j.at("object").get<std::string>();
        if (j.contains("room")) h.room = j["room"].get<std::string>();
        if (j.contains("floor")) h.floor = j["floor"].get<std::string>();
        return h;
    }
    HierQuery h = inner_->decompose_hierarchical(query);
    json j{{"object", h.object}};
    if (h.room) j["room"] = *h.room;
    if (h.floor) j["floor"] = *h.floor;
    store(key, j.dump());
    return h;
}

std::string CachingProvider::generate_answer(const std::string& query,
                                             const std::vector<ContextItem>& context) {
    std::string joined = query + "\x1f";
    for (const auto& c : context) joined += c.node_id + "\x1f" + c.text + "\x1f";
    const std::string key = "ans_" + hex64(fnv1a64(joined.data(), joined.size()));
    if (auto hit = load(key)) return json::parse(*hit).at("text").get<std::string>();
    std::string text = inner_->generate_answer(query, context);
    store(key, json{{"text", text}}.dump());
    return text;
}

}  // namespace keysg
