#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "keysg/image.hpp"

namespace keysg {

// Per-frame open-vocabulary tags. Lists are deduplicated, lowercase, non-empty.
struct TagResult {
    std::vector<std::string> object_tags;
    std::vector<std::string> functional_tags;

    bool empty() const { return object_tags.empty() && functional_tags.empty(); }
};

// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct PixelBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool contains(int u, int v) const { return u >= x0 && u < x1 && v >= y0 && v < y1; }
    bool contains(const PixelBox& o) const {
        return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1;
    }
    bool operator==(const PixelBox&) const = default;
};

// Binary mask stored box-local; queries take full-image coordinates.
struct PixelMask {
    PixelBox box;
    std::vector<uint8_t> bits;  // box.width()*box.height(), values 0/1

    bool at(int u, int v) const {
        if (!box.contains(u, v)) return false;
        return bits[static_cast<size_t>(v - box.y0) * box.width() + (u - box.x0)] != 0;
    }
    size_t count() const;
    bool empty() const { return count() == 0; }
};

PixelMask box_fill_mask(const PixelBox& box);
// Full-image row-major [start, length, start, length, ...] runs.
std::vector<int64_t> mask_to_rle(const PixelMask& mask, int image_width);
PixelMask rle_to_mask(const std::vector<int64_t>& runs, int image_width, int image_height);

struct Detection {
    std::string label;
    PixelBox box;
    PixelMask mask;  // mask is contained in box
    double score = 0.0;
};

enum class Modality { Text, Image };

struct Embedding {
    std::vector<float> vec;
    Modality modality = Modality::Text;

    double dot(const Embedding& other) const;
    double norm() const;
};

enum class SummaryLevel { Room, Floor };

struct ParsedQuery {
    std::string target;
    std::vector<std::string> anchors;
};

struct HierQuery {
    std::optional<std::string> floor;
    std::optional<std::string> room;
    std::string object;
};

struct ContextItem {
    std::string node_id;
    std::string text;
};

// Uniform interface to the perception/language services the pipeline needs.
// Implementations must be safe to call from multiple threads.
class Provider {
public:
    virtual ~Provider() = default;

    virtual std::string name() const = 0;
    virtual TagResult tag_frame(const ImageU8& image) = 0;
    virtual std::vector<Detection> detect(const ImageU8& image,
                                          const std::vector<std::string>& vocabulary) = 0;
    virtual Embedding embed_text(const std::string& text) = 0;
    virtual Embedding embed_image(const ImageU8& image) = 0;
    virtual std::string describe_frame(const ImageU8& image,
                                       const std::vector<std::string>& visible_labels) = 0;
    virtual std::string summarize(const std::vector<std::string>& texts, SummaryLevel level) = 0;
    virtual ParsedQuery parse_query(const std::string& query) = 0;
    virtual HierQuery decompose_hierarchical(const std::string& query) = 0;
    virtual std::string generate_answer(const std::string& query,
                                        const std::vector<ContextItem>& context) = 0;
};

// --- mock embedding primitives (exposed so tests can reason about them) ---

inline constexpr int kMockEmbedDim = 256;

// Lowercase tokens split on anything that is not [a-z0-9].
std::vector<std::string> tokenize(const std::string& text);
uint64_t fnv1a64(const void* data, size_t len);
int token_dim(const std::string& token);  // FNV-1a hash mod kMockEmbedDim

// L2-normalized bag-of-tokens histogram; the mock's embedding for all text.
Embedding bag_of_tokens_embedding(const std::string& text, Modality modality = Modality::Text);

// Deterministic offline provider. Behaviour is a pure function of its inputs
// plus an optional fixture table loaded from JSON:
//   frames:  image-embedded id -> {object_tags, functional_tags, caption,
//            detections:[{label, box:[x0,y0,x1,y1], score, rle:[...]}]}
//   colors:  "r,g,b" -> caption for mask-cropped object views
//   queries: verbatim query -> {target, anchors, floor?, room?, object?}
class MockProvider : public Provider {
public:
    MockProvider() = default;
    explicit MockProvider(const std::string& fixture_json_path);

    std::string name() const override { return "mock-1"; }
    TagResult tag_frame(const ImageU8& image) override;
    std::vector<Detection> detect(const ImageU8& image,
                                  const std::vector<std::string>& vocabulary) override;
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const ImageU8& image) override;
    std::string describe_frame(const ImageU8& image,
                               const std::vector<std::string>& visible_labels) override;
    std::string summarize(const std::vector<std::string>& texts, SummaryLevel level) override;
    ParsedQuery parse_query(const std::string& query) override;
    HierQuery decompose_hierarchical(const std::string& query) override;
    std::string generate_answer(const std::string& query,
                                const std::vector<ContextItem>& context) override;

private:
    struct FrameFixture {
        TagResult tags;
        std::string caption;
        std::vector<Detection> detections;
    };
    std::map<std::string, FrameFixture> frames_;
    std::map<std::string, std::string> color_captions_;
    std::map<std::string, ParsedQuery> parse_table_;
    std::map<std::string, HierQuery> decompose_table_;

    std::string caption_for(const ImageU8& image) const;
};

// Disk cache wrapper keyed by a content hash of each call's inputs. Results
// are replayed without touching the inner provider, which makes interrupted
// builds resumable and live-provider runs replayable.
class CachingProvider : public Provider {
public:
    CachingProvider(std::shared_ptr<Provider> inner, std::string cache_dir);

    std::string name() const override;
    TagResult tag_frame(const ImageU8& image) override;
    std::vector<Detection> detect(const ImageU8& image,
                                  const std::vector<std::string>& vocabulary) override;
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const ImageU8& image) override;
    std::string describe_frame(const ImageU8& image,
                               const std::vector<std::string>& visible_labels) override;
    std::string summarize(const std::vector<std::string>& texts, SummaryLevel level) override;
    ParsedQuery parse_query(const std::string& query) override;
    HierQuery decompose_hierarchical(const std::string& query) override;
    std::string generate_answer(const std::string& query,
                                const std::vector<ContextItem>& context) override;

private:
    std::optional<std::string> load(const std::string& key) const;
    void store(const std::string& key, const std::string& json) const;

    std::shared_ptr<Provider> inner_;
    std::string cache_dir_;
};

uint64_t hash_image(const ImageU8& image);

}  // namespace keysg
