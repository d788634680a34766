#pragma once

#include <map>
#include <string>

#include "keysg/providers.hpp"

namespace keysg {

// Connection settings for the live HTTP provider, normally read from
// providers.toml. The API key is pulled from the named environment variable.
struct HttpProviderConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8800
    std::string api_key_env = "KEYSG_API_KEY";
    std::map<std::string, std::string> models;  // capability -> model name
    std::string prompts_dir = "prompts";
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_ms = 250;   // doubled per retry
    int max_inflight = 4;   // concurrent request cap
};

// JSON-over-HTTP provider. Perception endpoints are POST {base}/v1/tag,
// /v1/detect, /v1/embed_text, /v1/embed_image; all language tasks go through
// POST {base}/v1/complete with a prompt rendered from the template assets.
// 429 and 5xx responses are retryable, other non-200s are not, and transport
// timeouts surface as Timeout.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);
    ~HttpProvider() override;

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
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string base64_encode(const void* data, size_t len);

// Loads a template and substitutes {name} placeholders.
std::string render_prompt(const std::string& prompts_dir, const std::string& asset,
                          const std::map<std::string, std::string>& values);

}  // namespace keysg
