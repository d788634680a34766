#include "keysg/providers_http.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "keysg/errors.hpp"

using nlohmann::json;

namespace keysg {

std::string base64_encode(const void* data, size_t len) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    const uint8_t* bytes = static_cast<const uint8_t*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t chunk = static_cast<uint32_t>(bytes[i]) << 16;
        if (i + 1 < len) chunk |= static_cast<uint32_t>(bytes[i + 1]) << 8;
        if (i + 2 < len) chunk |= bytes[i + 2];
        out.push_back(alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

std::string render_prompt(const std::string& prompts_dir, const std::string& asset,
                          const std::map<std::string, std::string>& values) {
    const std::string path = prompts_dir + "/" + asset;
    std::ifstream in(path);
    if (!in)
        throw ProviderError(0, false, "missing prompt asset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    for (const auto& [key, value] : values) {
        const std::string needle = "{" + key + "}";
        size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return text;
}

struct HttpProvider::Impl {
    HttpProviderConfig config;
    std::string api_key;
    std::mutex inflight_mutex;
    std::condition_variable inflight_cv;
    int inflight = 0;

    explicit Impl(HttpProviderConfig cfg) : config(std::move(cfg)) {
        if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
    }

    std::string model(const std::string& capability) const {
        auto it = config.models.find(capability);
        return it == config.models.end() ? std::string("default") : it->second;
    }

    json post(const std::string& path, const json& body) {
        {
            std::unique_lock<std::mutex> lock(inflight_mutex);
            inflight_cv.wait(lock, [&] { return inflight < config.max_inflight; });
            ++inflight;
        }
        struct Release {
            Impl* impl;
            ~Release() {
                {
                    std::lock_guard<std::mutex> lock(impl->inflight_mutex);
                    --impl->inflight;
                }
                impl->inflight_cv.notify_one();
            }
        } release{this};

        const std::string payload = body.dump();
        int backoff = config.backoff_ms;
        for (int attempt = 0;; ++attempt) {
            httplib::Client client(config.base_url);
            client.set_connection_timeout(0, config.timeout_ms * 1000);
            client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
            httplib::Headers headers;
            if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
            auto res = client.Post(path, headers, payload, "application/json");

            bool retryable = false;
            std::string message;
            if (!res) {
                if (res.error() == httplib::Error::ConnectionTimeout ||
                    res.error() == httplib::Error::Read)
                    throw Error(ErrorCode::Timeout, "provider call timed out: " + path);
                retryable = true;
                message = "transport error " + httplib::to_string(res.error());
            } else if (res->status == 200) {
                return json::parse(res->body);
            } else {
                retryable = res->status == 429 || res->status >= 500;
                message = "HTTP " + std::to_string(res->status) + " from " + path;
                if (!retryable) throw ProviderError(res->status, false, message);
            }
            if (attempt >= config.max_retries)
                throw ProviderError(res ? res->status : 0, true, message + " (retries exhausted)");
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
    }

    json image_json(const ImageU8& image) const {
        json j;
        j["width"] = image.width;
        j["height"] = image.height;
        j["rgb8_b64"] = base64_encode(image.data.data(), image.data.size());
        return j;
    }

    std::string complete(const std::string& capability, const std::string& prompt,
                         const ImageU8* image = nullptr) {
        json body{{"model", model(capability)}, {"prompt", prompt}};
        if (image) body["image"] = image_json(*image);
        json res = post("/v1/complete", body);
        if (!res.contains("text"))
            throw ProviderError(200, false, "complete response missing 'text'");
        return res["text"].get<std::string>();
    }
};

HttpProvider::HttpProvider(HttpProviderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::name() const {
    std::string names;
    for (const auto& [cap, model] : impl_->config.models) names += cap + "=" + model + ";";
    return "http:" + names;
}

TagResult HttpProvider::tag_frame(const ImageU8& image) {
    json body{{"model", impl_->model("tagger")}, {"image", impl_->image_json(image)}};
    json res = impl_->post("/v1/tag", body);
    TagResult out;
    out.object_tags = res.value("object_tags", std::vector<std::string>{});
    out.functional_tags = res.value("functional_tags", std::vector<std::string>{});
    return out;
}

std::vector<Detection> HttpProvider::detect(const ImageU8& image,
                                            const std::vector<std::string>& vocabulary) {
    if (vocabulary.empty())
        throw Error(ErrorCode::InvalidArgument, "detect requires a non-empty vocabulary");
    json body{{"model", impl_->model("detector")},
              {"image", impl_->image_json(image)},
              {"vocabulary", vocabulary}};
    json res = impl_->post("/v1/detect", body);
    std::vector<Detection> out;
    for (const auto& d : res.value("detections", json::array())) {
        Detection det;
        det.label = d.at("label").get<std::string>();
        auto b = d.at("box");
        det.box = PixelBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
        det.score = d.value("score", 0.0);
        if (d.contains("rle"))
            det.mask = rle_to_mask(d["rle"].get<std::vector<int64_t>>(), image.width, image.height);
        else
            det.mask = box_fill_mask(det.box);
        out.push_back(std::move(det));
    }
    return out;
}

namespace {

Embedding normalized_embedding(std::vector<float> vec, Modality modality) {
    Embedding e;
    e.vec = std::move(vec);
    e.modality = modality;
    const double norm = e.norm();
    if (norm <= 0.0) throw ProviderError(200, false, "embedding response has zero norm");
    for (auto& v : e.vec) v = static_cast<float>(v / norm);
    return e;
}

}  // namespace

Embedding HttpProvider::embed_text(const std::string& text) {
    json res = impl_->post("/v1/embed_text", json{{"model", impl_->model("embedder")},
                                                  {"text", text}});
    return normalized_embedding(res.at("vector").get<std::vector<float>>(), Modality::Text);
}

Embedding HttpProvider::embed_image(const ImageU8& image) {
    json res = impl_->post("/v1/embed_image", json{{"model", impl_->model("embedder")},
                                                   {"image", impl_->image_json(image)}});
    return normalized_embedding(res.at("vector").get<std::vector<float>>(), Modality::Image);
}

std::string HttpProvider::describe_frame(const ImageU8& image,
                                         const std::vector<std::string>& visible_labels) {
    std::string labels;
    for (size_t i = 0; i < visible_labels.size(); ++i) {
        if (i) labels += ", ";
        labels += visible_labels[i];
    }
    const std::string prompt =
        render_prompt(impl_->config.prompts_dir, "describe_frame.txt", {{"labels", labels}});
    return impl_->complete("vlm", prompt, &image);
}

std::string HttpProvider::summarize(const std::vector<std::string>& texts, SummaryLevel level) {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "summarize requires >= 1 text");
    std::string joined;
    for (const auto& t : texts) joined += "- " + t + "\n";
    const char* asset =
        level == SummaryLevel::Room ? "summarize_room.txt" : "summarize_floor.txt";
    const std::string prompt =
        render_prompt(impl_->config.prompts_dir, asset, {{"texts", joined}});
    return impl_->complete("llm", prompt);
}

namespace {

json parse_llm_json(const std::string& text) {
    // Accept raw JSON or JSON wrapped in prose/code fences.
    const size_t open = text.find('{');
    const size_t close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw Error(ErrorCode::ParseFailure, "provider output is not JSON");
    try {
        return json::parse(text.substr(open, close - open + 1));
    } catch (const json::exception&) {
        throw Error(ErrorCode::ParseFailure, "provider output is not valid JSON");
    }
}

}  // namespace

ParsedQuery HttpProvider::parse_query(const std::string& query) {
    const std::string prompt =
        render_prompt(impl_->config.prompts_dir, "parse_query.txt", {{"query", query}});
    const json j = parse_llm_json(impl_->complete("llm", prompt));
    if (!j.contains("target") || !j["target"].is_string())
        throw Error(ErrorCode::ParseFailure, "parse_query output missing target");
    ParsedQuery out;
    out.target = j["target"].get<std::string>();
    if (j.contains("anchors") && j["anchors"].is_array())
        for (const auto& a : j["anchors"])
            if (a.is_string()) out.anchors.push_back(a.get<std::string>());
    return out;
}

HierQuery HttpProvider::decompose_hierarchical(const std::string& query) {
    const std::string prompt =
        render_prompt(impl_->config.prompts_dir, "parse_query.txt", {{"query", query}});
    const json j = parse_llm_json(impl_->complete("llm", prompt));
    if (!j.contains("object") || !j["object"].is_string())
        throw Error(ErrorCode::ParseFailure, "decompose output missing object");
    HierQuery out;
    out.object = j["object"].get<std::string>();
    if (j.contains("room") && j["room"].is_string()) out.room = j["room"].get<std::string>();
    if (j.contains("floor") && j["floor"].is_string()) out.floor = j["floor"].get<std::string>();
    return out;
}

std::string HttpProvider::generate_answer(const std::string& query,
                                          const std::vector<ContextItem>& context) {
    std::string ctx;
    for (const auto& item : context) ctx += "[" + item.node_id + "] " + item.text + "\n";
    const std::string prompt = render_prompt(impl_->config.prompts_dir, "answer_query.txt",
                                             {{"query", query}, {"context", ctx}});
    return impl_->complete("llm", prompt);
}

}  // namespace keysg
