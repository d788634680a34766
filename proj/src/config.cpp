#include "keysg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <thread>

#include "keysg/errors.hpp"

namespace keysg {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaError, "bad number for " + key + ": " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaError, "bad integer for " + key + ": " + value);
    }
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Entry {
    std::function<void(Config&, const std::string&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

const std::map<std::string, Entry>& registry() {
    static const std::map<std::string, Entry> entries = [] {
        std::map<std::string, Entry> m;
        auto dbl = [&m](const std::string& key, double Config::* field) {
            m[key] = {[field](Config& c, const std::string& k, const std::string& v) {
                          c.*field = parse_double(k, v);
                      },
                      [field](const Config& c) { return format_double(c.*field); }};
        };
        auto num = [&m](const std::string& key, int Config::* field) {
            m[key] = {[field](Config& c, const std::string& k, const std::string& v) {
                          c.*field = parse_int(k, v);
                      },
                      [field](const Config& c) { return std::to_string(c.*field); }};
        };
        auto sub_dbl = [&m](const std::string& key, auto member, auto inner) {
            m[key] = {[member, inner](Config& c, const std::string& k, const std::string& v) {
                          (c.*member).*inner = parse_double(k, v);
                      },
                      [member, inner](const Config& c) {
                          return format_double((c.*member).*inner);
                      }};
        };
        dbl("ingest.scene_voxel", &Config::scene_voxel);
        dbl("ingest.max_depth", &Config::max_depth);
        num("ingest.stride", &Config::stride);
        sub_dbl("floors.bin", &Config::floors, &FloorParams::bin);
        sub_dbl("floors.peak_frac", &Config::floors, &FloorParams::peak_frac);
        sub_dbl("floors.min_floor_height", &Config::floors, &FloorParams::min_floor_height);
        sub_dbl("rooms.cell", &Config::rooms, &RoomParams::cell);
        sub_dbl("rooms.wall_frac", &Config::rooms, &RoomParams::wall_frac);
        sub_dbl("rooms.min_room_area", &Config::rooms, &RoomParams::min_room_area);
        sub_dbl("rooms.smooth_sigma", &Config::rooms, &RoomParams::smooth_sigma);
        sub_dbl("keyframes.rotation_weight", &Config::keyframes,
                &KeyframeParams::rotation_weight);
        sub_dbl("keyframes.eta", &Config::keyframes, &KeyframeParams::eta);
        sub_dbl("keyframes.eps", &Config::keyframes, &KeyframeParams::eps);
        sub_dbl("keyframes.coverage_voxel", &Config::keyframes,
                &KeyframeParams::coverage_voxel);
        m["keyframes.min_pts"] = {
            [](Config& c, const std::string& k, const std::string& v) {
                c.keyframes.min_pts = parse_int(k, v);
            },
            [](const Config& c) { return std::to_string(c.keyframes.min_pts); }};
        sub_dbl("objects.merge_threshold", &Config::merge, &MergeParams::threshold);
        sub_dbl("objects.merge_voxel", &Config::merge, &MergeParams::voxel);
        dbl("objects.depth_tol", &Config::depth_tol);
        dbl("objects.theta_vis", &Config::theta_vis);
        num("summaries.chunk_size", &Config::summary_chunk_size);
        num("ragindex.k", &Config::retrieval_k);
        num("ragindex.token_budget", &Config::token_budget);
        num("run.jobs", &Config::jobs);
        return m;
    }();
    return entries;
}

}  // namespace

void Config::set(const std::string& dotted_key, const std::string& value) {
    auto it = registry().find(dotted_key);
    if (it == registry().end())
        throw Error(ErrorCode::SchemaError, "unknown config key: " + dotted_key);
    it->second.set(*this, dotted_key, trim(unquote(trim(value))));
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "config file: " + path);
    Config config;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::SchemaError,
                        path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        config.set(section.empty() ? key : section + "." + key, value);
    }
    return config;
}

std::string Config::canonical_text() const {
    std::string out;
    for (const auto& [key, entry] : registry()) out += key + " = " + entry.get(*this) + "\n";
    return out;
}

std::string Config::hash() const {
    const std::string text = canonical_text();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
    return buf;
}

int Config::effective_jobs() const {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

HttpProviderConfig load_provider_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "providers config: " + path);
    HttpProviderConfig config;
    std::string line, section;
    while (std::getline(in, line)) {
        const size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (section == "providers.models") {
            config.models[key] = value;
        } else if (section == "providers" || section.empty()) {
            if (key == "base_url") config.base_url = value;
            else if (key == "api_key_env") config.api_key_env = value;
            else if (key == "prompts_dir") config.prompts_dir = value;
            else if (key == "timeout_ms") config.timeout_ms = parse_int(key, value);
            else if (key == "max_retries") config.max_retries = parse_int(key, value);
            else if (key == "backoff_ms") config.backoff_ms = parse_int(key, value);
            else if (key == "max_inflight") config.max_inflight = parse_int(key, value);
            else throw Error(ErrorCode::SchemaError, "unknown providers key: " + key);
        } else {
            throw Error(ErrorCode::SchemaError, "unknown providers section: " + section);
        }
    }
    return config;
}

}  // namespace keysg
