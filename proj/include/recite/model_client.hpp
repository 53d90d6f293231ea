#pragma once

// Minimal chat-completion client: the de-facto JSON wire shape (model,
// messages, temperature, max_tokens in; choices[0].message.content out),
// retries with exponential backoff on transient failures, and an on-disk
// response cache keyed by a stable hash of the canonicalized request.
//
// The auth token is read from an environment variable named in the config
// and never written to disk. Cache writes are write-temp-then-rename so
// concurrent workers can share a cache directory.

#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace recite {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct ChatRequest {
    std::string model_name;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output_tokens = 2048;
};

struct ClientConfig {
    std::string endpoint_url;           // e.g. http://localhost:8080/v1/chat/completions
    std::string auth_token_env = "";    // name of the env var holding the bearer token
    int retry_max = 2;
    std::chrono::milliseconds backoff_base{200};
    std::chrono::milliseconds timeout{30000};
    std::filesystem::path cache_dir = "";  // empty disables caching
};

struct ServiceUnavailable : std::runtime_error {
    explicit ServiceUnavailable(const std::string& what) : std::runtime_error(what) {}
};

struct MalformedResponse : std::runtime_error {
    explicit MalformedResponse(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::string hex64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("endpoint url needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

inline nlohmann::json request_to_json(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    return {
        {"model", request.model_name},
        {"messages", messages},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
}

// Stable across processes: hex FNV-1a of the canonical (key-sorted) dump.
inline std::string cache_key(const ChatRequest& request) {
    return detail::hex64(detail::fnv1a64(request_to_json(request).dump()));
}

inline std::string complete(const ChatRequest& request, const ClientConfig& config) {
    if (request.messages.empty()) throw std::invalid_argument("chat request needs >= 1 message");
    for (const auto& m : request.messages) {
        if (m.role != "system" && m.role != "user" && m.role != "assistant") {
            throw std::invalid_argument("unknown chat role: " + m.role);
        }
    }
    if (config.retry_max < 0) throw std::invalid_argument("retry_max must be >= 0");

    const bool caching = !config.cache_dir.empty();
    std::filesystem::path cache_file;
    if (caching) {
        cache_file = config.cache_dir / (cache_key(request) + ".json");
        if (std::filesystem::exists(cache_file)) {
            std::ifstream in(cache_file);
            nlohmann::json cached = nlohmann::json::parse(in, nullptr, false);
            if (!cached.is_discarded() && cached.contains("content")) {
                return cached["content"].get<std::string>();
            }
        }
    }

    const auto url = detail::split_url(config.endpoint_url);
    httplib::Client client(url.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    client.set_connection_timeout(secs.count(), 0);
    client.set_read_timeout(secs.count(), 0);

    httplib::Headers headers;
    if (!config.auth_token_env.empty()) {
        if (const char* token = std::getenv(config.auth_token_env.c_str()); token && *token) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    const std::string body = request_to_json(request).dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config.retry_max; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(config.backoff_base * (1 << (attempt - 1)));
        }
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = "connection failure: " + httplib::to_string(res.error());
            continue;  // transient
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;  // transient
        }
        if (res->status < 200 || res->status >= 300) {
            throw ServiceUnavailable{"endpoint returned status " + std::to_string(res->status)};
        }

        nlohmann::json payload = nlohmann::json::parse(res->body, nullptr, false);
        if (payload.is_discarded() || !payload.contains("choices") ||
            !payload["choices"].is_array() || payload["choices"].empty() ||
            !payload["choices"][0].contains("message") ||
            !payload["choices"][0]["message"].contains("content") ||
            !payload["choices"][0]["message"]["content"].is_string()) {
            throw MalformedResponse{"response body lacks choices[0].message.content"};
        }
        std::string content = payload["choices"][0]["message"]["content"].get<std::string>();

        if (caching) {
            std::filesystem::create_directories(config.cache_dir);
            const auto tmp = cache_file.string() + ".tmp" +
                             std::to_string(static_cast<unsigned long>(::getpid()));
            {
                std::ofstream out(tmp);
                out << nlohmann::json{{"content", content}}.dump();
            }
            std::filesystem::rename(tmp, cache_file);
        }
        return content;
    }
    throw ServiceUnavailable{"retries exhausted: " + last_error};
}

}  // namespace recite
