#include "metajudge/judge_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>
#include <httplib.h>

#include "fnv.hpp"

namespace metajudge::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kBackoffBaseMs = 100;
constexpr int kConnectTimeoutSec = 10;
constexpr int kReadTimeoutSec = 600;

std::string format_temperature(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", t);
    return buf;
}

/// Splits "scheme://host[:port][/path]" into the client target and path
/// prefix. An empty path defaults to /v1.
struct UrlParts {
    std::string scheme_host_port;
    std::string path_prefix;
};

UrlParts split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw GatewayError("base URL must include a scheme: " + base_url);
    }
    auto path_begin = base_url.find('/', scheme_end + 3);
    UrlParts parts;
    if (path_begin == std::string::npos) {
        parts.scheme_host_port = base_url;
        parts.path_prefix = "/v1";
    } else {
        parts.scheme_host_port = base_url.substr(0, path_begin);
        parts.path_prefix = base_url.substr(path_begin);
        while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') {
            parts.path_prefix.pop_back();
        }
        if (parts.path_prefix.empty()) parts.path_prefix = "/v1";
    }
    return parts;
}

}  // namespace

// ---------------------------------------------------------------------------
// JudgeConfig
// ---------------------------------------------------------------------------

void JudgeConfig::validate() const {
    if (max_in_flight < 1) throw GatewayError("max_in_flight must be >= 1");
    if (temperature < 0.0) throw GatewayError("temperature must be >= 0");
    if (max_retries < 0) throw GatewayError("max_retries must be >= 0");
    if (max_tokens < 1) throw GatewayError("max_tokens must be >= 1");
    if (model_name.empty()) throw GatewayError("model_name must be nonempty");
}

std::string JudgeConfig::fingerprint() const {
    // cache_dir is deliberately excluded: cache location never changes
    // what a completion returns.
    std::string canonical = base_url + "\n" + model_name + "\n" + api_key_source + "\n" +
                            format_temperature(temperature) + "\n" +
                            std::to_string(max_tokens) + "\n" +
                            std::to_string(max_in_flight) + "\n" +
                            std::to_string(max_retries);
    return detail::fnv1a64_hex(canonical);
}

std::string cache_key(const std::string& model, const std::string& prompt,
                      double temperature, int max_tokens) {
    std::string canonical = model + "\n" + format_temperature(temperature) + "\n" +
                            std::to_string(max_tokens) + "\n" + prompt;
    return detail::fnv1a64_hex(canonical);
}

// ---------------------------------------------------------------------------
// HttpTransport
// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::string api_key_env)
    : base_url_(std::move(base_url)), api_key_env_(std::move(api_key_env)) {
    split_base_url(base_url_);  // fail fast on malformed URLs
}

std::string HttpTransport::complete(const ChatRequest& request) {
    const char* key = std::getenv(api_key_env_.c_str());
    if (key == nullptr || *key == '\0') {
        throw AuthError("API key environment variable " + api_key_env_ +
                        " is unset or empty");
    }

    UrlParts url = split_base_url(base_url_);
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(kConnectTimeoutSec, 0);
    client.set_read_timeout(kReadTimeoutSec, 0);

    json body;
    body["model"] = request.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;

    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(url.path_prefix + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
        throw TransportError("connection to " + url.scheme_host_port + " failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw AuthError("server rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
    }
    if (res->status == 429) {
        throw RateLimited("rate limited (HTTP 429)");
    }
    if (res->status >= 400) {
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body,
                             res->status);
    }

    try {
        json parsed = json::parse(res->body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed chat-completion body: ") + e.what(),
                             res->status);
    }
}

bool HttpTransport::reachable() {
    UrlParts url = split_base_url(base_url_);
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(5, 0);
    auto res = client.Get(url.path_prefix + "/models");
    if (res) return true;
    // Any HTTP-level answer counts; only connection failures mean down.
    res = client.Get("/");
    return static_cast<bool>(res);
}

// ---------------------------------------------------------------------------
// MockTransport
// ---------------------------------------------------------------------------

MockTransport::MockTransport(const std::string& fixture_dir) {
    if (!fs::is_directory(fixture_dir)) {
        throw GatewayError("mock gateway fixture directory not found: " + fixture_dir);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(fixture_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw GatewayError("bad mock rule " + file.string() + ": " + e.what());
        }
        Rule rule;
        for (const auto& s : j.at("prompt_contains")) {
            rule.prompt_contains.push_back(s.get<std::string>());
        }
        if (j.contains("response_file")) {
            fs::path rel = file.parent_path() / j.at("response_file").get<std::string>();
            std::ifstream body(rel);
            if (!body) throw GatewayError("mock response file missing: " + rel.string());
            rule.response.assign(std::istreambuf_iterator<char>(body),
                                 std::istreambuf_iterator<char>());
        } else {
            rule.response = j.at("response").get<std::string>();
        }
        rules_.push_back(std::move(rule));
    }
    if (rules_.empty()) {
        throw GatewayError("mock gateway fixture directory has no *.json rules: " +
                           fixture_dir);
    }
}

std::string MockTransport::complete(const ChatRequest& request) {
    calls_.fetch_add(1);
    for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& needle : rule.prompt_contains) {
            if (request.prompt.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) return rule.response;
    }
    throw TransportError("no mock rule matches prompt (model=" + request.model +
                         ", prompt starts: " + request.prompt.substr(0, 80) + "...)");
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(JudgeConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (config_.base_url.empty()) {
        const char* env = std::getenv(kDefaultBaseUrlEnv);
        if (env != nullptr && *env != '\0') config_.base_url = env;
    }
    if (!transport_ && !config_.base_url.empty()) {
        transport_ = std::make_shared<HttpTransport>(config_.base_url,
                                                     config_.api_key_source);
    }
    if (config_.cache_dir) fs::create_directories(*config_.cache_dir);
}

std::optional<std::string> Gateway::cache_lookup(const std::string& prompt) const {
    const std::string key =
        cache_key(config_.model_name, prompt, config_.temperature, config_.max_tokens);
    for (int probe = 0;; ++probe) {
        fs::path path = fs::path(*config_.cache_dir) /
                        ("mj-" + key + (probe ? "-" + std::to_string(probe) : "") + ".json");
        std::ifstream in(path);
        if (!in) return std::nullopt;
        json j;
        try {
            in >> j;
        } catch (const json::exception&) {
            return std::nullopt;  // treat a torn entry as a miss
        }
        if (j.value("model", "") == config_.model_name &&
            j.value("prompt", "") == prompt &&
            j.value("temperature", -1.0) == config_.temperature &&
            j.value("max_tokens", -1) == config_.max_tokens) {
            return j.at("response_text").get<std::string>();
        }
    }
}

void Gateway::cache_store(const std::string& prompt, const std::string& response) {
    const std::string key =
        cache_key(config_.model_name, prompt, config_.temperature, config_.max_tokens);
    std::lock_guard<std::mutex> lock(cache_index_mutex_);
    fs::path target;
    for (int probe = 0;; ++probe) {
        target = fs::path(*config_.cache_dir) /
                 ("mj-" + key + (probe ? "-" + std::to_string(probe) : "") + ".json");
        if (!fs::exists(target)) break;
        std::ifstream in(target);
        json j;
        try {
            in >> j;
            if (j.value("prompt", "") == prompt &&
                j.value("model", "") == config_.model_name) {
                return;  // already cached
            }
        } catch (const json::exception&) {
            break;  // torn entry; overwrite it
        }
    }

    json entry;
    entry["key"] = key;
    entry["model"] = config_.model_name;
    entry["temperature"] = config_.temperature;
    entry["max_tokens"] = config_.max_tokens;
    entry["prompt"] = prompt;
    entry["response_text"] = response;
    entry["created_at"] = static_cast<long>(std::time(nullptr));

    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << entry.dump(2) << '\n';
    }
    fs::rename(tmp, target);

    std::ofstream index(fs::path(*config_.cache_dir) / "index.jsonl", std::ios::app);
    json line;
    line["key"] = key;
    line["file"] = target.filename().string();
    line["created_at"] = entry["created_at"];
    index << line.dump() << '\n';
}

std::string Gateway::complete(const std::string& prompt) {
    completions_.fetch_add(1);

    if (config_.cache_dir) {
        if (auto hit = cache_lookup(prompt)) {
            cache_hits_.fetch_add(1);
            return *hit;
        }
    }
    if (!transport_) {
        throw TransportError("no endpoint configured (set --base-url or " +
                             std::string(kDefaultBaseUrlEnv) + ") and cache missed");
    }

    // Bounded concurrency across all callers of this gateway.
    std::unique_lock<std::mutex> slot(limiter_mutex_);
    limiter_cv_.wait(slot, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
    slot.unlock();

    struct SlotRelease {
        Gateway* g;
        ~SlotRelease() {
            {
                std::lock_guard<std::mutex> lock(g->limiter_mutex_);
                --g->in_flight_;
            }
            g->limiter_cv_.notify_one();
        }
    } release{this};

    ChatRequest request{config_.model_name, prompt, config_.temperature,
                        config_.max_tokens};
    int attempt = 0;
    for (;;) {
        try {
            network_calls_.fetch_add(1);
            std::string text = transport_->complete(request);
            if (text.empty()) {
                throw ResponseEmpty("assistant text is empty for model " +
                                    config_.model_name);
            }
            if (config_.cache_dir) cache_store(prompt, text);
            return text;
        } catch (const RateLimited&) {
            if (attempt >= config_.max_retries) throw;
        } catch (const TransportError& e) {
            bool retriable = e.status == 0 || e.status >= 500;
            if (!retriable || attempt >= config_.max_retries) throw;
        }
        std::this_thread::sleep_for(
            std::chrono::milliseconds(kBackoffBaseMs * (1L << attempt)));
        ++attempt;
    }
}

bool Gateway::reachable() const {
    if (transport_) return transport_->reachable();
    return config_.cache_dir.has_value();  // cache-only mode
}

GatewayStats Gateway::stats() const {
    return {completions_.load(), cache_hits_.load(), network_calls_.load()};
}

}  // namespace metajudge::gateway
