#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "metajudge/core.hpp"

namespace metajudge::gateway {

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A prompt slot that must be nonempty is empty.
struct MissingField : GatewayError {
    using GatewayError::GatewayError;
};

/// A reason list that must be nonempty is empty.
struct EmptyList : GatewayError {
    using GatewayError::GatewayError;
};

/// API key unresolvable, or the server rejected credentials.
struct AuthError : GatewayError {
    using GatewayError::GatewayError;
};

/// 429 persisted through all retries.
struct RateLimited : GatewayError {
    using GatewayError::GatewayError;
};

/// Connection failure or server-side error (after retries).
struct TransportError : GatewayError {
    explicit TransportError(const std::string& what, int status = 0)
        : GatewayError(what), status(status) {}
    int status;  // HTTP status, 0 for connection-level failures
};

/// The server answered but the assistant text was empty.
struct ResponseEmpty : GatewayError {
    using GatewayError::GatewayError;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

inline constexpr const char* kDefaultApiKeyEnv = "METAJUDGE_API_KEY";
inline constexpr const char* kDefaultBaseUrlEnv = "METAJUDGE_BASE_URL";

struct JudgeConfig {
    std::string base_url;  // falls back to $METAJUDGE_BASE_URL when empty
    std::string model_name = "metajudge-default";
    std::string api_key_source = kDefaultApiKeyEnv;
    double temperature = 0.0;
    int max_tokens = 8192;
    int max_in_flight = 4;
    int max_retries = 3;
    std::optional<std::string> cache_dir;

    void validate() const;

    /// Stable hash of every field that affects completions; stamped into
    /// run reports.
    std::string fingerprint() const;
};

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

/// Decomposition prompt: free-form feedback in, atomic claims out.
std::string render_decomposition_prompt(const std::vector<ChatTurn>& history,
                                        const std::string& query,
                                        const std::string& response_1,
                                        const std::string& response_2,
                                        const RawFeedback& feedback);

/// Matcher prompt: model reasons as the original list (S1..Sn), human
/// checklist as the reference list (R1..Rm), five-anchor rubric.
std::string render_metajudge_prompt(const RationaleChecklist& source,
                                    const RationaleChecklist& target);

/// Candidate-judge prompt: compare two responses, emit ordered reasons and
/// one of the five boxed verdicts.
std::string render_genrm_prompt(const BenchmarkInstance& instance);

/// Flaw-tag audit prompt over a reason list; requests one "- S<k>: [...]"
/// line per item.
std::string render_flaw_tag_prompt(const RationaleChecklist& reasons);

/// Version stamp of the locally constructed flaw-tag prompt.
inline constexpr const char* kFlawTagPromptVersion = "flawtag-v1";

/// Stable hash over all four prompt templates; stamped into run reports so
/// scores stay attributable to the exact prompt text.
std::string prompt_fingerprint();

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct ChatRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 0;
};

/// One chat-completion hop. Implementations throw GatewayError subclasses;
/// retry policy lives in the Gateway, not here.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual bool reachable() = 0;
};

/// HTTP chat-completion transport (POST {base_url}/chat/completions with a
/// bearer token resolved from the configured environment variable).
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key_env);
    std::string complete(const ChatRequest& request) override;
    bool reachable() override;

private:
    std::string base_url_;
    std::string api_key_env_;
};

/// Canned responses from a fixture directory. Each *.json rule file holds
/// {"prompt_contains": ["..."], "response": "..."}; the first rule (sorted
/// by file name) whose substrings all occur in the prompt wins.
class MockTransport : public Transport {
public:
    explicit MockTransport(const std::string& fixture_dir);
    std::string complete(const ChatRequest& request) override;
    bool reachable() override { return true; }

    long calls() const { return calls_.load(); }

private:
    struct Rule {
        std::vector<std::string> prompt_contains;
        std::string response;
    };
    std::vector<Rule> rules_;
    std::atomic<long> calls_{0};
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Deterministic content-hash cache key over (model, prompt, temperature,
/// max_tokens). Stable across processes.
std::string cache_key(const std::string& model, const std::string& prompt,
                      double temperature, int max_tokens);

struct GatewayStats {
    long completions = 0;
    long cache_hits = 0;
    long network_calls = 0;
};

/// Shared access point to one judge/matcher/candidate model: disk cache,
/// bounded concurrency, retries with exponential backoff. Shareable across
/// threads.
class Gateway {
public:
    explicit Gateway(JudgeConfig config, std::shared_ptr<Transport> transport = nullptr);

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Cache -> limiter -> transport with retries. Throws AuthError,
    /// RateLimited, TransportError, ResponseEmpty.
    std::string complete(const std::string& prompt);

    const JudgeConfig& config() const { return config_; }
    bool reachable() const;
    GatewayStats stats() const;

private:
    std::optional<std::string> cache_lookup(const std::string& prompt) const;
    void cache_store(const std::string& prompt, const std::string& response);

    JudgeConfig config_;
    std::shared_ptr<Transport> transport_;

    mutable std::mutex limiter_mutex_;
    std::condition_variable limiter_cv_;
    int in_flight_ = 0;

    mutable std::mutex cache_index_mutex_;

    std::atomic<long> completions_{0};
    std::atomic<long> cache_hits_{0};
    std::atomic<long> network_calls_{0};
};

}  // namespace metajudge::gateway
