#pragma once

#include <memory>
#include <string>
#include <vector>

#include "metajudge/core.hpp"
#include "metajudge/judge_gateway.hpp"
#include "metajudge/metrics.hpp"

namespace metajudge::reward {

/// Malformed or invalid request; maps to HTTP 400.
struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One GRPO rollout group to score: the benchmark instance plus the raw
/// candidate-judge texts the trainer sampled.
struct RewardRequest {
    BenchmarkInstance instance;
    std::vector<std::string> completions;  // nonempty
    int top_k = 5;
};

struct CompletionScore {
    metrics::SampleMetrics metrics;
    bool parse_ok = true;
};

struct RewardResponse {
    std::vector<CompletionScore> per_completion;  // one slot per completion
    std::vector<double> advantages;               // standardized hybrids
    long matcher_calls = 0;
};

struct ScoreOptions {
    bool strict_outcome = false;
    /// Debug only: standardize AP instead of the hybrid reward. Training on
    /// rationale reward alone invites reward hacking; keep this off.
    bool rationale_only_debug = false;
};

/// Scores every completion (lenient parse -> top-k truncation -> matcher ->
/// optimal matching -> metrics) and standardizes the group rewards.
/// Unparseable completions keep their slot with hybrid 0 and parse_ok=false.
/// Gateway and matcher wire errors propagate (the HTTP layer answers 503).
RewardResponse score_group(const RewardRequest& req, gateway::Gateway& matcher,
                           const ScoreOptions& opts = {});

RewardRequest reward_request_from_json(const std::string& bytes);
std::string reward_response_to_json(const RewardResponse& response);

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8800;  // 0 picks an ephemeral port
    ScoreOptions scoring;
};

/// HTTP wrapper: POST /v1/reward, GET /healthz, GET /metrics.
class RewardService {
public:
    RewardService(gateway::Gateway& matcher, ServeOptions opts);
    ~RewardService();

    /// Binds and serves on a background thread, returning the bound port.
    int start();

    /// Binds and serves on the calling thread until stop().
    void run();

    /// Stops listening and drains in-flight requests.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace metajudge::reward
