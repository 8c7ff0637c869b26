#include "metajudge/reward_service.hpp"

#include <atomic>
#include <iostream>
#include <thread>

#include <json.hpp>
#include <httplib.h>

#include "metajudge/matching.hpp"
#include "metajudge/parse.hpp"
#include "metajudge/pipelines.hpp"

namespace metajudge::reward {

using nlohmann::ordered_json;

RewardResponse score_group(const RewardRequest& req, gateway::Gateway& matcher,
                           const ScoreOptions& opts) {
    if (req.completions.empty()) throw BadRequest("completions must be nonempty");
    if (req.top_k < 1) throw BadRequest("top_k must be >= 1");
    const int n_human = static_cast<int>(req.instance.human_checklist.size());
    if (n_human < 1) throw BadRequest("instance needs a nonempty human checklist");

    RewardResponse response;
    response.per_completion.resize(req.completions.size());
    std::atomic<long> matcher_calls{0};

    std::vector<std::exception_ptr> errors(req.completions.size());
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= req.completions.size()) return;
                try {
                    CompletionScore& slot = response.per_completion[i];
                    JudgeOutput output;
                    try {
                        output = parse::parse_genrm_output(req.completions[i],
                                                           /*strict=*/false);
                    } catch (const parse::ParseError&) {
                        slot.parse_ok = false;
                        slot.metrics = {};
                        continue;
                    }
                    if (static_cast<int>(output.reasons.size()) > req.top_k) {
                        output.reasons.items.resize(req.top_k);
                    }
                    const int n_model = static_cast<int>(output.reasons.size());

                    matching::MatchingResult match;
                    if (n_model > 0) {
                        std::string matcher_text = matcher.complete(
                            gateway::render_metajudge_prompt(output.reasons,
                                                             req.instance.human_checklist));
                        matcher_calls.fetch_add(1);
                        parse::MatcherScores scores =
                            parse::parse_matcher_scores(matcher_text, n_human, n_model);
                        match = matching::optimal_matching(
                            pipelines::to_score_matrix(n_human, n_model, scores.scores));
                    } else {
                        for (int h = 1; h <= n_human; ++h) match.per_human[h] = 0.0;
                    }
                    slot.metrics = metrics::make_sample_metrics(
                        match, n_human, n_model, output.verdict, req.instance.label,
                        opts.strict_outcome);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        int workers = std::max(
            1, std::min<int>(matcher.config().max_in_flight,
                             static_cast<int>(req.completions.size())));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);  // gateway/matcher trouble -> 503
    }

    std::vector<double> rewards;
    rewards.reserve(response.per_completion.size());
    for (const auto& slot : response.per_completion) {
        rewards.push_back(opts.rationale_only_debug ? slot.metrics.ap
                                                    : slot.metrics.hybrid);
    }
    response.advantages = metrics::make_group_rewards(std::move(rewards)).advantages;
    response.matcher_calls = matcher_calls.load();
    return response;
}

RewardRequest reward_request_from_json(const std::string& bytes) {
    ordered_json j;
    try {
        j = ordered_json::parse(bytes);
    } catch (const ordered_json::exception& e) {
        throw BadRequest(std::string("request body is not valid JSON: ") + e.what());
    }
    RewardRequest req;
    try {
        req.instance = instance_from_json_line(j.at("instance").dump());
        for (const auto& c : j.at("completions")) {
            req.completions.push_back(c.get<std::string>());
        }
        if (j.contains("top_k")) req.top_k = j.at("top_k").get<int>();
    } catch (const BadRequest&) {
        throw;
    } catch (const std::exception& e) {
        throw BadRequest(std::string("malformed reward request: ") + e.what());
    }
    return req;
}

std::string reward_response_to_json(const RewardResponse& response) {
    ordered_json j;
    j["per_completion"] = ordered_json::array();
    for (const auto& slot : response.per_completion) {
        ordered_json row;
        row["rc"] = slot.metrics.rc;
        row["outcome"] = slot.metrics.outcome;
        row["ap"] = slot.metrics.ap;
        row["hybrid"] = slot.metrics.hybrid;
        row["parse_ok"] = slot.parse_ok;
        j["per_completion"].push_back(std::move(row));
    }
    j["advantages"] = response.advantages;
    j["matcher_calls"] = response.matcher_calls;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// HTTP service
// ---------------------------------------------------------------------------

struct RewardService::Impl {
    Impl(gateway::Gateway& matcher, ServeOptions opts)
        : matcher(matcher), opts(std::move(opts)) {
        routes();
    }

    void routes() {
        server.Post("/v1/reward", [this](const httplib::Request& req,
                                         httplib::Response& res) {
            requests.fetch_add(1);
            reward_requests.fetch_add(1);
            try {
                RewardRequest reward_req = reward_request_from_json(req.body);
                completions.fetch_add(static_cast<long>(reward_req.completions.size()));
                RewardResponse out = score_group(reward_req, matcher, opts.scoring);
                for (const auto& slot : out.per_completion) {
                    if (!slot.parse_ok) parse_failures.fetch_add(1);
                }
                matcher_calls.fetch_add(out.matcher_calls);
                res.set_content(reward_response_to_json(out), "application/json");
            } catch (const BadRequest& e) {
                res.status = 400;
                res.set_content(error_body(e.what()), "application/json");
            } catch (const std::exception& e) {
                res.status = 503;  // retriable: gateway or matcher trouble
                res.set_content(error_body(e.what()), "application/json");
            }
        });

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            requests.fetch_add(1);
            if (matcher.reachable()) {
                res.set_content("{\"status\":\"ok\"}\n", "application/json");
            } else {
                res.status = 503;
                res.set_content(error_body("matcher gateway unreachable"),
                                "application/json");
            }
        });

        server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            requests.fetch_add(1);
            long comp = completions.load();
            long failures = parse_failures.load();
            std::string body;
            body += "requests_total " + std::to_string(requests.load()) + "\n";
            body += "reward_requests_total " + std::to_string(reward_requests.load()) + "\n";
            body += "completions_total " + std::to_string(comp) + "\n";
            body += "matcher_calls_total " + std::to_string(matcher_calls.load()) + "\n";
            body += "parse_failures_total " + std::to_string(failures) + "\n";
            double rate = comp == 0 ? 0.0 : static_cast<double>(failures) / comp;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "parse_failure_rate %.6f\n", rate);
            body += buf;
            res.set_content(body, "text/plain");
        });
    }

    static std::string error_body(const std::string& message) {
        ordered_json j;
        j["error"] = message;
        return j.dump() + "\n";
    }

    gateway::Gateway& matcher;
    ServeOptions opts;
    httplib::Server server;
    std::thread thread;
    std::atomic<long> requests{0}, reward_requests{0}, completions{0},
        matcher_calls{0}, parse_failures{0};
};

RewardService::RewardService(gateway::Gateway& matcher, ServeOptions opts)
    : impl_(std::make_unique<Impl>(matcher, std::move(opts))) {}

RewardService::~RewardService() { stop(); }

int RewardService::start() {
    int port = impl_->opts.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->opts.host);
        if (port < 0) throw std::runtime_error("cannot bind " + impl_->opts.host);
    } else {
        if (!impl_->server.bind_to_port(impl_->opts.host, port)) {
            throw std::runtime_error("cannot bind " + impl_->opts.host + ":" +
                                     std::to_string(port));
        }
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void RewardService::run() {
    if (!impl_->server.bind_to_port(impl_->opts.host, impl_->opts.port)) {
        throw std::runtime_error("cannot bind " + impl_->opts.host + ":" +
                                 std::to_string(impl_->opts.port));
    }
    std::cerr << "[reward-serve] listening on " << impl_->opts.host << ":"
              << impl_->opts.port << "\n";
    impl_->server.listen_after_bind();
}

void RewardService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace metajudge::reward
