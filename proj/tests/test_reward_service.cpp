#include <doctest.h>

#include <json.hpp>
#include <httplib.h>

#include "metajudge/parse.hpp"
#include "metajudge/reward_service.hpp"
#include "support.hpp"

using namespace metajudge;
using namespace metajudge::reward;
using testsupport::FakeTransport;

namespace {

BenchmarkInstance group_instance() {
    BenchmarkInstance inst;
    inst.id = "grp-1";
    inst.domain = Domain::kCode;
    inst.query = "why does the loop never terminate";
    inst.response_a = "posts a fixed version without explaining";
    inst.response_b = "explains the off-by-one and fixes it";
    inst.label = {Direction::kB, Magnitude::kSlight};
    inst.human_checklist = make_checklist(
        ChecklistOrigin::kHuman,
        {"identifies the off-by-one in the loop bound",
         "notes response A gives no explanation",
         "checks the fix against the empty-list case"},
        "R");
    return inst;
}

std::string completion(const std::vector<std::string>& reasons,
                       const std::string& verdict) {
    JudgeOutput j;
    j.reasons = make_checklist(ChecklistOrigin::kModel, reasons, "S");
    j.verdict = *verdict_from_string(verdict);
    return parse::render_genrm_output(j);
}

std::shared_ptr<FakeTransport> group_matcher_transport() {
    return std::make_shared<FakeTransport>(
        [](const gateway::ChatRequest& req) -> std::string {
            const std::string& p = req.prompt;
            auto block = [](const std::vector<std::string>& lines) {
                std::string out = "<RESULT_START>\n";
                for (const auto& l : lines) out += "- " + l + "\n";
                return out + "<RESULT_END>\n";
            };
            if (p.find("rsn-c1") != std::string::npos) {
                return block({"R1@S1: 1.00", "R2@S2: 1.00", "R3@S3: 1.00"});
            }
            if (p.find("rsn-c2") != std::string::npos) {
                return block({"R1@S2: 0.50", "R2@S0: 0.00", "R3@S0: 0.00"});
            }
            if (p.find("rsn-c4") != std::string::npos) {
                return block({"R1@S0: 0.00", "R2@S0: 0.00", "R3@S0: 0.00"});
            }
            throw gateway::TransportError("unknown matcher prompt");
        });
}

RewardRequest group_request() {
    RewardRequest req;
    req.instance = group_instance();
    req.top_k = 5;
    req.completions = {
        completion({"rsn-c1 off-by-one in bound", "rsn-c1 no explanation in A",
                    "rsn-c1 empty-list check"},
                   "B>A"),
        completion({"rsn-c2 generic style remark", "rsn-c2 prefers shorter"}, "A>B"),
        "completely unstructured text with no verdict anywhere",
        completion({"rsn-c4 vague praise"}, "B>A"),
    };
    return req;
}

gateway::JudgeConfig matcher_config() {
    gateway::JudgeConfig cfg;
    cfg.model_name = "matcher-fake";
    cfg.max_retries = 0;
    cfg.max_in_flight = 4;
    return cfg;
}

}  // namespace

TEST_SUITE("reward_service") {

TEST_CASE("score_group: mixed group with an unparseable completion") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    RewardResponse res = score_group(group_request(), matcher);

    REQUIRE(res.per_completion.size() == 4);
    const auto& c1 = res.per_completion[0];
    CHECK(c1.parse_ok);
    CHECK(c1.metrics.rc == 1.0);
    CHECK(c1.metrics.outcome == 1);
    CHECK(c1.metrics.ap == 1.0);
    CHECK(c1.metrics.hybrid == 1.0);

    const auto& c2 = res.per_completion[1];
    CHECK(c2.parse_ok);
    CHECK(c2.metrics.outcome == 0);
    CHECK(c2.metrics.hybrid == 0.0);  // gate closed despite partial rationale
    CHECK(c2.metrics.rc == doctest::Approx(0.5 / 3).epsilon(1e-12));

    const auto& c3 = res.per_completion[2];
    CHECK(!c3.parse_ok);
    CHECK(c3.metrics.hybrid == 0.0);
    CHECK(c3.metrics.rc == 0.0);

    const auto& c4 = res.per_completion[3];
    CHECK(c4.parse_ok);
    CHECK(c4.metrics.outcome == 1);
    CHECK(c4.metrics.ap == 0.0);
    CHECK(c4.metrics.hybrid == 0.0);  // correct outcome, empty rationale overlap

    CHECK(res.matcher_calls == 3);  // the unparseable slot never reaches the matcher

    std::vector<double> hybrids;
    for (const auto& c : res.per_completion) hybrids.push_back(c.metrics.hybrid);
    CHECK(res.advantages == metrics::group_advantages(hybrids));
}

TEST_CASE("score_group: hand-computed advantages for hybrids 1,0,1,0") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    RewardRequest req = group_request();
    req.completions = {req.completions[0], req.completions[1], req.completions[0],
                       req.completions[1]};
    RewardResponse res = score_group(req, matcher);
    REQUIRE(res.advantages.size() == 4);
    CHECK(res.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.advantages[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(res.advantages[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.advantages[3] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("score_group: identical correct completions get all-zero advantages") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    RewardRequest req = group_request();
    req.completions.assign(8, req.completions[0]);
    RewardResponse res = score_group(req, matcher);
    for (double a : res.advantages) CHECK(a == 0.0);
}

TEST_CASE("score_group: request validation") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    RewardRequest req = group_request();
    req.completions.clear();
    CHECK_THROWS_AS(score_group(req, matcher), BadRequest);

    req = group_request();
    req.top_k = 0;
    CHECK_THROWS_AS(score_group(req, matcher), BadRequest);

    req = group_request();
    req.instance.human_checklist.items.clear();
    CHECK_THROWS_AS(score_group(req, matcher), BadRequest);
}

TEST_CASE("parse-failure completions never receive positive reward") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    RewardRequest req = group_request();
    req.completions = {"garbage one", req.completions[0], "\\boxed{nonsense}"};
    RewardResponse res = score_group(req, matcher);
    CHECK(!res.per_completion[0].parse_ok);
    CHECK(!res.per_completion[2].parse_ok);
    CHECK(res.per_completion[0].metrics.hybrid == 0.0);
    CHECK(res.per_completion[2].metrics.hybrid == 0.0);
    CHECK(res.advantages[0] < 0.0);  // zero reward in a nonconstant group
}

TEST_CASE("HTTP: POST /v1/reward matches the offline computation byte for byte") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    ServeOptions opts;
    opts.port = 0;
    RewardService service(matcher, opts);
    int port = service.start();

    // Offline reference over the same request.
    RewardResponse offline = score_group(group_request(), matcher);

    nlohmann::ordered_json body;
    body["instance"] = nlohmann::ordered_json::parse(
        instance_to_json_line(group_instance()));
    body["completions"] = group_request().completions;
    body["top_k"] = 5;

    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/v1/reward", body.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(res->body == reward_response_to_json(offline));

    auto parsed = nlohmann::json::parse(res->body);
    CHECK(parsed.at("per_completion").size() == 4);
    CHECK(parsed.at("per_completion").at(2).at("parse_ok") == false);
    CHECK(parsed.at("per_completion").at(2).at("hybrid") == 0.0);

    service.stop();
}

TEST_CASE("HTTP: validation failures answer 400, health and metrics respond") {
    gateway::Gateway matcher(matcher_config(), group_matcher_transport());
    ServeOptions opts;
    opts.port = 0;
    RewardService service(matcher, opts);
    int port = service.start();
    httplib::Client client("127.0.0.1", port);

    nlohmann::json body;
    body["instance"] = nlohmann::json::parse(instance_to_json_line(group_instance()));
    body["completions"] = nlohmann::json::array();
    auto res = client.Post("/v1/reward", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    res = client.Post("/v1/reward", "not json at all", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    res = client.Get("/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);

    res = client.Get("/metrics");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.find("reward_requests_total") != std::string::npos);
    CHECK(res->body.find("parse_failure_rate") != std::string::npos);

    service.stop();
}

TEST_CASE("HTTP: identical requests are idempotent with the cache enabled") {
    testsupport::TempDir dir("reward-cache");
    gateway::JudgeConfig cfg = matcher_config();
    cfg.cache_dir = dir.str();
    gateway::Gateway matcher(cfg, group_matcher_transport());

    ServeOptions opts;
    opts.port = 0;
    RewardService service(matcher, opts);
    int port = service.start();

    nlohmann::ordered_json body;
    body["instance"] =
        nlohmann::ordered_json::parse(instance_to_json_line(group_instance()));
    body["completions"] = group_request().completions;
    body["top_k"] = 5;

    httplib::Client client("127.0.0.1", port);
    auto first = client.Post("/v1/reward", body.dump(), "application/json");
    auto second = client.Post("/v1/reward", body.dump(), "application/json");
    REQUIRE(first);
    REQUIRE(second);
    CHECK(first->status == 200);
    CHECK(first->body == second->body);
    CHECK(matcher.stats().cache_hits >= 3);  // second pass served from disk

    service.stop();
}

TEST_CASE("HTTP: matcher outages map to a retriable 503") {
    auto outage = std::make_shared<FakeTransport>(
        [](const gateway::ChatRequest&) -> std::string {
            throw gateway::TransportError("matcher down", 503);
        });
    gateway::Gateway matcher(matcher_config(), outage);
    ServeOptions opts;
    opts.port = 0;
    RewardService service(matcher, opts);
    int port = service.start();

    nlohmann::json body;
    body["instance"] = nlohmann::json::parse(instance_to_json_line(group_instance()));
    body["completions"] = group_request().completions;
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/v1/reward", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 503);

    service.stop();
}

}  // TEST_SUITE
