#include "metajudge/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "metajudge/core.hpp"
#include "metajudge/judge_gateway.hpp"
#include "metajudge/matching.hpp"
#include "metajudge/parse.hpp"
#include "metajudge/pipelines.hpp"
#include "metajudge/reward_service.hpp"

namespace metajudge::cli {

namespace {

/// Bad flags, unreadable inputs, invalid gateway setup. Exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GatewayFlags {
    std::string base_url;
    std::string model = "metajudge-default";
    std::string cache_dir;
    std::string mock_dir;
    int max_in_flight = 4;
    int max_retries = 3;
    double temperature = 0.0;
};

void add_gateway_flags(CLI::App* sub, GatewayFlags& flags, bool with_model = true) {
    sub->add_option("--base-url", flags.base_url,
                    "Chat-completion endpoint root (default $METAJUDGE_BASE_URL)");
    if (with_model) sub->add_option("--model", flags.model, "Model name");
    sub->add_option("--cache-dir", flags.cache_dir, "Response cache directory");
    sub->add_option("--mock-gateway", flags.mock_dir,
                    "Serve canned responses from this fixture directory");
    sub->add_option("--max-in-flight", flags.max_in_flight,
                    "Concurrent request cap per gateway")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-retries", flags.max_retries, "Retries on transport/5xx errors")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--temperature", flags.temperature, "Sampling temperature")
        ->check(CLI::NonNegativeNumber);
}

std::unique_ptr<gateway::Gateway> build_gateway(const GatewayFlags& flags,
                                                const std::string& model_override = "") {
    gateway::JudgeConfig cfg;
    cfg.base_url = flags.base_url;
    cfg.model_name = model_override.empty() ? flags.model : model_override;
    cfg.temperature = flags.temperature;
    cfg.max_in_flight = flags.max_in_flight;
    cfg.max_retries = flags.max_retries;
    if (!flags.cache_dir.empty()) cfg.cache_dir = flags.cache_dir;

    std::shared_ptr<gateway::Transport> transport;
    if (!flags.mock_dir.empty()) {
        transport = std::make_shared<gateway::MockTransport>(flags.mock_dir);
    }
    try {
        return std::make_unique<gateway::Gateway>(std::move(cfg), std::move(transport));
    } catch (const gateway::GatewayError& e) {
        throw ConfigError(e.what());
    }
}

void write_output(const std::string& out_path, const std::string& bytes) {
    if (out_path.empty() || out_path == "-") {
        std::cout << bytes;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + out_path);
    out << bytes;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

matching::ScoreMatrix load_matrix(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("matrix file " + path + " is not valid JSON: " + e.what());
    }

    try {
        if (j.is_array()) {
            return matching::ScoreMatrix(j.get<std::vector<std::vector<double>>>());
        }
        if (j.contains("entries")) {
            return matching::ScoreMatrix(
                j.at("entries").get<std::vector<std::vector<double>>>());
        }
        if (j.contains("scores")) {
            int n_human = j.at("n_human").get<int>();
            int n_model = j.at("n_model").get<int>();
            matching::ScoreMatrix m(n_human, n_model);
            for (const auto& [key, value] : j.at("scores").items()) {
                int i = 0, jdx = 0;
                if (std::sscanf(key.c_str(), "R%d@S%d", &i, &jdx) != 2) {
                    throw ConfigError("bad sparse score key: " + key);
                }
                if (jdx >= 1) m.set(i, jdx, value.get<double>());
            }
            return m;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad matrix file " + path + ": " + e.what());
    }
    throw ConfigError("matrix file must be a 2D array or carry entries/scores: " + path);
}

std::unique_ptr<CLI::App> make_app(std::function<void(int)> set_exit) {
    auto app = std::make_unique<CLI::App>(
        "MetaJudge rationale-consistency toolkit: atomize feedback, evaluate "
        "judges, score rewards");
    app->name("metajudge");
    app->require_subcommand(1);

    // ---- atomize ----------------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "atomize", "Decompose raw feedback into atomic-checklist instances");
        auto raw = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto drop_log = std::make_shared<std::string>();
        auto fail_fast = std::make_shared<bool>(false);
        auto flags = std::make_shared<GatewayFlags>();
        sub->add_option("--raw", *raw, "Raw feedback JSONL input")->required();
        sub->add_option("--out", *out, "Benchmark JSONL output")->required();
        sub->add_option("--drop-log", *drop_log, "Drop log JSONL (default <out>.drops.jsonl)");
        sub->add_flag("--fail-fast", *fail_fast, "Abort on the first record failure");
        add_gateway_flags(sub, *flags);
        sub->callback([=] {
            auto records = [&] {
                try {
                    return pipelines::load_raw_jsonl(*raw);
                } catch (const pipelines::PipelineError& e) {
                    throw ConfigError(e.what());
                }
            }();
            auto gw = build_gateway(*flags);
            pipelines::AtomizeOptions opts;
            opts.fail_fast = *fail_fast;
            auto result = pipelines::atomize_dataset(records, *gw, opts);
            save_benchmark_jsonl(*out, result.instances);
            std::string drops = drop_log->empty() ? *out + ".drops.jsonl" : *drop_log;
            pipelines::save_drop_log(drops, result.drops);
            std::cerr << "[atomize] kept " << result.instances.size() << ", dropped "
                      << result.drops.size() << "\n";
        });
    }

    // ---- evaluate ---------------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "evaluate", "Run candidate + matcher over a benchmark, emit a report");
        auto bench = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto format = std::make_shared<std::string>("json");
        auto top_k = std::make_shared<int>(5);
        auto candidate_model = std::make_shared<std::string>("candidate-default");
        auto matcher_model = std::make_shared<std::string>("matcher-default");
        auto strict = std::make_shared<bool>(false);
        auto fail_fast = std::make_shared<bool>(false);
        auto flags = std::make_shared<GatewayFlags>();
        sub->add_option("--bench", *bench, "Benchmark JSONL input")->required();
        sub->add_option("--out", *out, "Report output file (default stdout)");
        sub->add_option("--format", *format, "Report format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--top-k", *top_k, "Model reason budget")
            ->check(CLI::PositiveNumber);
        sub->add_option("--candidate-model", *candidate_model, "Candidate judge model");
        sub->add_option("--matcher-model", *matcher_model, "Matcher model");
        sub->add_flag("--strict-outcome", *strict,
                      "Require magnitude match, not just direction");
        sub->add_flag("--fail-fast", *fail_fast, "Abort on the first record failure");
        add_gateway_flags(sub, *flags, /*with_model=*/false);
        sub->callback([=] {
            auto instances = [&] {
                try {
                    return load_benchmark_jsonl(*bench);
                } catch (const std::exception& e) {
                    throw ConfigError(e.what());
                }
            }();
            auto candidate = build_gateway(*flags, *candidate_model);
            auto matcher = build_gateway(*flags, *matcher_model);
            pipelines::EvaluateOptions opts;
            opts.top_k = *top_k;
            opts.strict_outcome = *strict;
            opts.fail_fast = *fail_fast;
            auto report = pipelines::evaluate_run(instances, *candidate, *matcher, opts);
            auto fmt = *format == "csv" ? pipelines::ReportFormat::kCsv
                                        : pipelines::ReportFormat::kJson;
            write_output(*out, pipelines::emit_report(report, fmt));
            std::cerr << "[evaluate] " << report.overall.n << " samples, mean RC "
                      << format_double(report.overall.mean_rc) << ", outcome accuracy "
                      << format_double(report.overall.outcome_accuracy) << "\n";
        });
    }

    // ---- flawtag ----------------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "flawtag", "Label judgment rationale items with flaw tags F1..F7");
        auto judgments_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto fail_fast = std::make_shared<bool>(false);
        auto flags = std::make_shared<GatewayFlags>();
        sub->add_option("--judgments", *judgments_path,
                        "JSONL of {\"raw_text\": ...} judge outputs")
            ->required();
        sub->add_option("--out", *out, "Distribution JSON output (default stdout)");
        sub->add_flag("--fail-fast", *fail_fast, "Abort on the first record failure");
        add_gateway_flags(sub, *flags);
        sub->callback([=] {
            std::vector<JudgeOutput> judgments;
            std::istringstream in(read_file(*judgments_path));
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    auto j = nlohmann::json::parse(line);
                    judgments.push_back(parse::parse_genrm_output(
                        j.at("raw_text").get<std::string>(), /*strict=*/false));
                } catch (const std::exception& e) {
                    std::cerr << "[flawtag] " << *judgments_path << ":" << line_no
                              << " skipped: " << e.what() << "\n";
                    if (*fail_fast) throw;
                }
            }
            if (judgments.empty()) throw ConfigError("no parseable judgments in input");
            auto gw = build_gateway(*flags);
            auto dist = pipelines::flaw_tag_run(judgments, *gw, *fail_fast);
            write_output(*out, pipelines::emit_flaw_distribution(dist));
        });
    }

    // ---- report -----------------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "report", "Re-emit a stored JSON report (e.g. convert to CSV)");
        auto in_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto format = std::make_shared<std::string>("csv");
        sub->add_option("--in", *in_path, "Report JSON input")->required();
        sub->add_option("--out", *out, "Output file (default stdout)");
        sub->add_option("--format", *format, "Output format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->callback([=] {
            pipelines::RunReport report;
            try {
                report = pipelines::load_report_json(read_file(*in_path));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError("bad report file " + *in_path + ": " + e.what());
            }
            auto fmt = *format == "csv" ? pipelines::ReportFormat::kCsv
                                        : pipelines::ReportFormat::kJson;
            write_output(*out, pipelines::emit_report(report, fmt));
        });
    }

    // ---- reward-serve -----------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "reward-serve", "Serve POST /v1/reward for an external GRPO trainer");
        auto bind = std::make_shared<std::string>("127.0.0.1:8800");
        auto matcher_model = std::make_shared<std::string>("matcher-default");
        auto strict = std::make_shared<bool>(false);
        auto rationale_only = std::make_shared<bool>(false);
        auto flags = std::make_shared<GatewayFlags>();
        sub->add_option("--bind", *bind, "host:port to listen on");
        sub->add_option("--matcher-model", *matcher_model, "Matcher model");
        sub->add_flag("--strict-outcome", *strict,
                      "Require magnitude match, not just direction");
        sub->add_flag("--debug-rationale-only", *rationale_only)->group("");  // hidden
        add_gateway_flags(sub, *flags, /*with_model=*/false);
        sub->callback([=] {
            auto colon = bind->rfind(':');
            if (colon == std::string::npos) {
                throw ConfigError("--bind must be host:port, got " + *bind);
            }
            reward::ServeOptions opts;
            opts.host = bind->substr(0, colon);
            opts.port = std::stoi(bind->substr(colon + 1));
            opts.scoring.strict_outcome = *strict;
            opts.scoring.rationale_only_debug = *rationale_only;
            auto matcher = build_gateway(*flags, *matcher_model);
            reward::RewardService service(*matcher, opts);
            try {
                service.run();
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());  // unbindable address
            }
        });
    }

    // ---- match ------------------------------------------------------------
    {
        auto* sub = app->add_subcommand(
            "match", "Solve the optimal one-to-one matching for a score matrix file");
        auto matrix_path = std::make_shared<std::string>();
        auto oracle = std::make_shared<bool>(false);
        sub->add_option("--matrix", *matrix_path, "Score matrix JSON")->required();
        sub->add_flag("--oracle", *oracle, "Cross-check with the brute-force oracle");
        sub->callback([=] {
            matching::ScoreMatrix m = load_matrix(*matrix_path);
            matching::MatchingResult result = matching::optimal_matching(m);
            std::cout << "n_human: " << m.n_human() << ", n_model: " << m.n_model()
                      << "\n";
            std::cout << "pairs:";
            for (const auto& [i, j] : result.pairs) {
                std::cout << " (" << i << "," << j << ")";
            }
            std::cout << "\nper_human:";
            for (const auto& [i, score] : result.per_human) {
                std::cout << " R" << i << "=" << format_double(score);
            }
            std::cout << "\ntotal: " << format_double(result.total) << "\n";
            if (*oracle) {
                auto brute = matching::brute_force_matching(m);
                bool agree = brute.pairs == result.pairs &&
                             brute.total == result.total;
                std::cout << "oracle: " << (agree ? "agree" : "DISAGREE") << " (total "
                          << format_double(brute.total) << ")\n";
                if (!agree) throw std::runtime_error("oracle disagreement");
            }
        });
    }

    (void)set_exit;
    return app;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    auto app = make_app(nullptr);

    std::vector<const char*> argv;
    argv.push_back("metajudge");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app->parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app->help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app->help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app->help();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

std::string help_text() {
    auto app = make_app(nullptr);
    std::string text = app->help();
    for (const auto* sub : app->get_subcommands({})) {
        text += "\n";
        text += sub->help();
    }
    return text;
}

}  // namespace metajudge::cli
