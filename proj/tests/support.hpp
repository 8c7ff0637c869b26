#pragma once

// Shared test-only helpers: fake transports, temp dirs, corpus runner.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "metajudge/judge_gateway.hpp"
#include "metajudge/parse.hpp"

namespace testsupport {

/// Scriptable transport with call counting and a concurrency high-water mark.
struct FakeTransport : metajudge::gateway::Transport {
    std::function<std::string(const metajudge::gateway::ChatRequest&)> fn;
    std::atomic<long> calls{0};
    std::atomic<int> concurrent{0};
    std::atomic<int> max_concurrent{0};

    explicit FakeTransport(
        std::function<std::string(const metajudge::gateway::ChatRequest&)> f)
        : fn(std::move(f)) {}

    std::string complete(const metajudge::gateway::ChatRequest& request) override {
        calls.fetch_add(1);
        int now = concurrent.fetch_add(1) + 1;
        int prev = max_concurrent.load();
        while (now > prev && !max_concurrent.compare_exchange_weak(prev, now)) {
        }
        struct Guard {
            std::atomic<int>& c;
            ~Guard() { c.fetch_sub(1); }
        } guard{concurrent};
        return fn(request);
    }

    bool reachable() override { return true; }
};

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("metajudge-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string str() const { return path.string(); }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Parser conformance corpus
// ---------------------------------------------------------------------------

struct CorpusOutcome {
    int cases = 0;
    int failures = 0;
    std::string details;
};

/// Runs every case in the JSONL corpus against the parsers and compares
/// observed results (or error class names) with the recorded expectations.
inline CorpusOutcome run_parser_corpus(const std::string& path) {
    using nlohmann::json;
    namespace parse = metajudge::parse;

    CorpusOutcome outcome;
    std::ifstream in(path);
    if (!in) {
        outcome.failures = 1;
        outcome.details = "cannot open corpus: " + path;
        return outcome;
    }

    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line);
        ++outcome.cases;
        const std::string name = j.at("name").get<std::string>();
        const std::string kind = j.at("kind").get<std::string>();
        const std::string text = j.at("text").get<std::string>();
        const json& expect = j.at("expect");

        auto fail = [&](const std::string& why) {
            ++outcome.failures;
            outcome.details += "  [" + name + "] " + why + "\n";
        };

        std::string got_error;
        try {
            if (kind == "genrm") {
                auto output = parse::parse_genrm_output(text, j.value("strict", false));
                if (expect.contains("error")) {
                    fail("expected error " + expect["error"].get<std::string>() +
                         ", got a parsed output");
                    continue;
                }
                if (metajudge::to_string(output.verdict) !=
                    expect.at("verdict").get<std::string>()) {
                    fail("verdict mismatch: got " + metajudge::to_string(output.verdict));
                    continue;
                }
                auto expected_reasons = expect.at("reasons").get<std::vector<std::string>>();
                if (output.reasons.size() != expected_reasons.size()) {
                    fail("reason count mismatch");
                    continue;
                }
                bool ok = true;
                for (std::size_t k = 0; k < expected_reasons.size(); ++k) {
                    const auto& item = output.reasons.items[k];
                    if (item.text != expected_reasons[k] ||
                        item.rank != static_cast<int>(k) + 1) {
                        ok = false;
                    }
                }
                if (!ok) fail("reason text/rank mismatch");
            } else if (kind == "matcher") {
                auto result = parse::parse_matcher_scores(
                    text, j.at("n_human").get<int>(), j.at("n_model").get<int>());
                if (expect.contains("error")) {
                    fail("expected error, got scores");
                    continue;
                }
                auto rows = expect.at("scores").get<std::vector<std::vector<double>>>();
                if (rows.size() != result.scores.size()) {
                    fail("score count mismatch");
                    continue;
                }
                bool ok = true;
                for (std::size_t k = 0; k < rows.size(); ++k) {
                    const auto& s = result.scores[k];
                    if (s.human_index != static_cast<int>(rows[k][0]) ||
                        s.model_index != static_cast<int>(rows[k][1]) ||
                        s.score != rows[k][2]) {
                        ok = false;
                    }
                }
                if (!ok) {
                    fail("score values mismatch");
                    continue;
                }
                if (expect.contains("warnings") &&
                    static_cast<int>(result.warnings.size()) !=
                        expect["warnings"].get<int>()) {
                    fail("warning count mismatch: got " +
                         std::to_string(result.warnings.size()));
                }
            } else if (kind == "decomposition") {
                auto result = parse::parse_decomposition(text);
                if (expect.contains("error")) {
                    fail("expected error, got claims");
                    continue;
                }
                if (result.claim_count != expect.at("claim_count").get<int>()) {
                    fail("claim_count mismatch: got " +
                         std::to_string(result.claim_count));
                    continue;
                }
                if (expect.contains("claims")) {
                    auto texts = expect["claims"].get<std::vector<std::string>>();
                    bool ok = texts.size() == result.claims.size();
                    for (std::size_t k = 0; ok && k < texts.size(); ++k) {
                        ok = result.claims[k].text == texts[k];
                    }
                    if (!ok) {
                        fail("claim texts mismatch");
                        continue;
                    }
                }
                if (expect.contains("ignored") &&
                    static_cast<int>(result.ignored.size()) !=
                        expect["ignored"].get<int>()) {
                    fail("ignored count mismatch");
                    continue;
                }
                if (expect.contains("warnings") &&
                    static_cast<int>(result.warnings.size()) !=
                        expect["warnings"].get<int>()) {
                    fail("warning count mismatch: got " +
                         std::to_string(result.warnings.size()));
                }
            } else {
                fail("unknown corpus kind: " + kind);
            }
            continue;
        } catch (const parse::MissingBlock&) {
            got_error = "MissingBlock";
        } catch (const parse::MissingVerdict&) {
            got_error = "MissingVerdict";
        } catch (const parse::EmptyReasons&) {
            got_error = "EmptyReasons";
        } catch (const parse::IndexOutOfRange&) {
            got_error = "IndexOutOfRange";
        } catch (const parse::ScoreOutOfRange&) {
            got_error = "ScoreOutOfRange";
        } catch (const std::exception& e) {
            got_error = std::string("unexpected: ") + e.what();
        }
        if (!expect.contains("error")) {
            fail("unexpected error " + got_error);
        } else if (expect["error"].get<std::string>() != got_error) {
            fail("error mismatch: want " + expect["error"].get<std::string>() +
                 ", got " + got_error);
        }
    }
    return outcome;
}

/// Random well-formed JudgeOutput for round-trip checks.
inline metajudge::JudgeOutput random_judge_output(std::mt19937& rng) {
    static const char* words[] = {"response", "misses",    "the",    "required",
                                  "keyword",  "exceeds",   "length", "limit",
                                  "cites",    "incorrect", "source", "formatting",
                                  "drops",    "section",   "B",      "A"};
    std::uniform_int_distribution<int> n_reasons(1, 7);
    std::uniform_int_distribution<int> n_words(2, 9);
    std::uniform_int_distribution<int> word(0, 15);
    std::uniform_int_distribution<int> verdict(0, 4);

    std::vector<std::string> texts;
    int count = n_reasons(rng);
    for (int i = 0; i < count; ++i) {
        std::string t;
        int w = n_words(rng);
        for (int k = 0; k < w; ++k) {
            if (k) t += " ";
            t += words[word(rng)];
        }
        texts.push_back(t);
    }
    metajudge::JudgeOutput output;
    output.reasons =
        metajudge::make_checklist(metajudge::ChecklistOrigin::kModel, texts, "S");
    output.verdict = static_cast<metajudge::Verdict>(verdict(rng));
    return output;
}

}  // namespace testsupport
