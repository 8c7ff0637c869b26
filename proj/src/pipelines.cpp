#include "metajudge/pipelines.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fnv.hpp"

namespace metajudge::pipelines {

using nlohmann::ordered_json;

namespace {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// captured per index; with fail_fast the first one is rethrown after all
/// workers drain.
void parallel_for(std::size_t n, int workers, bool fail_fast,
                  const std::function<void(std::size_t)>& fn,
                  std::vector<std::exception_ptr>& errors) {
    errors.assign(n, nullptr);
    if (n == 0) return;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n || stop.load()) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                if (fail_fast) stop.store(true);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();

    if (fail_fast) {
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }
}

std::string describe_exception(const std::exception_ptr& err) {
    try {
        std::rethrow_exception(err);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Atomization
// ---------------------------------------------------------------------------

AtomizeResult atomize_dataset(const std::vector<RawRecord>& records,
                              gateway::Gateway& gw, const AtomizeOptions& opts) {
    struct Slot {
        bool kept = false;
        BenchmarkInstance instance;
        DropEntry drop;
    };
    std::vector<Slot> slots(records.size());

    auto process = [&](std::size_t i) {
        const RawRecord& rec = records[i];
        Slot& slot = slots[i];
        std::string prompt;
        try {
            prompt = gateway::render_decomposition_prompt(
                rec.history, rec.query, rec.response_a, rec.response_b, rec.feedback);
        } catch (const gateway::MissingField& e) {
            slot.drop = {rec.id, "parse-failure", e.what()};
            return;
        }

        std::string text;
        try {
            text = gw.complete(prompt);
        } catch (const gateway::GatewayError& e) {
            if (opts.fail_fast) throw;
            slot.drop = {rec.id, "gateway-error", e.what()};
            return;
        }

        parse::DecompositionResult decomp;
        try {
            decomp = parse::parse_decomposition(text);
        } catch (const parse::ParseError& e) {
            slot.drop = {rec.id, "parse-failure", e.what()};
            return;
        }

        const int n = decomp.claim_count;
        if (n < 3) {
            slot.drop = {rec.id, "too-few", std::to_string(n) + " claims"};
            return;
        }
        if (n > 7) {
            slot.drop = {rec.id, "too-many", std::to_string(n) + " claims"};
            return;
        }

        BenchmarkInstance inst;
        inst.id = rec.id;
        inst.domain = rec.domain;
        inst.history = rec.history;
        inst.query = rec.query;
        inst.response_a = rec.response_a;
        inst.response_b = rec.response_b;
        inst.label = rec.label;
        inst.human_checklist.origin = ChecklistOrigin::kHuman;
        inst.human_checklist.items = decomp.claims;
        inst.human_checklist.validate();
        slot.kept = true;
        slot.instance = std::move(inst);
    };

    std::vector<std::exception_ptr> errors;
    parallel_for(records.size(), gw.config().max_in_flight, opts.fail_fast, process,
                 errors);

    AtomizeResult result;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (errors[i]) {
            result.drops.push_back(
                {records[i].id, "gateway-error", describe_exception(errors[i])});
        } else if (slots[i].kept) {
            result.instances.push_back(std::move(slots[i].instance));
        } else {
            result.drops.push_back(std::move(slots[i].drop));
        }
    }
    return result;
}

std::vector<RawRecord> load_raw_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot open raw-feedback file: " + path);
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            ordered_json j = ordered_json::parse(line);
            RawRecord rec;
            rec.id = j.at("id").get<std::string>();
            auto domain = domain_from_string(j.at("domain").get<std::string>());
            if (!domain) throw PipelineError("unknown domain");
            rec.domain = *domain;
            if (j.contains("history")) {
                for (const auto& turn : j.at("history")) {
                    rec.history.push_back({turn.at("role").get<std::string>(),
                                           turn.at("content").get<std::string>()});
                }
            }
            rec.query = j.at("query").get<std::string>();
            rec.response_a = j.at("response_a").get<std::string>();
            rec.response_b = j.at("response_b").get<std::string>();
            const auto& label = j.at("label");
            std::string dir = label.at("direction").get<std::string>();
            rec.label.direction = dir == "A"   ? Direction::kA
                                  : dir == "B" ? Direction::kB
                                               : Direction::kTie;
            if (label.contains("magnitude")) {
                rec.label.magnitude =
                    label.at("magnitude").get<std::string>() == "SIGNIFICANT"
                        ? Magnitude::kSignificant
                        : Magnitude::kSlight;
            }
            const auto& fb = j.at("feedback");
            rec.feedback.brief_summary = fb.at("brief_summary").get<std::string>();
            for (const auto& e : fb.at("full_evaluations")) {
                rec.feedback.full_evaluations.push_back(e.get<std::string>());
            }
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw PipelineError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void save_drop_log(const std::string& path, const std::vector<DropEntry>& drops) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write drop log: " + path);
    for (const auto& drop : drops) {
        ordered_json j;
        j["id"] = drop.id;
        j["reason"] = drop.reason;
        j["detail"] = drop.detail;
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

matching::ScoreMatrix to_score_matrix(int n_human, int n_model,
                                      const std::vector<parse::SparseScore>& scores) {
    matching::ScoreMatrix m(n_human, n_model);
    for (const auto& s : scores) {
        if (s.model_index >= 1) m.set(s.human_index, s.model_index, s.score);
    }
    return m;
}

namespace {

SampleReport evaluate_instance(const BenchmarkInstance& inst, gateway::Gateway& candidate,
                               gateway::Gateway& matcher, const EvaluateOptions& opts) {
    SampleReport report;
    report.instance_id = inst.id;
    report.domain = inst.domain;
    report.n_human = static_cast<int>(inst.human_checklist.size());

    auto flag = [&](const std::string& why) {
        report.flagged = true;
        report.metrics = {};
        report.match = {};
        report.n_model = 0;
        std::cerr << "[evaluate] " + inst.id + " flagged: " + why + "\n";
        return report;
    };

    std::string judged;
    try {
        judged = candidate.complete(gateway::render_genrm_prompt(inst));
    } catch (const gateway::GatewayError& e) {
        if (opts.fail_fast) throw;
        return flag(std::string("candidate call failed: ") + e.what());
    }

    JudgeOutput output;
    try {
        output = parse::parse_genrm_output(judged, /*strict=*/false);
    } catch (const parse::ParseError& e) {
        return flag(std::string("candidate output unparseable: ") + e.what());
    }

    // Fixed output budget: keep the first top_k reasons.
    if (static_cast<int>(output.reasons.size()) > opts.top_k) {
        output.reasons.items.resize(opts.top_k);
    }
    report.n_model = static_cast<int>(output.reasons.size());

    matching::MatchingResult match;
    if (report.n_model > 0) {
        try {
            std::string matcher_text = matcher.complete(
                gateway::render_metajudge_prompt(output.reasons, inst.human_checklist));
            parse::MatcherScores scores =
                parse::parse_matcher_scores(matcher_text, report.n_human, report.n_model);
            match = matching::optimal_matching(
                to_score_matrix(report.n_human, report.n_model, scores.scores));
        } catch (const gateway::GatewayError& e) {
            if (opts.fail_fast) throw;
            return flag(std::string("matcher call failed: ") + e.what());
        } catch (const parse::ParseError& e) {
            if (opts.fail_fast) throw;
            return flag(std::string("matcher output unparseable: ") + e.what());
        }
    } else {
        for (int i = 1; i <= report.n_human; ++i) match.per_human[i] = 0.0;
    }

    report.match = match;
    report.metrics = metrics::make_sample_metrics(match, report.n_human, report.n_model,
                                                  output.verdict, inst.label,
                                                  opts.strict_outcome);
    return report;
}

Aggregate aggregate_samples(const std::vector<const SampleReport*>& samples) {
    Aggregate agg;
    agg.n = static_cast<int>(samples.size());
    if (agg.n == 0) return agg;
    double rc_sum = 0.0, outcome_sum = 0.0;
    for (const auto* s : samples) {
        rc_sum += s->metrics.rc;
        outcome_sum += s->metrics.outcome;
    }
    agg.mean_rc = rc_sum / agg.n;
    agg.outcome_accuracy = outcome_sum / agg.n;
    return agg;
}

}  // namespace

RunReport evaluate_run(const std::vector<BenchmarkInstance>& bench,
                       gateway::Gateway& candidate, gateway::Gateway& matcher,
                       const EvaluateOptions& opts) {
    if (bench.empty()) throw metrics::EmptyRun("evaluate_run needs a nonempty benchmark");
    if (opts.top_k < 1) throw PipelineError("top_k must be >= 1");

    std::vector<SampleReport> samples(bench.size());
    std::vector<std::exception_ptr> errors;
    parallel_for(
        bench.size(), candidate.config().max_in_flight, opts.fail_fast,
        [&](std::size_t i) {
            samples[i] = evaluate_instance(bench[i], candidate, matcher, opts);
        },
        errors);
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) {
            samples[i] = SampleReport{};
            samples[i].instance_id = bench[i].id;
            samples[i].domain = bench[i].domain;
            samples[i].n_human = static_cast<int>(bench[i].human_checklist.size());
            samples[i].flagged = true;
            std::cerr << "[evaluate] " << bench[i].id
                      << " flagged: " << describe_exception(errors[i]) << "\n";
        }
    }

    std::sort(samples.begin(), samples.end(),
              [](const SampleReport& a, const SampleReport& b) {
                  return a.instance_id < b.instance_id;
              });

    RunReport report;
    report.top_k = opts.top_k;
    report.strict_outcome = opts.strict_outcome;
    report.per_sample = std::move(samples);

    std::map<std::string, std::vector<const SampleReport*>> by_domain;
    std::vector<const SampleReport*> all;
    for (const auto& s : report.per_sample) {
        by_domain[to_string(s.domain)].push_back(&s);
        all.push_back(&s);
        if (s.flagged) ++report.flagged_count;
    }
    for (const auto& [domain, group] : by_domain) {
        report.per_domain[domain] = aggregate_samples(group);
    }
    report.overall = aggregate_samples(all);

    std::uint64_t h = detail::fnv1a64(gateway::prompt_fingerprint());
    h = detail::fnv1a64(candidate.config().fingerprint(), h);
    h = detail::fnv1a64(matcher.config().fingerprint(), h);
    report.config_fingerprint = detail::to_hex(h);

    std::uint64_t rid = detail::fnv1a64(report.config_fingerprint);
    for (const auto& inst : bench) rid = detail::fnv1a64(instance_to_json_line(inst), rid);
    rid = detail::fnv1a64(std::to_string(opts.top_k), rid);
    rid = detail::fnv1a64(opts.strict_outcome ? "strict" : "direction", rid);
    report.run_id = "run-" + detail::to_hex(rid);
    return report;
}

// ---------------------------------------------------------------------------
// Flaw tagging
// ---------------------------------------------------------------------------

FlawTagDistribution flaw_tag_run(const std::vector<JudgeOutput>& judgments,
                                 gateway::Gateway& gw, bool fail_fast) {
    if (judgments.empty()) throw PipelineError("flaw_tag_run needs judgments");

    std::vector<parse::FlawTagging> taggings(judgments.size());
    std::vector<std::exception_ptr> errors;
    parallel_for(
        judgments.size(), gw.config().max_in_flight, fail_fast,
        [&](std::size_t i) {
            const auto& reasons = judgments[i].reasons;
            if (reasons.empty()) return;
            std::string text = gw.complete(gateway::render_flaw_tag_prompt(reasons));
            taggings[i] =
                parse::parse_flaw_tags(text, static_cast<int>(reasons.size()));
        },
        errors);

    FlawTagDistribution dist;
    dist.prompt_version = gateway::kFlawTagPromptVersion;
    std::map<parse::FlawTag, int> counts;
    for (std::size_t i = 0; i < taggings.size(); ++i) {
        if (errors[i]) {
            std::cerr << "[flawtag] judgment " << i
                      << " skipped: " << describe_exception(errors[i]) << "\n";
            continue;
        }
        for (const auto& tags : taggings[i].per_item) {
            ++dist.item_count;
            for (parse::FlawTag t : tags) ++counts[t];
        }
    }
    for (int t = 0; t < 7; ++t) {
        auto tag = static_cast<parse::FlawTag>(t);
        double rate = dist.item_count == 0
                          ? 0.0
                          : static_cast<double>(counts[tag]) / dist.item_count;
        dist.rates[parse::to_string(tag)] = rate;
    }
    return dist;
}

std::string emit_flaw_distribution(const FlawTagDistribution& dist) {
    ordered_json j;
    j["prompt_version"] = dist.prompt_version;
    j["item_count"] = dist.item_count;
    j["rates"] = ordered_json::object();
    for (const auto& [tag, rate] : dist.rates) j["rates"][tag] = rate;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

void check_report(const RunReport& report) {
    int domain_n = 0;
    for (const auto& [domain, agg] : report.per_domain) domain_n += agg.n;
    if (domain_n != report.overall.n) {
        throw ReportInvariant("per-domain N does not sum to overall N");
    }
    if (static_cast<int>(report.per_sample.size()) != report.overall.n) {
        throw ReportInvariant("per_sample size " +
                              std::to_string(report.per_sample.size()) +
                              " != overall N " + std::to_string(report.overall.n));
    }
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (const auto& [domain, agg] : report.per_domain) {
        if (!in_unit(agg.mean_rc) || !in_unit(agg.outcome_accuracy)) {
            throw ReportInvariant("aggregate for " + domain + " outside [0,1]");
        }
    }
    if (report.overall.n > 0 &&
        (!in_unit(report.overall.mean_rc) || !in_unit(report.overall.outcome_accuracy))) {
        throw ReportInvariant("overall aggregate outside [0,1]");
    }
}

ordered_json aggregate_to_json(const Aggregate& agg) {
    ordered_json j;
    j["mean_rc"] = agg.mean_rc;
    j["outcome_accuracy"] = agg.outcome_accuracy;
    j["n"] = agg.n;
    return j;
}

Aggregate aggregate_from_json(const ordered_json& j) {
    Aggregate agg;
    agg.mean_rc = j.at("mean_rc").get<double>();
    agg.outcome_accuracy = j.at("outcome_accuracy").get<double>();
    agg.n = j.at("n").get<int>();
    return agg;
}

}  // namespace

std::string emit_report(const RunReport& report, ReportFormat format) {
    check_report(report);

    if (format == ReportFormat::kJson) {
        ordered_json j;
        j["run_id"] = report.run_id;
        j["config_fingerprint"] = report.config_fingerprint;
        j["top_k"] = report.top_k;
        j["strict_outcome"] = report.strict_outcome;
        j["per_sample"] = ordered_json::array();
        for (const auto& s : report.per_sample) {
            ordered_json row;
            row["id"] = s.instance_id;
            row["domain"] = to_string(s.domain);
            row["flagged"] = s.flagged;
            row["n_human"] = s.n_human;
            row["n_model"] = s.n_model;
            row["rc"] = s.metrics.rc;
            row["outcome"] = s.metrics.outcome;
            row["ap"] = s.metrics.ap;
            row["hybrid"] = s.metrics.hybrid;
            ordered_json match;
            match["total"] = s.match.total;
            match["pairs"] = ordered_json::array();
            for (const auto& [i, jdx] : s.match.pairs) {
                match["pairs"].push_back(ordered_json::array({i, jdx}));
            }
            match["per_human"] = ordered_json::object();
            for (const auto& [i, score] : s.match.per_human) {
                match["per_human"][std::to_string(i)] = score;
            }
            row["matching"] = std::move(match);
            j["per_sample"].push_back(std::move(row));
        }
        j["per_domain"] = ordered_json::object();
        for (const auto& [domain, agg] : report.per_domain) {
            j["per_domain"][domain] = aggregate_to_json(agg);
        }
        j["overall"] = aggregate_to_json(report.overall);
        j["flagged"] = report.flagged_count;
        return j.dump(2) + "\n";
    }

    // CSV: per-sample rows plus an aggregate footer, one
    // (outcome accuracy, mean RC) pair per domain and overall.
    std::string out = "id,domain,rc,outcome,ap,hybrid\n";
    for (const auto& s : report.per_sample) {
        out += csv_escape(s.instance_id) + "," + to_string(s.domain) + "," +
               format_double(s.metrics.rc) + "," + std::to_string(s.metrics.outcome) +
               "," + format_double(s.metrics.ap) + "," +
               format_double(s.metrics.hybrid) + "\n";
    }
    out += "# aggregate,domain,mean_rc,outcome_accuracy,n\n";
    for (const auto& [domain, agg] : report.per_domain) {
        out += "# aggregate," + domain + "," + format_double(agg.mean_rc) + "," +
               format_double(agg.outcome_accuracy) + "," + std::to_string(agg.n) + "\n";
    }
    out += "# aggregate,OVERALL," + format_double(report.overall.mean_rc) + "," +
           format_double(report.overall.outcome_accuracy) + "," +
           std::to_string(report.overall.n) + "\n";
    return out;
}

RunReport load_report_json(const std::string& bytes) {
    ordered_json j = ordered_json::parse(bytes);
    RunReport report;
    report.run_id = j.at("run_id").get<std::string>();
    report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    report.top_k = j.at("top_k").get<int>();
    report.strict_outcome = j.at("strict_outcome").get<bool>();
    for (const auto& row : j.at("per_sample")) {
        SampleReport s;
        s.instance_id = row.at("id").get<std::string>();
        auto domain = domain_from_string(row.at("domain").get<std::string>());
        if (!domain) throw PipelineError("unknown domain in report");
        s.domain = *domain;
        s.flagged = row.at("flagged").get<bool>();
        s.n_human = row.at("n_human").get<int>();
        s.n_model = row.at("n_model").get<int>();
        s.metrics.rc = row.at("rc").get<double>();
        s.metrics.outcome = row.at("outcome").get<int>();
        s.metrics.ap = row.at("ap").get<double>();
        s.metrics.hybrid = row.at("hybrid").get<double>();
        const auto& match = row.at("matching");
        s.match.total = match.at("total").get<double>();
        for (const auto& pair : match.at("pairs")) {
            s.match.pairs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        }
        for (const auto& [key, value] : match.at("per_human").items()) {
            s.match.per_human[std::stoi(key)] = value.get<double>();
        }
        report.per_sample.push_back(std::move(s));
    }
    for (const auto& [domain, agg] : j.at("per_domain").items()) {
        report.per_domain[domain] = aggregate_from_json(agg);
    }
    report.overall = aggregate_from_json(j.at("overall"));
    report.flagged_count = j.at("flagged").get<int>();
    return report;
}

}  // namespace metajudge::pipelines
