#pragma once

#include <map>
#include <string>
#include <vector>

#include "metajudge/core.hpp"
#include "metajudge/judge_gateway.hpp"
#include "metajudge/matching.hpp"
#include "metajudge/metrics.hpp"
#include "metajudge/parse.hpp"

namespace metajudge::pipelines {

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// emit_report refuses to serialize a report whose aggregates contradict
/// its per-sample rows.
struct ReportInvariant : PipelineError {
    using PipelineError::PipelineError;
};

// ---------------------------------------------------------------------------
// Atomization
// ---------------------------------------------------------------------------

/// One pre-decomposition record: instance context plus free-form feedback.
struct RawRecord {
    std::string id;
    Domain domain = Domain::kOther;
    std::vector<ChatTurn> history;
    std::string query;
    std::string response_a;
    std::string response_b;
    PreferenceLabel label;
    RawFeedback feedback;
};

struct DropEntry {
    std::string id;
    std::string reason;  // too-few | too-many | parse-failure | gateway-error
    std::string detail;
};

struct AtomizeResult {
    std::vector<BenchmarkInstance> instances;
    std::vector<DropEntry> drops;
};

struct AtomizeOptions {
    bool fail_fast = false;
};

/// Decomposes each record's free-form feedback into atomic claims and keeps
/// records with 3..7 claims; everything else lands in the drop log.
AtomizeResult atomize_dataset(const std::vector<RawRecord>& records,
                              gateway::Gateway& gw, const AtomizeOptions& opts = {});

std::vector<RawRecord> load_raw_jsonl(const std::string& path);
void save_drop_log(const std::string& path, const std::vector<DropEntry>& drops);

// ---------------------------------------------------------------------------
// Evaluation runs
// ---------------------------------------------------------------------------

struct SampleReport {
    std::string instance_id;
    Domain domain = Domain::kOther;
    bool flagged = false;  // candidate output unusable; scored all-zero
    int n_human = 0;
    int n_model = 0;  // model reasons after top-k truncation
    metrics::SampleMetrics metrics;
    matching::MatchingResult match;

    bool operator==(const SampleReport&) const = default;
};

struct Aggregate {
    double mean_rc = 0.0;
    double outcome_accuracy = 0.0;
    int n = 0;

    bool operator==(const Aggregate&) const = default;
};

struct RunReport {
    std::string run_id;
    std::string config_fingerprint;
    int top_k = 5;
    bool strict_outcome = false;
    std::vector<SampleReport> per_sample;        // sorted by instance id
    std::map<std::string, Aggregate> per_domain;
    Aggregate overall;
    int flagged_count = 0;

    bool operator==(const RunReport&) const = default;
};

struct EvaluateOptions {
    int top_k = 5;
    bool strict_outcome = false;
    bool fail_fast = false;
};

/// Full candidate -> matcher -> matching -> metrics loop over a benchmark.
/// Record-level failures (unparseable candidate output, matcher or gateway
/// trouble) score zero and are flagged rather than excluded.
RunReport evaluate_run(const std::vector<BenchmarkInstance>& bench,
                       gateway::Gateway& candidate, gateway::Gateway& matcher,
                       const EvaluateOptions& opts = {});

// ---------------------------------------------------------------------------
// Flaw tagging
// ---------------------------------------------------------------------------

struct FlawTagDistribution {
    std::map<std::string, double> rates;  // "F1".."F7" -> tagged fraction
    int item_count = 0;
    std::string prompt_version;
};

/// Labels every rationale item of every judgment with flaw tags and
/// reports per-tag rates over all items.
FlawTagDistribution flaw_tag_run(const std::vector<JudgeOutput>& judgments,
                                 gateway::Gateway& gw, bool fail_fast = false);

std::string emit_flaw_distribution(const FlawTagDistribution& dist);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { kJson, kCsv };

/// JSON is loss-less and reload-stable; CSV carries per-sample rows plus an
/// aggregate footer with one (outcome accuracy, RC) pair per domain.
std::string emit_report(const RunReport& report, ReportFormat format);
RunReport load_report_json(const std::string& bytes);

/// Builds the dense matrix the matcher scores imply. Entries with
/// model_index 0 stay at the default 0.
matching::ScoreMatrix to_score_matrix(int n_human, int n_model,
                                      const std::vector<parse::SparseScore>& scores);

}  // namespace metajudge::pipelines
