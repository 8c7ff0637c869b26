#pragma once

#include <vector>

#include "metajudge/core.hpp"
#include "metajudge/matching.hpp"

namespace metajudge::metrics {

struct MetricsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyChecklist : MetricsError {
    using MetricsError::MetricsError;
};

struct EmptyRun : MetricsError {
    using MetricsError::MetricsError;
};

struct EmptyGroup : MetricsError {
    using MetricsError::MetricsError;
};

/// Per-sample scores. hybrid is always ap * outcome.
struct SampleMetrics {
    double rc = 0.0;      // S_total / |human checklist|
    int outcome = 0;      // 0 or 1
    double ap = 0.0;      // rank-sensitive rationale reward
    double hybrid = 0.0;  // ap gated by outcome

    bool operator==(const SampleMetrics&) const = default;
};

/// Rewards of one rollout group plus their standardized advantages.
struct GroupRewards {
    std::vector<double> rewards;
    std::vector<double> advantages;
};

/// Soft recall of the human checklist: matched total / checklist size.
double sample_rationale_consistency(const matching::MatchingResult& match, int n_human);

/// Arithmetic mean over per-sample values, each in [0,1].
double aggregate_rc(const std::vector<double>& per_sample);

/// 1 iff the predicted verdict agrees with the human label direction;
/// strict mode additionally requires magnitude equality for non-ties.
int outcome_reward(Verdict predicted, const PreferenceLabel& label, bool strict);

/// Average precision of the ordered model reason list against the optimal
/// matching, normalized by the human checklist size:
/// AP = sum_{k=1..n_model} P@k * I(k) / n_human.
double average_precision(const matching::MatchingResult& match, int n_model, int n_human);

/// ap * outcome: rationale reward gated on outcome correctness.
double hybrid_reward(double ap, int outcome);

/// Group-standardized advantages: (r - mean) / population std. All-equal
/// groups (std below 1e-12), including singletons, yield all zeros.
std::vector<double> group_advantages(const std::vector<double>& rewards);

/// Bundles a rollout group's rewards with their advantages.
GroupRewards make_group_rewards(std::vector<double> rewards);

/// Assembles the full per-sample metric set from one matching outcome.
SampleMetrics make_sample_metrics(const matching::MatchingResult& match, int n_human,
                                  int n_model, Verdict predicted,
                                  const PreferenceLabel& label, bool strict_outcome);

}  // namespace metajudge::metrics
