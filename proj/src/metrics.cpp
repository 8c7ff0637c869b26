#include "metajudge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace metajudge::metrics {

double sample_rationale_consistency(const matching::MatchingResult& match, int n_human) {
    if (n_human < 1) throw EmptyChecklist("rationale consistency needs n_human >= 1");
    if (match.total > static_cast<double>(n_human) + 1e-9) {
        throw MetricsError("matching total " + std::to_string(match.total) +
                           " exceeds checklist size " + std::to_string(n_human));
    }
    return match.total / static_cast<double>(n_human);
}

double aggregate_rc(const std::vector<double>& per_sample) {
    if (per_sample.empty()) throw EmptyRun("cannot aggregate an empty run");
    double sum = 0.0;
    for (double rc : per_sample) {
        if (rc < 0.0 || rc > 1.0) {
            throw MetricsError("per-sample RC " + std::to_string(rc) + " outside [0,1]");
        }
        sum += rc;
    }
    return sum / static_cast<double>(per_sample.size());
}

int outcome_reward(Verdict predicted, const PreferenceLabel& label, bool strict) {
    PreferenceLabel pred = verdict_to_preference(predicted);
    if (pred.direction != label.direction) return 0;
    if (strict && label.direction != Direction::kTie && pred.magnitude != label.magnitude) {
        return 0;
    }
    return 1;
}

double average_precision(const matching::MatchingResult& match, int n_model, int n_human) {
    if (n_human < 1) throw EmptyChecklist("average precision needs n_human >= 1");

    std::set<int> matched_ranks;
    for (const auto& [human_index, model_index] : match.pairs) {
        (void)human_index;
        if (model_index < 1 || model_index > n_model) {
            throw MetricsError("matched model index " + std::to_string(model_index) +
                               " outside 1.." + std::to_string(n_model));
        }
        matched_ranks.insert(model_index);
    }

    double sum = 0.0;
    int hits = 0;
    for (int k = 1; k <= n_model; ++k) {
        if (matched_ranks.count(k)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k);
        }
    }
    return sum / static_cast<double>(n_human);
}

double hybrid_reward(double ap, int outcome) {
    if (ap < 0.0 || ap > 1.0) {
        throw MetricsError("ap " + std::to_string(ap) + " outside [0,1]");
    }
    if (outcome != 0 && outcome != 1) {
        throw MetricsError("outcome must be 0 or 1");
    }
    return outcome == 1 ? ap : 0.0;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.empty()) throw EmptyGroup("cannot standardize an empty group");

    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;

    double variance = 0.0;
    for (double r : rewards) variance += (r - mean) * (r - mean);
    variance /= n;  // population variance
    double std_dev = std::sqrt(variance);

    std::vector<double> advantages(rewards.size(), 0.0);
    if (std_dev < 1e-12) return advantages;  // all-equal group, singletons included
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        advantages[i] = (rewards[i] - mean) / std_dev;
    }
    return advantages;
}

GroupRewards make_group_rewards(std::vector<double> rewards) {
    GroupRewards group;
    group.advantages = group_advantages(rewards);
    group.rewards = std::move(rewards);
    return group;
}

SampleMetrics make_sample_metrics(const matching::MatchingResult& match, int n_human,
                                  int n_model, Verdict predicted,
                                  const PreferenceLabel& label, bool strict_outcome) {
    SampleMetrics s;
    s.rc = sample_rationale_consistency(match, n_human);
    s.outcome = outcome_reward(predicted, label, strict_outcome);
    s.ap = average_precision(match, n_model, n_human);
    s.hybrid = hybrid_reward(s.ap, s.outcome);
    return s;
}

}  // namespace metajudge::metrics
